#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace distcurrents::dsl {

/// Location of a token inside the original source text. Lines and columns
/// are 1-based; offset is the 0-based byte position.
struct SourceSpan {
  int offset = 0;
  int length = 0;
  int line = 1;
  int col = 1;
};

class ParseError : public std::invalid_argument {
 public:
  ParseError(const std::string& what, int line, int col)
      : std::invalid_argument(what), line(line), col(col) {}
  int line;
  int col;
};

enum class NodeKind : std::uint8_t { Number, Variable, Unary, Binary, Call };
enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div, Pow };
enum class Builtin : std::uint8_t { Sin, Cos, Exp, Sqrt, Abs, Atan2, Norm, Min, Max, Bump };

struct Node {
  NodeKind kind;
  BinaryOp op = BinaryOp::Add;
  Builtin fn = Builtin::Sin;
  double number = 0.0;
  int variable = 0;     // 0-based coordinate slot
  int child_begin = 0;  // into the children table
  int child_count = 0;
  SourceSpan span;
};

/// Immutable scalar expression over the variables x1..x_arity.
///
/// Grammar (documented in docs/expression-grammar.md):
///   expression = term { ("+" | "-") term }
///   term       = factor { ("*" | "/") factor }
///   factor     = base [ "^" factor ]            (right-associative)
///   base       = "-" base | atom                (minus binds to the base)
///   atom       = number | variable | call | "(" expression ")"
/// so "-x1^2" squares the negated base. Evaluation follows IEEE-754 double
/// semantics throughout: non-finite values propagate instead of throwing.
class Expression {
 public:
  /// Parses source text; throws ParseError with a 1-based line/column on
  /// syntax errors, unknown names, and out-of-range variables.
  static Expression parse(std::string_view source, int arity);

  /// Wraps a constant.
  static Expression constant(double value, int arity);

  int arity() const noexcept { return arity_; }

  double evaluate(std::span<const double> point) const;

  /// Unparses with minimal parentheses; parsing the result reproduces the
  /// same tree. Numbers render with shortest round-trip precision.
  std::string to_string() const;

  /// Nodes in the underlying arena (root last); exposed for diagnostics.
  const std::vector<Node>& nodes() const;
  const Node& root() const;

  struct Arena;  // node storage, defined in expr.cpp

 private:
  Expression(std::shared_ptr<const Arena> arena, int arity);
  std::shared_ptr<const Arena> arena_;
  int arity_;
};

/// Fixed-size tuple of component expressions sharing one arity.
class VectorExpression {
 public:
  VectorExpression(std::vector<Expression> components);
  static VectorExpression parse(std::span<const std::string> sources, int arity);

  int arity() const noexcept;
  int components() const noexcept { return static_cast<int>(comps_.size()); }
  const Expression& component(int i) const { return comps_.at(i); }

  void evaluate(std::span<const double> point, std::span<double> out) const;

 private:
  std::vector<Expression> comps_;
};

/// Central finite difference of e in coordinate `axis` at `point`, step h.
/// `point` is used as scratch and restored before returning.
double fd_partial(const Expression& e, std::span<double> point, int axis, double h);

}  // namespace distcurrents::dsl
