#include "distcurrents/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>

namespace distcurrents::dsl {

struct Expression::Arena {
  std::vector<Node> nodes;
  std::vector<int> children;
  int root = -1;
};

namespace {

// ==== lexer ====

enum class Tok : std::uint8_t {
  Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, Semi, End
};

struct Token {
  Tok type = Tok::End;
  double number = 0.0;
  std::string_view text;
  SourceSpan span;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return cur_; }

  Token take() {
    Token t = cur_;
    advance();
    return t;
  }

  [[noreturn]] void fail(const std::string& msg, const SourceSpan& at) const {
    throw ParseError(msg + " at line " + std::to_string(at.line) + ", column " +
                         std::to_string(at.col),
                     at.line, at.col);
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) bump();
    cur_ = Token{};
    cur_.span = SourceSpan{static_cast<int>(pos_), 1, line_, col_};
    if (pos_ >= src_.size()) {
      cur_.type = Tok::End;
      cur_.span.length = 0;
      return;
    }
    const char c = src_[pos_];
    const auto single = [&](Tok t) {
      cur_.type = t;
      bump();
    };
    switch (c) {
      case '+': single(Tok::Plus); return;
      case '-': single(Tok::Minus); return;
      case '*': single(Tok::Star); return;
      case '/': single(Tok::Slash); return;
      case '^': single(Tok::Caret); return;
      case '(': single(Tok::LParen); return;
      case ')': single(Tok::RParen); return;
      case ',': single(Tok::Comma); return;
      case ';': single(Tok::Semi); return;
      default: break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      lex_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
        bump();
      }
      cur_.type = Tok::Ident;
      cur_.text = src_.substr(start, pos_ - start);
      cur_.span.length = static_cast<int>(pos_ - start);
      return;
    }
    fail(std::string("unexpected character '") + c + "'", cur_.span);
  }

  void lex_number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      bump();
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_;
      bump();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) bump();
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
      } else {
        // not an exponent after all, e.g. "2e" followed by something else
        while (pos_ > mark) unbump();
      }
    }
    const std::string text(src_.substr(start, pos_ - start));
    if (text == ".") fail("unexpected character '.'", cur_.span);
    cur_.type = Tok::Number;
    cur_.number = std::strtod(text.c_str(), nullptr);
    cur_.span.length = static_cast<int>(pos_ - start);
  }

  void bump() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void unbump() {
    --pos_;
    --col_;  // numbers never span lines
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token cur_;
};

// ==== parser ====

const std::map<std::string_view, std::pair<Builtin, int>>& builtin_table() {
  // name -> (builtin, fixed argument count; -1 means one-or-more)
  static const std::map<std::string_view, std::pair<Builtin, int>> table = {
      {"sin", {Builtin::Sin, 1}},     {"cos", {Builtin::Cos, 1}},
      {"exp", {Builtin::Exp, 1}},     {"sqrt", {Builtin::Sqrt, 1}},
      {"abs", {Builtin::Abs, 1}},     {"atan2", {Builtin::Atan2, 2}},
      {"norm", {Builtin::Norm, -1}},  {"min", {Builtin::Min, -1}},
      {"max", {Builtin::Max, -1}},    {"bump", {Builtin::Bump, -1}},
  };
  return table;
}

class Parser {
 public:
  Parser(std::string_view src, int arity) : lex_(src), arity_(arity) {}

  std::shared_ptr<Expression::Arena> run() {
    auto arena = std::make_shared<Expression::Arena>();
    arena_ = arena.get();
    arena->root = parse_expression();
    if (lex_.peek().type != Tok::End) {
      lex_.fail("unexpected trailing input", lex_.peek().span);
    }
    return arena;
  }

 private:
  int push(Node n) {
    arena_->nodes.push_back(n);
    return static_cast<int>(arena_->nodes.size()) - 1;
  }

  int push_children(std::span<const int> kids) {
    const int begin = static_cast<int>(arena_->children.size());
    arena_->children.insert(arena_->children.end(), kids.begin(), kids.end());
    return begin;
  }

  int parse_expression() {
    int lhs = parse_term();
    while (lex_.peek().type == Tok::Plus || lex_.peek().type == Tok::Minus) {
      Token op = lex_.take();
      int rhs = parse_term();
      lhs = binary(op.type == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub, lhs, rhs, op.span);
    }
    return lhs;
  }

  int parse_term() {
    int lhs = parse_factor();
    while (lex_.peek().type == Tok::Star || lex_.peek().type == Tok::Slash) {
      Token op = lex_.take();
      int rhs = parse_factor();
      lhs = binary(op.type == Tok::Star ? BinaryOp::Mul : BinaryOp::Div, lhs, rhs, op.span);
    }
    return lhs;
  }

  // factor = base [^ factor]; the caret is right-associative and its base
  // absorbs a leading minus, so -x^2 squares -x.
  int parse_factor() {
    int lhs = parse_base();
    if (lex_.peek().type == Tok::Caret) {
      Token op = lex_.take();
      int rhs = parse_factor();
      lhs = binary(BinaryOp::Pow, lhs, rhs, op.span);
    }
    return lhs;
  }

  int parse_base() {
    if (lex_.peek().type == Tok::Minus) {
      Token op = lex_.take();
      int child = parse_base();
      Node n;
      n.kind = NodeKind::Unary;
      n.span = op.span;
      n.child_begin = push_children(std::span<const int>(&child, 1));
      n.child_count = 1;
      return push(n);
    }
    return parse_atom();
  }

  int parse_atom() {
    const Token t = lex_.peek();
    switch (t.type) {
      case Tok::Number: {
        lex_.take();
        Node n;
        n.kind = NodeKind::Number;
        n.number = t.number;
        n.span = t.span;
        return push(n);
      }
      case Tok::LParen: {
        lex_.take();
        int inner = parse_expression();
        expect(Tok::RParen, "expected ')'");
        return inner;
      }
      case Tok::Ident:
        return parse_ident();
      default:
        lex_.fail("expected expression", t.span);
    }
  }

  int parse_ident() {
    const Token name = lex_.take();
    if (lex_.peek().type == Tok::LParen) return parse_call(name);

    // variable x<k>, 1-based
    if (name.text.size() >= 2 && name.text[0] == 'x') {
      bool digits = true;
      for (std::size_t i = 1; i < name.text.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(name.text[i]))) digits = false;
      }
      if (digits) {
        const int k = std::atoi(std::string(name.text.substr(1)).c_str());
        if (k < 1 || k > arity_) {
          lex_.fail("variable " + std::string(name.text) + " outside arity " +
                        std::to_string(arity_),
                    name.span);
        }
        Node n;
        n.kind = NodeKind::Variable;
        n.variable = k - 1;
        n.span = name.span;
        return push(n);
      }
    }
    lex_.fail("unknown variable '" + std::string(name.text) + "'", name.span);
  }

  int parse_call(const Token& name) {
    auto it = builtin_table().find(name.text);
    if (it == builtin_table().end()) {
      lex_.fail("unknown function '" + std::string(name.text) + "'", name.span);
    }
    const auto [fn, want] = it->second;
    expect(Tok::LParen, "expected '('");
    std::vector<int> args;
    int radius_args = 0;
    args.push_back(parse_expression());
    while (lex_.peek().type == Tok::Comma) {
      if (radius_args) lex_.fail("expected ')' after the radius argument", lex_.peek().span);
      lex_.take();
      args.push_back(parse_expression());
    }
    if (lex_.peek().type == Tok::Semi) {
      if (fn != Builtin::Bump) {
        lex_.fail("';' separates the bump radius only", lex_.peek().span);
      }
      lex_.take();
      args.push_back(parse_expression());
      radius_args = 1;
    }
    expect(Tok::RParen, "expected ')'");

    const int got = static_cast<int>(args.size());
    if (fn == Builtin::Bump) {
      if (!radius_args) {
        lex_.fail("bump needs a radius after ';', e.g. bump(0,0;0.5)", name.span);
      }
      const int centers = got - 1;
      if (centers != 1 && centers != arity_) {
        lex_.fail("bump center needs 1 or " + std::to_string(arity_) +
                      " components, got " + std::to_string(centers),
                  name.span);
      }
    } else if (want == -1) {
      if (got < 1) lex_.fail("function needs at least one argument", name.span);
      if ((fn == Builtin::Min || fn == Builtin::Max) && got < 2) {
        lex_.fail(std::string(name.text) + " needs at least two arguments", name.span);
      }
    } else if (got != want) {
      lex_.fail(std::string(name.text) + " takes " + std::to_string(want) +
                    " argument(s), got " + std::to_string(got),
                name.span);
    }

    Node n;
    n.kind = NodeKind::Call;
    n.fn = fn;
    n.span = name.span;
    n.child_begin = push_children(args);
    n.child_count = got;
    return push(n);
  }

  int binary(BinaryOp op, int lhs, int rhs, const SourceSpan& span) {
    Node n;
    n.kind = NodeKind::Binary;
    n.op = op;
    n.span = span;
    const int kids[2] = {lhs, rhs};
    n.child_begin = push_children(kids);
    n.child_count = 2;
    return push(n);
  }

  void expect(Tok type, const char* msg) {
    if (lex_.peek().type != type) lex_.fail(msg, lex_.peek().span);
    lex_.take();
  }

  Lexer lex_;
  int arity_;
  Expression::Arena* arena_ = nullptr;
};

// ==== evaluation ====

double eval_node(const Expression::Arena& a, int idx, std::span<const double> x) {
  const Node& n = a.nodes[idx];
  const int* kid = a.children.data() + n.child_begin;
  switch (n.kind) {
    case NodeKind::Number:
      return n.number;
    case NodeKind::Variable:
      return x[n.variable];
    case NodeKind::Unary:
      return -eval_node(a, kid[0], x);
    case NodeKind::Binary: {
      const double l = eval_node(a, kid[0], x);
      const double r = eval_node(a, kid[1], x);
      switch (n.op) {
        case BinaryOp::Add: return l + r;
        case BinaryOp::Sub: return l - r;
        case BinaryOp::Mul: return l * r;
        case BinaryOp::Div: return l / r;
        case BinaryOp::Pow: return std::pow(l, r);
      }
      return 0.0;
    }
    case NodeKind::Call: {
      switch (n.fn) {
        case Builtin::Sin: return std::sin(eval_node(a, kid[0], x));
        case Builtin::Cos: return std::cos(eval_node(a, kid[0], x));
        case Builtin::Exp: return std::exp(eval_node(a, kid[0], x));
        case Builtin::Sqrt: return std::sqrt(eval_node(a, kid[0], x));
        case Builtin::Abs: return std::fabs(eval_node(a, kid[0], x));
        case Builtin::Atan2:
          return std::atan2(eval_node(a, kid[0], x), eval_node(a, kid[1], x));
        case Builtin::Norm: {
          double s = 0.0;
          for (int i = 0; i < n.child_count; ++i) {
            const double v = eval_node(a, kid[i], x);
            s += v * v;
          }
          return std::sqrt(s);
        }
        case Builtin::Min: {
          double s = eval_node(a, kid[0], x);
          for (int i = 1; i < n.child_count; ++i) s = std::fmin(s, eval_node(a, kid[i], x));
          return s;
        }
        case Builtin::Max: {
          double s = eval_node(a, kid[0], x);
          for (int i = 1; i < n.child_count; ++i) s = std::fmax(s, eval_node(a, kid[i], x));
          return s;
        }
        case Builtin::Bump: {
          const int centers = n.child_count - 1;
          const double r = eval_node(a, kid[n.child_count - 1], x);
          double s = 0.0;
          const int d = static_cast<int>(x.size());
          for (int i = 0; i < d; ++i) {
            const double c = eval_node(a, kid[centers == 1 ? 0 : i], x);
            const double diff = x[i] - c;
            s += diff * diff;
          }
          s /= r * r;
          if (s >= 1.0) return 0.0;
          return std::exp(1.0 - 1.0 / (1.0 - s));
        }
      }
      return 0.0;
    }
  }
  return 0.0;
}

// ==== printing ====

std::string format_number(double v) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return std::string(buf);
}

const char* builtin_name(Builtin fn) {
  switch (fn) {
    case Builtin::Sin: return "sin";
    case Builtin::Cos: return "cos";
    case Builtin::Exp: return "exp";
    case Builtin::Sqrt: return "sqrt";
    case Builtin::Abs: return "abs";
    case Builtin::Atan2: return "atan2";
    case Builtin::Norm: return "norm";
    case Builtin::Min: return "min";
    case Builtin::Max: return "max";
    case Builtin::Bump: return "bump";
  }
  return "?";
}

// Precedence for printing: additive 1, multiplicative 2, unary minus 3,
// caret 4, atoms 5. `context` is the minimum precedence a child may render
// at without parentheses.
std::string print_node(const Expression::Arena& a, int idx, int context) {
  const Node& n = a.nodes[idx];
  const int* kid = a.children.data() + n.child_begin;
  std::string out;
  int prec = 5;
  switch (n.kind) {
    case NodeKind::Number: {
      out = format_number(n.number);
      // a leading minus from the formatter behaves like unary minus
      prec = out.size() && out[0] == '-' ? 3 : 5;
      break;
    }
    case NodeKind::Variable:
      out = "x" + std::to_string(n.variable + 1);
      break;
    case NodeKind::Unary:
      out = "-" + print_node(a, kid[0], 5);
      prec = 3;
      break;
    case NodeKind::Binary: {
      const char* sym = "";
      int lctx = 0, rctx = 0;
      switch (n.op) {
        case BinaryOp::Add: sym = " + "; prec = 1; lctx = 1; rctx = 2; break;
        case BinaryOp::Sub: sym = " - "; prec = 1; lctx = 1; rctx = 2; break;
        case BinaryOp::Mul: sym = "*"; prec = 2; lctx = 2; rctx = 3; break;
        case BinaryOp::Div: sym = "/"; prec = 2; lctx = 2; rctx = 3; break;
        case BinaryOp::Pow: sym = "^"; prec = 4; lctx = 5; rctx = 3; break;
      }
      out = print_node(a, kid[0], lctx) + sym + print_node(a, kid[1], rctx);
      break;
    }
    case NodeKind::Call: {
      out = builtin_name(n.fn);
      out += '(';
      const int plain = n.fn == Builtin::Bump ? n.child_count - 1 : n.child_count;
      for (int i = 0; i < plain; ++i) {
        if (i) out += ", ";
        out += print_node(a, kid[i], 0);
      }
      if (n.fn == Builtin::Bump) {
        out += "; ";
        out += print_node(a, kid[n.child_count - 1], 0);
      }
      out += ')';
      break;
    }
  }
  if (prec < context) return "(" + out + ")";
  return out;
}

}  // namespace

Expression::Expression(std::shared_ptr<const Arena> arena, int arity)
    : arena_(std::move(arena)), arity_(arity) {}

Expression Expression::parse(std::string_view source, int arity) {
  if (arity < 1 || arity > 8) {
    throw std::invalid_argument("expression arity must lie in [1, 8]");
  }
  Parser p(source, arity);
  return Expression(p.run(), arity);
}

Expression Expression::constant(double value, int arity) {
  auto arena = std::make_shared<Arena>();
  Node n;
  n.kind = NodeKind::Number;
  n.number = value;
  arena->nodes.push_back(n);
  arena->root = 0;
  return Expression(std::move(arena), arity);
}

double Expression::evaluate(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != arity_) {
    throw std::invalid_argument("evaluation point has arity " + std::to_string(point.size()) +
                                ", expression expects " + std::to_string(arity_));
  }
  return eval_node(*arena_, arena_->root, point);
}

std::string Expression::to_string() const { return print_node(*arena_, arena_->root, 0); }

const std::vector<Node>& Expression::nodes() const { return arena_->nodes; }

const Node& Expression::root() const { return arena_->nodes[arena_->root]; }

VectorExpression::VectorExpression(std::vector<Expression> components)
    : comps_(std::move(components)) {
  if (comps_.empty()) throw std::invalid_argument("vector expression needs components");
  for (const auto& c : comps_) {
    if (c.arity() != comps_[0].arity()) {
      throw std::invalid_argument("vector expression components must share one arity");
    }
  }
}

VectorExpression VectorExpression::parse(std::span<const std::string> sources, int arity) {
  std::vector<Expression> comps;
  comps.reserve(sources.size());
  for (const auto& s : sources) comps.push_back(Expression::parse(s, arity));
  return VectorExpression(std::move(comps));
}

int VectorExpression::arity() const noexcept { return comps_[0].arity(); }

void VectorExpression::evaluate(std::span<const double> point, std::span<double> out) const {
  for (std::size_t i = 0; i < comps_.size(); ++i) out[i] = comps_[i].evaluate(point);
}

double fd_partial(const Expression& e, std::span<double> point, int axis, double h) {
  const double saved = point[axis];
  point[axis] = saved + h;
  const double fp = e.evaluate(point);
  point[axis] = saved - h;
  const double fm = e.evaluate(point);
  point[axis] = saved;
  return (fp - fm) / (2.0 * h);
}

}  // namespace distcurrents::dsl
