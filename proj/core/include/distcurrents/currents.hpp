#pragma once

#include <functional>
#include <span>
#include <vector>

#include "distcurrents/distminor.hpp"
#include "distcurrents/errors.hpp"
#include "distcurrents/expr.hpp"
#include "distcurrents/grid.hpp"
#include "distcurrents/multiindex.hpp"

namespace distcurrents {

/// One summand coefficient(x, y) dx^alpha ^ dy^beta of a form on the product
/// of the domain with target space. The coefficient's arguments are the n
/// domain coordinates followed by the N target coordinates.
struct FormTerm {
  MultiIndex alpha;
  MultiIndex beta;
  dsl::Expression coefficient;
};

/// A differential form with every term of one degree. Coefficients are
/// expected to be compactly supported in x; that is a contract on the inputs,
/// not something a black-box expression lets us verify.
class DifferentialForm {
 public:
  DifferentialForm(int domain_dim, int target_dim, int degree, std::vector<FormTerm> terms);

  int domain_dim() const noexcept { return n_; }
  int target_dim() const noexcept { return N_; }
  int degree() const noexcept { return degree_; }
  std::span<const FormTerm> terms() const noexcept { return terms_; }

 private:
  int n_, N_, degree_;
  std::vector<FormTerm> terms_;
};

enum class FormulaRoute { Graph, Boundary };

struct CurrentComponentValue {
  MultiIndex alpha;
  MultiIndex beta;
  double value = 0.0;
  FormulaRoute route = FormulaRoute::Boundary;
  long masked = 0;
};

/// Action of the graph current on a degree-n form: sum over terms of
/// sigma(alpha, complement) int coefficient(x, u(x)) M_complement^beta(Du).
/// Needs a fully finite map; the Jacobian is the grid difference quotient.
double graph_current_eval(const SampledMap& u, const DifferentialForm& omega, int threads = 0);

/// Single (alpha, beta) component through the graph formula; the smooth-map
/// oracle for tu_component.
CurrentComponentValue graph_component(const SampledMap& u, const MultiIndex& alpha,
                                      const MultiIndex& beta, const dsl::Expression& coefficient,
                                      int threads = 0);

/// Single (alpha, beta) component through the boundary-of-extension route:
/// -sum over i in complement(alpha)+(n+1) of sigma terms integrating
/// D_i[coefficient(x, U) eta(t)] M^beta(DU) over the cylinder. The total
/// x-derivative expands through the y slots with central finite differences
/// of the coefficient; requires |alpha| + |beta| = n.
CurrentComponentValue tu_component(const SampledMap& u, const MultiIndex& alpha,
                                   const MultiIndex& beta, const dsl::Expression& coefficient,
                                   const DivMinorOptions& opts = {});

struct PushforwardComparison {
  /// sigma(alpha, complement) times the boundary-route component of the
  /// y-independent test function lifted by a radial cutoff.
  double boundary_route = 0.0;
  /// The distributional minor evaluation of the same data.
  double minor_route = 0.0;
  /// Contribution of the cutoff's y-gradient; the cutoff plateau covers the
  /// whole range of the extension, so anything visibly nonzero is a defect.
  double cutoff_residual = 0.0;
};

/// Realizes the projection identity between the boundary route and the
/// distributional minors: both sides are returned for comparison. The lift
/// multiplies psi by a smooth radial cutoff sized to twice the largest value
/// of the map, and the cutoff's derivative term is required to stay below
/// 1e-10 relative.
PushforwardComparison pushforward_check(const SampledMap& u, const MultiIndex& alpha,
                                        const MultiIndex& beta, const TestFunction& psi,
                                        const DivMinorOptions& opts = {});

/// Max of the evaluator over a dictionary of forms, each expected
/// sup-normalized (every coefficient bounded by 1 in absolute value). A
/// certified lower bound for the mass, never the mass itself.
double mass_lower_bound(const std::function<double(const DifferentialForm&)>& evaluate,
                        std::span<const DifferentialForm> dictionary);

}  // namespace distcurrents
