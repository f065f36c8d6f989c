#pragma once

#include <utility>
#include <vector>

#include "distcurrents/errors.hpp"
#include "distcurrents/extension.hpp"
#include "distcurrents/grid.hpp"
#include "distcurrents/multiindex.hpp"

namespace distcurrents {

struct DivMinorOptions {
  ExtensionProfile profile{};
  /// Cells along the extension axis; 0 picks the largest lateral resolution.
  int layers = 0;
  int threads = 0;
};

/// One distributional pairing, with enough metadata to audit it: the cylinder
/// actually integrated, the extension kind, how many integrand nodes were
/// skipped as non-finite, and the per-direction term breakdown. `value` is
/// defined as the plain sum of `terms`, so the breakdown reproduces it.
struct DistributionalEvaluation {
  double value = 0.0;
  long masked = 0;
  ExtensionKind extension = ExtensionKind::Averaging;
  BoxGrid quadrature;
  std::vector<std::pair<int, double>> terms;  // axis label -> contribution
};

/// Pairing of the order-k distributional minor with a test function:
/// the boundary-free cylinder integral
///   -sum_{i in a+(n+1)} sigma(a+(n+1)-i, i)
///        int_{cyl} M^b_{a+(n+1)-i}(DU) dPsi_i,
/// where U extends u to the cylinder and Psi = psi * eta. Evaluation streams
/// one t-layer at a time, so memory stays proportional to one layer. The
/// empty-index case returns int psi over the base box directly.
DistributionalEvaluation div_minor(const SampledMap& u, const MultiIndex& alpha,
                                   const MultiIndex& beta, const TestFunction& psi,
                                   const DivMinorOptions& opts = {});

/// Classical side of the smooth-map identity: int_Omega M_a^b(Du) psi dx by
/// midpoint quadrature. Requires an unmasked map on psi's grid.
double pointwise_minor_integral(const SampledMap& u, const MultiIndex& alpha,
                                const MultiIndex& beta, const TestFunction& psi,
                                int threads = 0);

/// L1 norm of sum_{i in a} d_i adj_i^row(DU): the discrete cofactor-row
/// divergence, which vanishes identically in the continuum. Requires an
/// unmasked map; row_label must belong to beta.
double cofactor_divergence_residual(const SampledMap& U, const MultiIndex& alpha,
                                    const MultiIndex& beta, int row_label,
                                    int threads = 0);

}  // namespace distcurrents
