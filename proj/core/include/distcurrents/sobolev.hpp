#pragma once

#include "distcurrents/distminor.hpp"
#include "distcurrents/grid.hpp"
#include "distcurrents/multiindex.hpp"

namespace distcurrents {

/// Smoothness/integrability pair for the fractional scale W^{s,p}.
struct SobolevParams {
  double s = 0.5;
  double p = 2.0;
};

/// The pair (1 - 1/p, p) that the continuity estimate lives on. Requires
/// p > 1 so the smoothness lands strictly inside (0, 1).
SobolevParams canonical_params(double p);

/// Controls for the O(M^2) pair sum. Above the node budget the sum switches
/// to a uniform per-axis stride lattice and reports that it did.
struct PairSumOptions {
  long node_budget = 1 << 14;
  int threads = 0;
};

struct SeminormValue {
  double value = 0.0;
  /// Unmasked nodes that entered the pair sum.
  long nodes_used = 0;
  /// True when the budget forced stride subsampling; accuracy is degraded.
  bool subsampled = false;
};

/// Gagliardo seminorm by a double midpoint sum over distinct node pairs,
/// p-th root applied. Midpoint nodes keep every pair at distance >= h, so
/// the diagonal singularity never evaluates. Cost is quadratic in the
/// number of participating nodes.
SeminormValue gagliardo_seminorm(const SampledMap& u, SobolevParams params,
                                 const PairSumOptions& opts = {});

/// Midpoint-rule L^p norm of |u| (Euclidean across components).
double lp_norm(const SampledMap& u, double p);

/// L^p norm plus Gagliardo seminorm.
double wsp_norm(const SampledMap& u, SobolevParams params, const PairSumOptions& opts = {});

struct ContinuityOptions {
  PairSumOptions pairs{};
  DivMinorOptions minor{};
};

/// Empirical constant in the continuity estimate: the distributional minor
/// gap |<Div(Du) - Div(Dv), psi>| divided by
/// ||u - v|| * (||u||^{k-1} + ||v||^{k-1}) * max|grad psi|, all norms taken
/// in W^{1-1/p,p}. Identical inputs give 0 by definition. Requires k <= p.
double continuity_ratio(const SampledMap& u, const SampledMap& v, const MultiIndex& alpha,
                        const MultiIndex& beta, const TestFunction& psi, double p,
                        const ContinuityOptions& opts = {});

}  // namespace distcurrents
