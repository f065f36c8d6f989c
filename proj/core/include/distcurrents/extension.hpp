#pragma once

#include <span>
#include <vector>

#include "distcurrents/grid.hpp"

namespace distcurrents {

// ==== cutoff profile ====

/// Cubic smoothstep ramp: 1 on [0, 1/4], 0 on [3/4, inf), C^1 in between
/// with |slope| <= 3.
double cutoff_eta(double t);
double cutoff_eta_prime(double t);

enum class ExtensionKind {
  Averaging,      // U(x,t) = mean of the reflected samples over B(x,t)
  ProductCutoff,  // U(x,t) = u(x), constant in t
};

struct ExtensionProfile {
  ExtensionKind kind = ExtensionKind::Averaging;
};

/// Grid over base-box x (0,1) with `layers` cells in the new last axis.
BoxGrid cylinder_grid(const BoxGrid& base, int layers);

// ==== ball averages over the reflected samples ====

/// Precomputed even reflection of a sampled map across every box face, with
/// per-row prefix sums along the last axis. mean() resolves a ball average
/// in O(rows intersecting the ball) instead of O(ball volume).
///
/// Membership is the open-ball test sum_a (z_a - x_a)^2 < t^2 evaluated in
/// double precision on midpoint coordinates z; interval endpoints found via
/// a sqrt guess are verified against that exact predicate, so results match
/// a direct scan bit-for-bit in membership.
class BallAverager {
 public:
  /// max_radius bounds every later query; it sizes the reflection padding.
  BallAverager(const SampledMap& u, double max_radius);

  /// Mean of reflected samples at midpoints strictly inside B(x, t), skipping
  /// masked samples. Falls back to the nearest in-box node value when the
  /// ball captures no valid sample. Requires 0 < t <= max_radius.
  void mean(std::span<const double> x, double t, std::span<double> out) const;

  /// Number of valid reflected samples inside B(x, t).
  long ball_count(std::span<const double> x, double t) const;

  const SampledMap& source() const noexcept { return *u_; }
  double max_radius() const noexcept { return max_radius_; }

 private:
  void accumulate(std::span<const double> x, double t, double* acc, double& count) const;
  void nearest(std::span<const double> x, std::span<double> out) const;

  const SampledMap* u_;
  double max_radius_;
  int pad_[kMaxGridDim];        // reflection depth per axis, in cells
  int width_[kMaxGridDim];      // padded cells per axis
  long rows_ = 1;               // product of padded widths over axes 0..n-2
  int cols_ = 0;                // padded width of the last axis
  int channels_ = 0;            // components + 1 validity channel
  std::vector<double> prefix_;  // [row][col 0..cols][channel], col-exclusive sums
};

// ==== extension operators ====

/// Extends u from the base box to the cylinder grid. The last grid3 axis is
/// the extension parameter t in (0,1); the leading axes must reproduce the
/// base box (any resolution). Averaging takes the reflected ball mean at
/// radius t; ProductCutoff stacks u itself, constant in t.
SampledMap extend_map(const SampledMap& u, const BoxGrid& grid3,
                      const ExtensionProfile& profile = {}, int threads = 0);

/// Ball-average smoothing of u on its own grid at a fixed radius.
SampledMap mollify(const SampledMap& u, double radius, int threads = 0);

/// Extends a test function to the cylinder as psi(x) * eta(t), with gradient
/// (eta grad psi, psi eta'). Values vanish for t >= 3/4, so the result is
/// compactly supported in the half-open cylinder; it does not vanish at t=0
/// and therefore carries support margin 0.
TestFunction extend_test(const TestFunction& psi, const BoxGrid& grid3, int threads = 0);

}  // namespace distcurrents
