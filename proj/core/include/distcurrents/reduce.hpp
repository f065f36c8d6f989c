#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace distcurrents {

/// Pairwise (tree) summation with a fixed recursion schedule. The result
/// depends only on the contents and order of `v`, never on thread counts,
/// so reductions built on it are bit-reproducible.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// Pairwise sum that skips non-finite entries and counts them. Used by the
/// midpoint quadrature, where masked nodes are stored as NaN.
inline double pairwise_sum_masked(std::span<const double> v, long& skipped) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) {
      if (std::isfinite(x)) {
        s += x;
      } else {
        ++skipped;
      }
    }
    return s;
  }
  const std::size_t half = v.size() / 2;
  double s = pairwise_sum_masked(v.first(half), skipped);
  s += pairwise_sum_masked(v.subspan(half), skipped);
  return s;
}

}  // namespace distcurrents
