#include "distcurrents/sobolev.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "distcurrents/parallel.hpp"
#include "distcurrents/reduce.hpp"

namespace distcurrents {

namespace {

void validate(SobolevParams prm) {
  if (!(prm.s > 0.0) || !(prm.s < 1.0)) {
    throw std::invalid_argument("smoothness must lie strictly inside (0, 1), got " +
                                std::to_string(prm.s));
  }
  if (!(prm.p >= 1.0) || !std::isfinite(prm.p)) {
    throw std::invalid_argument("integrability must be at least 1, got " +
                                std::to_string(prm.p));
  }
}

double ipow(double x, long k) {
  double r = 1.0;
  while (k > 0) {
    if (k & 1) r *= x;
    x *= x;
    k >>= 1;
  }
  return r;
}

// Raises a squared quantity q to the power e/2 (that is, |.|^e on the
// unsquared value). Integer e avoids pow entirely, which carries the inner
// pair loop for every canonical parameter choice.
struct HalfPower {
  long whole = 0;
  bool half = false;
  bool exact = true;
  double exponent = 0.0;

  explicit HalfPower(double e) {
    exponent = 0.5 * e;
    const double r = std::round(e);
    if (std::abs(e - r) < 1e-12) {
      const long ir = static_cast<long>(r);
      whole = ir / 2;
      half = (ir % 2) != 0;
    } else {
      exact = false;
    }
  }

  double operator()(double q) const {
    if (!exact) return std::pow(q, exponent);
    double v = ipow(q, whole);
    if (half) v *= std::sqrt(q);
    return v;
  }
};

// Per-axis stride that brings the selected lattice under the budget. The
// offset centers the retained nodes inside the skipped runs.
int pick_stride(const BoxGrid& g, long budget) {
  if (budget < 1) budget = 1;
  for (int m = 1;; ++m) {
    long count = 1;
    for (int a = 0; a < g.dim(); ++a) {
      const int offset = (m - 1) / 2;
      const long along = offset < g.res(a) ? (g.res(a) - 1 - offset) / m + 1 : 0;
      count *= along;
    }
    if (count <= budget) return m;
  }
}

// Unmasked nodes of the stride lattice, coordinates and values packed flat.
struct PairData {
  std::vector<double> coord;
  std::vector<double> val;
  long count = 0;
  double weight = 0.0;
};

PairData gather(const SampledMap& u, int stride) {
  const BoxGrid& g = u.grid();
  const int n = g.dim();
  const int nc = u.components();
  const int offset = (stride - 1) / 2;

  PairData out;
  out.weight = g.cell_volume() * ipow(static_cast<double>(stride), n);
  std::array<int, kMaxGridDim> idx;
  std::array<double, kMaxGridDim> x;
  for (int a = 0; a < n; ++a) idx[a] = offset;
  while (true) {
    if (idx[0] >= g.res(0)) break;
    const long node = g.flatten(std::span<const int>(idx.data(), n));
    if (!u.masked(node)) {
      g.node_coord(std::span<const int>(idx.data(), n), std::span<double>(x.data(), n));
      for (int a = 0; a < n; ++a) out.coord.push_back(x[a]);
      for (int c = 0; c < nc; ++c) out.val.push_back(u.value(node, c));
      ++out.count;
    }
    int a = n - 1;
    idx[a] += stride;
    while (a > 0 && idx[a] >= g.res(a)) {
      idx[a] = offset;
      --a;
      idx[a] += stride;
    }
  }
  return out;
}

}  // namespace

SobolevParams canonical_params(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) {
    throw std::invalid_argument("canonical parameters need p > 1, got " + std::to_string(p));
  }
  return SobolevParams{1.0 - 1.0 / p, p};
}

SeminormValue gagliardo_seminorm(const SampledMap& u, SobolevParams prm,
                                 const PairSumOptions& opts) {
  validate(prm);
  const BoxGrid& g = u.grid();
  const int n = g.dim();
  const int nc = u.components();

  const int stride = pick_stride(g, opts.node_budget);
  PairData pd = gather(u, stride);

  SeminormValue result;
  result.nodes_used = pd.count;
  result.subsampled = stride > 1;
  if (pd.count < 2) return result;

  const HalfPower value_pow(prm.p);
  const HalfPower dist_pow(n + prm.s * prm.p);

  // Ordered double sum = twice the sum over i < j; the integrand is exactly
  // symmetric, so only the upper triangle is walked.
  std::vector<double> rows(pd.count, 0.0);
  const double* coord = pd.coord.data();
  const double* val = pd.val.data();
  const long count = pd.count;
  parallel_for(count, opts.threads, [&](long b, long e) {
    for (long i = b; i < e; ++i) {
      const double* xi = coord + i * n;
      const double* vi = val + i * nc;
      double acc = 0.0;
      for (long j = i + 1; j < count; ++j) {
        const double* xj = coord + j * n;
        const double* vj = val + j * nc;
        double r = 0.0;
        for (int a = 0; a < n; ++a) {
          const double d = xi[a] - xj[a];
          r += d * d;
        }
        double q = 0.0;
        for (int c = 0; c < nc; ++c) {
          const double d = vi[c] - vj[c];
          q += d * d;
        }
        acc += value_pow(q) / dist_pow(r);
      }
      rows[i] = acc;
    }
  });

  const double total = 2.0 * pd.weight * pd.weight * pairwise_sum(rows);
  result.value = prm.p == 2.0 ? std::sqrt(total) : std::pow(total, 1.0 / prm.p);
  return result;
}

double lp_norm(const SampledMap& u, double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) {
    throw std::invalid_argument("integrability must be at least 1, got " + std::to_string(p));
  }
  const BoxGrid& g = u.grid();
  const int nc = u.components();
  const HalfPower value_pow(p);

  std::vector<double> buf(g.node_count());
  for (long node = 0; node < g.node_count(); ++node) {
    if (u.masked(node)) {
      buf[node] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double q = 0.0;
    for (int c = 0; c < nc; ++c) {
      const double v = u.value(node, c);
      q += v * v;
    }
    buf[node] = value_pow(q);
  }
  const double total = integrate(buf, g).value;
  return p == 2.0 ? std::sqrt(total) : std::pow(total, 1.0 / p);
}

double wsp_norm(const SampledMap& u, SobolevParams prm, const PairSumOptions& opts) {
  validate(prm);
  return lp_norm(u, prm.p) + gagliardo_seminorm(u, prm, opts).value;
}

double continuity_ratio(const SampledMap& u, const SampledMap& v, const MultiIndex& alpha,
                        const MultiIndex& beta, const TestFunction& psi, double p,
                        const ContinuityOptions& opts) {
  if (!u.grid().same_geometry(v.grid()) || u.components() != v.components()) {
    throw std::invalid_argument("continuity ratio needs both maps on one grid");
  }
  const int k = alpha.size();
  if (k > p) {
    throw std::invalid_argument("minor order " + std::to_string(k) +
                                " exceeds integrability " + std::to_string(p));
  }

  std::span<const double> ru = u.raw();
  std::span<const double> rv = v.raw();
  if (std::memcmp(ru.data(), rv.data(), ru.size() * sizeof(double)) == 0) return 0.0;

  const double du = div_minor(u, alpha, beta, psi, opts.minor).value;
  const double dv = div_minor(v, alpha, beta, psi, opts.minor).value;
  const double num = std::abs(du - dv);
  if (num == 0.0) return 0.0;

  const SobolevParams prm = canonical_params(p);
  const double gap = wsp_norm(map_difference(u, v), prm, opts.pairs);
  const double nu = wsp_norm(u, prm, opts.pairs);
  const double nv = wsp_norm(v, prm, opts.pairs);
  const double den = gap * (ipow(nu, k - 1) + ipow(nv, k - 1)) *
                     psi.max_gradient_norm();
  return num / den;
}

}  // namespace distcurrents
