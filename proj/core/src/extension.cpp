#include "distcurrents/extension.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "distcurrents/parallel.hpp"

namespace distcurrents {

// ==== cutoff profile ====

double cutoff_eta(double t) {
  if (t <= 0.25) return 1.0;
  if (t >= 0.75) return 0.0;
  const double s = (t - 0.25) * 2.0;
  return 1.0 - s * s * (3.0 - 2.0 * s);
}

double cutoff_eta_prime(double t) {
  if (t <= 0.25 || t >= 0.75) return 0.0;
  const double s = (t - 0.25) * 2.0;
  return -12.0 * s * (1.0 - s);
}

BoxGrid cylinder_grid(const BoxGrid& base, int layers) {
  if (base.dim() + 1 > kMaxGridDim) {
    throw std::invalid_argument("cylinder grid would exceed the dimension limit");
  }
  std::array<double, kMaxGridDim> lo, hi;
  std::array<int, kMaxGridDim> res;
  for (int a = 0; a < base.dim(); ++a) {
    lo[a] = base.lower(a);
    hi[a] = base.upper(a);
    res[a] = base.res(a);
  }
  lo[base.dim()] = 0.0;
  hi[base.dim()] = 1.0;
  res[base.dim()] = layers;
  const int d = base.dim() + 1;
  return BoxGrid({lo.data(), static_cast<std::size_t>(d)},
                 {hi.data(), static_cast<std::size_t>(d)},
                 {res.data(), static_cast<std::size_t>(d)});
}

namespace {

// Even reflection of a cell index across both box faces, period 2r.
int reflect_index(int j, int r) {
  int m = j % (2 * r);
  if (m < 0) m += 2 * r;
  return m < r ? m : 2 * r - 1 - m;
}

// In-box node whose cell contains x (clamped outside the box).
long containing_node(const BoxGrid& g, std::span<const double> x) {
  std::array<int, kMaxGridDim> idx;
  for (int a = 0; a < g.dim(); ++a) {
    const int i = static_cast<int>(std::floor((x[a] - g.lower(a)) / g.spacing(a)));
    idx[a] = std::clamp(i, 0, g.res(a) - 1);
  }
  return g.flatten(std::span<const int>(idx.data(), g.dim()));
}

}  // namespace

// ==== BallAverager ====

BallAverager::BallAverager(const SampledMap& u, double max_radius)
    : u_(&u), max_radius_(max_radius) {
  if (!(max_radius > 0.0) || !std::isfinite(max_radius)) {
    throw std::invalid_argument("ball radius bound must be positive and finite");
  }
  const BoxGrid& g = u.grid();
  const int n = g.dim();
  for (int a = 0; a < n; ++a) {
    pad_[a] = static_cast<int>(std::ceil(max_radius / g.spacing(a))) + 2;
    width_[a] = g.res(a) + 2 * pad_[a];
  }
  rows_ = 1;
  for (int a = 0; a + 1 < n; ++a) rows_ *= width_[a];
  cols_ = width_[n - 1];
  channels_ = u.components() + 1;
  prefix_.assign(static_cast<std::size_t>(rows_) * (cols_ + 1) * channels_, 0.0);

  std::array<int, kMaxGridDim> cell;
  for (long row = 0; row < rows_; ++row) {
    // Decode the padded row index into reflected leading cell indices.
    long rem = row;
    for (int a = n - 2; a >= 0; --a) {
      cell[a] = reflect_index(static_cast<int>(rem % width_[a]) - pad_[a], g.res(a));
      rem /= width_[a];
    }
    double* p = prefix_.data() + static_cast<std::size_t>(row) * (cols_ + 1) * channels_;
    for (int c = 0; c < channels_; ++c) p[c] = 0.0;
    for (int col = 0; col < cols_; ++col) {
      cell[n - 1] = reflect_index(col - pad_[n - 1], g.res(n - 1));
      const long node = g.flatten(std::span<const int>(cell.data(), n));
      const double* prev = p + static_cast<std::size_t>(col) * channels_;
      double* next = p + static_cast<std::size_t>(col + 1) * channels_;
      if (u.masked(node)) {
        for (int c = 0; c < channels_; ++c) next[c] = prev[c];
      } else {
        for (int c = 0; c < channels_ - 1; ++c) next[c] = prev[c] + u.value(node, c);
        next[channels_ - 1] = prev[channels_ - 1] + 1.0;
      }
    }
  }
}

void BallAverager::accumulate(std::span<const double> x, double t, double* acc,
                              double& count) const {
  const BoxGrid& g = u_->grid();
  const int n = g.dim();
  const int last = n - 1;
  const double t2 = t * t;

  for (int c = 0; c < channels_; ++c) acc[c] = 0.0;

  // Strict open-ball membership for a last-axis cell index, given the squared
  // distance contributed by the leading axes. This predicate is the single
  // source of truth; sqrt-based guesses below are corrected against it.
  auto inside = [&](double lead_sq, int j) {
    const double d = g.coord(last, j) - x[last];
    return lead_sq + d * d < t2;
  };

  auto row_interval = [&](double lead_sq, long row) {
    const double w2 = t2 - lead_sq;
    if (w2 <= 0.0) return;
    const double w = std::sqrt(w2);
    const double hl = g.spacing(last);
    int lo = static_cast<int>(std::floor((x[last] - w - g.lower(last)) / hl - 0.5)) + 1;
    int hi = static_cast<int>(std::ceil((x[last] + w - g.lower(last)) / hl - 0.5)) - 1;
    while (inside(lead_sq, lo - 1)) --lo;
    while (lo <= hi && !inside(lead_sq, lo)) ++lo;
    while (inside(lead_sq, hi + 1)) ++hi;
    while (hi >= lo && !inside(lead_sq, hi)) --hi;
    lo = std::max(lo, -pad_[last]);
    hi = std::min(hi, g.res(last) + pad_[last] - 1);
    if (hi < lo) return;
    const double* p = prefix_.data() + static_cast<std::size_t>(row) * (cols_ + 1) * channels_;
    const double* a = p + static_cast<std::size_t>(lo + pad_[last]) * channels_;
    const double* b = p + static_cast<std::size_t>(hi + 1 + pad_[last]) * channels_;
    for (int c = 0; c < channels_; ++c) acc[c] += b[c] - a[c];
  };

  // Candidate index range along a leading axis, widened one step and clipped
  // to the padded table.
  auto axis_range = [&](int a, int& jlo, int& jhi) {
    const double h = g.spacing(a);
    jlo = static_cast<int>(std::floor((x[a] - t - g.lower(a)) / h - 0.5)) - 1;
    jhi = static_cast<int>(std::ceil((x[a] + t - g.lower(a)) / h - 0.5)) + 1;
    jlo = std::max(jlo, -pad_[a]);
    jhi = std::min(jhi, g.res(a) + pad_[a] - 1);
  };

  if (n == 1) {
    row_interval(0.0, 0);
  } else if (n == 2) {
    int jlo, jhi;
    axis_range(0, jlo, jhi);
    for (int j = jlo; j <= jhi; ++j) {
      const double d0 = g.coord(0, j) - x[0];
      row_interval(d0 * d0, j + pad_[0]);
    }
  } else {
    int jlo0, jhi0, jlo1, jhi1;
    axis_range(0, jlo0, jhi0);
    axis_range(1, jlo1, jhi1);
    for (int j0 = jlo0; j0 <= jhi0; ++j0) {
      const double d0 = g.coord(0, j0) - x[0];
      const double sq0 = d0 * d0;
      if (sq0 >= t2) continue;
      const long row0 = static_cast<long>(j0 + pad_[0]) * width_[1];
      for (int j1 = jlo1; j1 <= jhi1; ++j1) {
        const double d1 = g.coord(1, j1) - x[1];
        row_interval(sq0 + d1 * d1, row0 + j1 + pad_[1]);
      }
    }
  }
  count = acc[channels_ - 1];
}

void BallAverager::nearest(std::span<const double> x, std::span<double> out) const {
  u_->values_at(containing_node(u_->grid(), x), out);
}

void BallAverager::mean(std::span<const double> x, double t, std::span<double> out) const {
  if (!(t > 0.0) || t > max_radius_) {
    throw std::invalid_argument("ball radius outside the prepared range");
  }
  double acc[kMaxMatrixDim + 1];
  double count = 0.0;
  accumulate(x, t, acc, count);
  if (count == 0.0) {
    nearest(x, out);
    return;
  }
  for (int c = 0; c < channels_ - 1; ++c) out[c] = acc[c] / count;
}

long BallAverager::ball_count(std::span<const double> x, double t) const {
  double acc[kMaxMatrixDim + 1];
  double count = 0.0;
  accumulate(x, t, acc, count);
  return static_cast<long>(count);
}

// ==== extension operators ====

namespace {

void check_cylinder(const BoxGrid& base, const BoxGrid& grid3) {
  if (grid3.dim() != base.dim() + 1) {
    throw std::invalid_argument("extension grid must add exactly one axis");
  }
  for (int a = 0; a < base.dim(); ++a) {
    if (grid3.lower(a) != base.lower(a) || grid3.upper(a) != base.upper(a)) {
      throw std::invalid_argument("extension grid must sit over the base box");
    }
  }
  if (grid3.lower(base.dim()) != 0.0 || grid3.upper(base.dim()) != 1.0) {
    throw std::invalid_argument("extension parameter axis must span (0,1)");
  }
}

}  // namespace

SampledMap extend_map(const SampledMap& u, const BoxGrid& grid3,
                      const ExtensionProfile& profile, int threads) {
  const BoxGrid& base = u.grid();
  check_cylinder(base, grid3);
  const int n = base.dim();

  SampledMap U(grid3, u.components());
  if (profile.kind == ExtensionKind::ProductCutoff) {
    parallel_for(grid3.node_count(), threads, [&](long b, long e) {
      std::array<int, kMaxGridDim> idx;
      std::array<double, kMaxGridDim> x;
      std::array<double, kMaxMatrixDim> v;
      for (long node = b; node < e; ++node) {
        grid3.unflatten(node, idx);
        for (int a = 0; a < n; ++a) x[a] = grid3.coord(a, idx[a]);
        u.values_at(containing_node(base, std::span<const double>(x.data(), n)),
                    std::span<double>(v.data(), u.components()));
        for (int c = 0; c < u.components(); ++c) U.value(node, c) = v[c];
      }
    });
    U.recompute_mask();
    U.provenance = "product extension";
    return U;
  }

  const BallAverager avg(u, 1.0);
  parallel_for(grid3.node_count(), threads, [&](long b, long e) {
    std::array<int, kMaxGridDim> idx;
    std::array<double, kMaxGridDim> x;
    std::array<double, kMaxMatrixDim> v;
    for (long node = b; node < e; ++node) {
      grid3.unflatten(node, idx);
      for (int a = 0; a < n; ++a) x[a] = grid3.coord(a, idx[a]);
      const double t = grid3.coord(n, idx[n]);
      avg.mean(std::span<const double>(x.data(), n), t,
               std::span<double>(v.data(), u.components()));
      for (int c = 0; c < u.components(); ++c) U.value(node, c) = v[c];
    }
  });
  U.recompute_mask();
  U.provenance = "averaging extension";
  return U;
}

SampledMap mollify(const SampledMap& u, double radius, int threads) {
  const BoxGrid& g = u.grid();
  const BallAverager avg(u, radius);
  SampledMap out(g, u.components());
  parallel_for(g.node_count(), threads, [&](long b, long e) {
    std::array<int, kMaxGridDim> idx;
    std::array<double, kMaxGridDim> x;
    std::array<double, kMaxMatrixDim> v;
    for (long node = b; node < e; ++node) {
      g.unflatten(node, idx);
      g.node_coord(std::span<const int>(idx.data(), g.dim()),
                   std::span<double>(x.data(), g.dim()));
      avg.mean(std::span<const double>(x.data(), g.dim()), radius,
               std::span<double>(v.data(), u.components()));
      for (int c = 0; c < u.components(); ++c) out.value(node, c) = v[c];
    }
  });
  out.recompute_mask();
  out.provenance = "mollified";
  return out;
}

TestFunction extend_test(const TestFunction& psi, const BoxGrid& grid3, int threads) {
  const BoxGrid& base = psi.grid();
  check_cylinder(base, grid3);
  for (int a = 0; a < base.dim(); ++a) {
    if (grid3.res(a) != base.res(a)) {
      throw std::invalid_argument("extended test function reuses base samples; "
                                  "lateral resolutions must match");
    }
  }
  const int n = base.dim();
  const int layers = grid3.res(n);
  const long nodes = grid3.node_count();
  std::vector<double> values(nodes), gradient(nodes * grid3.dim());
  parallel_for(nodes, threads, [&](long b, long e) {
    for (long node = b; node < e; ++node) {
      // Last axis varies fastest, so the base node is the layer quotient.
      const long base_node = node / layers;
      const int k = static_cast<int>(node % layers);
      const double t = grid3.coord(n, k);
      const double eta = cutoff_eta(t);
      values[node] = psi.value(base_node) * eta;
      for (int a = 0; a < n; ++a) {
        gradient[node * grid3.dim() + a] = psi.gradient(base_node, a) * eta;
      }
      gradient[node * grid3.dim() + n] = psi.value(base_node) * cutoff_eta_prime(t);
    }
  });
  return TestFunction(grid3, std::move(values), std::move(gradient), 0.0);
}

}  // namespace distcurrents
