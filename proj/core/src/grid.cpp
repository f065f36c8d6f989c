#include "distcurrents/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "distcurrents/parallel.hpp"
#include "distcurrents/reduce.hpp"

namespace distcurrents {

BoxGrid::BoxGrid(std::span<const double> lower, std::span<const double> upper,
                 std::span<const int> res) {
  if (lower.size() != upper.size() || lower.size() != res.size()) {
    throw std::invalid_argument("grid lower/upper/res must share one dimension");
  }
  if (lower.empty() || lower.size() > kMaxGridDim) {
    throw std::invalid_argument("grid dimension must lie in [1, " +
                                std::to_string(kMaxGridDim) + "]");
  }
  dim_ = static_cast<int>(lower.size());
  for (int a = 0; a < dim_; ++a) {
    if (!(lower[a] < upper[a]) || !std::isfinite(lower[a]) || !std::isfinite(upper[a])) {
      throw std::invalid_argument("grid box must have finite lower < upper per axis");
    }
    if (res[a] < 2) {
      throw std::invalid_argument("grid resolution must be at least 2 cells per axis");
    }
    lower_[a] = lower[a];
    upper_[a] = upper[a];
    res_[a] = res[a];
  }
}

long BoxGrid::node_count() const noexcept {
  long n = 1;
  for (int a = 0; a < dim_; ++a) n *= res_[a];
  return n;
}

double BoxGrid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= spacing(a);
  return v;
}

double BoxGrid::min_spacing() const {
  double h = spacing(0);
  for (int a = 1; a < dim_; ++a) h = std::min(h, spacing(a));
  return h;
}

long BoxGrid::flatten(std::span<const int> idx) const {
  long node = 0;
  for (int a = 0; a < dim_; ++a) node = node * res_[a] + idx[a];
  return node;
}

void BoxGrid::unflatten(long node, std::span<int> idx) const {
  for (int a = dim_ - 1; a >= 0; --a) {
    idx[a] = static_cast<int>(node % res_[a]);
    node /= res_[a];
  }
}

void BoxGrid::node_coord(std::span<const int> idx, std::span<double> out) const {
  for (int a = 0; a < dim_; ++a) out[a] = coord(a, idx[a]);
}

double BoxGrid::boundary_distance(std::span<const double> x) const {
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < dim_; ++a) {
    d = std::min(d, std::min(x[a] - lower_[a], upper_[a] - x[a]));
  }
  return d;
}

bool BoxGrid::same_geometry(const BoxGrid& other) const {
  if (dim_ != other.dim_) return false;
  for (int a = 0; a < dim_; ++a) {
    if (lower_[a] != other.lower_[a] || upper_[a] != other.upper_[a] ||
        res_[a] != other.res_[a]) {
      return false;
    }
  }
  return true;
}

SampledMap::SampledMap(BoxGrid grid, int components)
    : grid_(grid), components_(components) {
  if (components < 1 || components > kMaxMatrixDim) {
    throw std::invalid_argument("sampled map needs between 1 and " +
                                std::to_string(kMaxMatrixDim) + " components");
  }
  values_.assign(static_cast<std::size_t>(grid_.node_count()) * components_, 0.0);
}

void SampledMap::values_at(long node, std::span<double> out) const {
  for (int c = 0; c < components_; ++c) out[c] = value(node, c);
}

void SampledMap::set_mask(long node) {
  if (mask_.empty()) mask_.assign(grid_.node_count(), 0);
  mask_[node] = 1;
}

long SampledMap::masked_count() const {
  long n = 0;
  for (unsigned char m : mask_) n += m;
  return n;
}

void SampledMap::recompute_mask() {
  mask_.clear();
  const long nodes = grid_.node_count();
  for (long i = 0; i < nodes; ++i) {
    for (int c = 0; c < components_; ++c) {
      if (!std::isfinite(value(i, c))) {
        set_mask(i);
        break;
      }
    }
  }
}

SampledMap sample_map(const dsl::VectorExpression& f, const BoxGrid& grid, int threads) {
  if (f.arity() != grid.dim()) {
    throw std::invalid_argument("map arity " + std::to_string(f.arity()) +
                                " does not match grid dimension " +
                                std::to_string(grid.dim()));
  }
  SampledMap out(grid, f.components());
  parallel_for(grid.node_count(), threads, [&](long b, long e) {
    std::array<int, kMaxGridDim> idx;
    std::array<double, kMaxGridDim> x;
    std::array<double, kMaxMatrixDim> v;
    for (long node = b; node < e; ++node) {
      grid.unflatten(node, idx);
      grid.node_coord(std::span<const int>(idx.data(), grid.dim()),
                      std::span<double>(x.data(), grid.dim()));
      f.evaluate(std::span<const double>(x.data(), grid.dim()),
                 std::span<double>(v.data(), f.components()));
      for (int c = 0; c < f.components(); ++c) out.value(node, c) = v[c];
    }
  });
  out.recompute_mask();
  out.provenance = "sampled expression";
  return out;
}

SampledMap map_difference(const SampledMap& a, const SampledMap& b) {
  if (!a.grid().same_geometry(b.grid())) {
    throw std::invalid_argument("map difference requires a shared grid");
  }
  if (a.components() != b.components()) {
    throw std::invalid_argument("map difference requires matching component counts");
  }
  SampledMap out(a.grid(), a.components());
  const long total = a.grid().node_count() * a.components();
  std::span<const double> pa = a.raw();
  std::span<const double> pb = b.raw();
  std::span<double> po = out.raw();
  for (long i = 0; i < total; ++i) po[i] = pa[i] - pb[i];
  out.recompute_mask();
  out.provenance = "difference";
  return out;
}

namespace {

// Offsets touched by fd_axis at position i.
void fd_support(int i, int r, int out[3]) {
  if (i > 0 && i + 1 < r) {
    out[0] = i - 1;
    out[1] = i;  // unused by the stencil but harmless for masking
    out[2] = i + 1;
  } else if (i == 0) {
    out[0] = 0;
    out[1] = 1;
    out[2] = 2;
  } else {
    out[0] = r - 1;
    out[1] = r - 2;
    out[2] = r - 3;
  }
}

}  // namespace

TestFunction::TestFunction(BoxGrid grid, std::vector<double> values,
                           std::vector<double> gradient, double support_margin)
    : grid_(grid), values_(std::move(values)), gradient_(std::move(gradient)),
      margin_(support_margin) {
  const long nodes = grid_.node_count();
  if (static_cast<long>(values_.size()) != nodes ||
      static_cast<long>(gradient_.size()) != nodes * grid_.dim()) {
    throw std::invalid_argument("test function data does not match its grid");
  }
  if (!(margin_ >= 0.0)) throw std::invalid_argument("support margin must be nonnegative");
  std::array<int, kMaxGridDim> idx;
  std::array<double, kMaxGridDim> x;
  for (long node = 0; node < nodes; ++node) {
    if (!std::isfinite(values_[node])) {
      throw std::invalid_argument("test function values must be finite");
    }
    if (values_[node] == 0.0) continue;
    grid_.unflatten(node, idx);
    grid_.node_coord(std::span<const int>(idx.data(), grid_.dim()),
                     std::span<double>(x.data(), grid_.dim()));
    if (grid_.boundary_distance(std::span<const double>(x.data(), grid_.dim())) < margin_) {
      throw std::invalid_argument(
          "test function is nonzero inside its support margin near the boundary");
    }
  }
}

double TestFunction::max_gradient_norm() const {
  double best = 0.0;
  const int d = grid_.dim();
  for (long node = 0; node < grid_.node_count(); ++node) {
    double sq = 0.0;
    for (int a = 0; a < d; ++a) {
      const double g = gradient_[node * d + a];
      sq += g * g;
    }
    best = std::max(best, sq);
  }
  return std::sqrt(best);
}

TestFunction sample_test_function(const dsl::Expression& psi, const BoxGrid& grid,
                                  double support_margin, int threads) {
  if (psi.arity() != grid.dim()) {
    throw std::invalid_argument("test function arity does not match grid dimension");
  }
  for (int a = 0; a < grid.dim(); ++a) {
    if (grid.res(a) < 3) {
      throw std::invalid_argument("differentiation needs at least 3 cells per axis");
    }
  }
  const long nodes = grid.node_count();
  std::vector<double> values(nodes);
  parallel_for(nodes, threads, [&](long b, long e) {
    std::array<int, kMaxGridDim> idx;
    std::array<double, kMaxGridDim> x;
    for (long node = b; node < e; ++node) {
      grid.unflatten(node, idx);
      grid.node_coord(std::span<const int>(idx.data(), grid.dim()),
                      std::span<double>(x.data(), grid.dim()));
      values[node] = psi.evaluate(std::span<const double>(x.data(), grid.dim()));
    }
  });
  std::vector<double> gradient(nodes * grid.dim());
  parallel_for(nodes, threads, [&](long b, long e) {
    std::array<int, kMaxGridDim> idx;
    for (long node = b; node < e; ++node) {
      grid.unflatten(node, idx);
      for (int a = 0; a < grid.dim(); ++a) {
        auto pick = [&](int j) {
          std::array<int, kMaxGridDim> probe = idx;
          probe[a] = j;
          return values[grid.flatten(std::span<const int>(probe.data(), grid.dim()))];
        };
        gradient[node * grid.dim() + a] = fd_axis(pick, idx[a], grid.res(a), grid.spacing(a));
      }
    }
  });
  return TestFunction(grid, std::move(values), std::move(gradient), support_margin);
}

JacobianField::JacobianField(BoxGrid grid, int rows) : grid_(grid), rows_(rows) {
  entries_.assign(static_cast<std::size_t>(grid_.node_count()) * rows_ * grid_.dim(), 0.0);
}

Matrix JacobianField::matrix(long node) const {
  Matrix m(rows_, grid_.dim());
  const double* src = entries_.data() + node * rows_ * grid_.dim();
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < grid_.dim(); ++c) m(r, c) = src[r * grid_.dim() + c];
  return m;
}

void JacobianField::set(long node, const Matrix& m) {
  double* dst = entries_.data() + node * rows_ * grid_.dim();
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < grid_.dim(); ++c) dst[r * grid_.dim() + c] = m(r, c);
}

void JacobianField::set_mask(long node) {
  if (mask_.empty()) mask_.assign(grid_.node_count(), 0);
  mask_[node] = 1;
}

long JacobianField::masked_count() const {
  long n = 0;
  for (unsigned char m : mask_) n += m;
  return n;
}

bool jacobian_at(const SampledMap& u, std::span<const int> idx, Matrix& out) {
  const BoxGrid& grid = u.grid();
  const int d = grid.dim();
  const int N = u.components();
  std::array<int, kMaxGridDim> probe;
  for (int a = 0; a < d; ++a) probe[a] = idx[a];

  if (u.has_mask()) {
    int support[3];
    for (int a = 0; a < d; ++a) {
      fd_support(idx[a], grid.res(a), support);
      for (int s = 0; s < 3; ++s) {
        probe[a] = support[s];
        if (u.masked(grid.flatten(std::span<const int>(probe.data(), d)))) return false;
      }
      probe[a] = idx[a];
    }
  }

  for (int a = 0; a < d; ++a) {
    for (int c = 0; c < N; ++c) {
      auto pick = [&](int j) {
        probe[a] = j;
        return u.value(grid.flatten(std::span<const int>(probe.data(), d)), c);
      };
      out(c, a) = fd_axis(pick, idx[a], grid.res(a), grid.spacing(a));
      probe[a] = idx[a];
    }
  }
  return true;
}

JacobianField jacobian(const SampledMap& u, int threads) {
  const BoxGrid& grid = u.grid();
  for (int a = 0; a < grid.dim(); ++a) {
    if (grid.res(a) < 3) {
      throw std::invalid_argument("differentiation needs at least 3 cells per axis");
    }
  }
  JacobianField J(grid, u.components());
  std::vector<unsigned char> masked(u.has_mask() ? grid.node_count() : 0, 0);
  parallel_for(grid.node_count(), threads, [&](long b, long e) {
    std::array<int, kMaxGridDim> idx;
    Matrix m(u.components(), grid.dim());
    for (long node = b; node < e; ++node) {
      grid.unflatten(node, idx);
      if (jacobian_at(u, std::span<const int>(idx.data(), grid.dim()), m)) {
        J.set(node, m);
      } else {
        masked[node] = 1;
      }
    }
  });
  for (long node = 0; node < static_cast<long>(masked.size()); ++node) {
    if (masked[node]) J.set_mask(node);
  }
  return J;
}

IntegrateResult integrate(std::span<const double> node_values, const BoxGrid& grid) {
  if (static_cast<long>(node_values.size()) != grid.node_count()) {
    throw std::invalid_argument("integrand size does not match grid");
  }
  IntegrateResult out;
  out.value = pairwise_sum_masked(node_values, out.masked) * grid.cell_volume();
  return out;
}

}  // namespace distcurrents
