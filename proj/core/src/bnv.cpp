#include "distcurrents/bnv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "distcurrents/errors.hpp"
#include "distcurrents/exterior.hpp"
#include "distcurrents/parallel.hpp"
#include "distcurrents/reduce.hpp"

namespace distcurrents {

namespace {

// ==== deterministic tie breaking ====

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d4a049bb133111ULL;
  return z ^ (z >> 31);
}

// Hash of (node, component, salt) mapped to [-1/2, 1/2).
double hash_unit(std::uint64_t key) {
  return static_cast<double>(splitmix64(key) >> 11) * (1.0 / 9007199254740992.0) - 0.5;
}

MultiIndex full_rows(int N) {
  std::vector<int> labels(N);
  for (int c = 0; c < N; ++c) labels[c] = c + 1;
  return MultiIndex(labels, N);
}

// Barycentric crossing classification for one candidate simplex face.
enum class Crossing { None, Hit, Degenerate };

// Solves sum lambda = 1, sum lambda * w(node) = y for the m = N+1 slots in
// `nodes`; classifies by the smallest barycentric weight. Weights inside a
// narrow band around zero are ambiguous and reported as degenerate. The band
// sits far below the lambda shift a perturbation retry produces, so a retry
// can actually escape it, and far above the fp noise of the solve.
constexpr double kBaryBand = 1e-12;

// ==== Monte Carlo level sampling ====

struct LevelBox {
  std::array<double, kMaxMatrixDim> center{};
  double radius = 0.0;  // half-width of the sampling box, zero for constants
};

LevelBox cover_box(const LevelSetExtractor& ex) {
  LevelBox box;
  double q = 0.0;
  for (int c = 0; c < ex.components(); ++c) {
    double lo = 0.0, hi = 0.0;
    ex.value_range(c, lo, hi);
    box.center[c] = 0.5 * (lo + hi);
    q += 0.25 * (hi - lo) * (hi - lo);
  }
  box.radius = 1.05 * std::sqrt(q);
  return box;
}

// Stratified jittered levels over the box, generated in one fixed pass so
// the draw order never depends on thread count.
std::vector<double> stratified_levels(const LevelBox& box, int N, int samples,
                                      std::uint64_t seed, int& total) {
  int m = std::max(1, static_cast<int>(std::llround(std::pow(
                          static_cast<double>(samples), 1.0 / N))));
  total = 1;
  for (int c = 0; c < N; ++c) total *= m;
  std::mt19937_64 rng(seed);
  const auto unit = [&rng]() {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
  };
  std::vector<double> ys(static_cast<std::size_t>(total) * N);
  std::array<int, kMaxMatrixDim> q{};
  for (int j = 0; j < total; ++j) {
    for (int c = 0; c < N; ++c) {
      ys[static_cast<std::size_t>(j) * N + c] =
          box.center[c] - box.radius + 2.0 * box.radius * (q[c] + unit()) / m;
    }
    for (int c = N - 1; c >= 0; --c) {
      if (++q[c] < m) break;
      q[c] = 0;
    }
  }
  return ys;
}

int pick_layer_count(const BoxGrid& base, int requested) {
  int L = requested;
  if (L == 0) {
    for (int a = 0; a < base.dim(); ++a) L = std::max(L, base.res(a));
  }
  if (L < 3) throw std::invalid_argument("extension axis needs at least 3 layers");
  return L;
}

// d(omega~) paired with one extracted piece, for a degree-zero form psi on
// the base of a cylinder: the lateral slots carry eta * dpsi, the extension
// slot carries psi * eta'. Derivatives of the coefficient use central
// differences at the grid step.
double pair_piece_with_dpsi(const LevelPiece& piece, const dsl::Expression& psi,
                            const BoxGrid& base) {
  const int n = base.dim();
  std::array<double, kMaxGridDim> x;
  for (int a = 0; a < n; ++a) x[a] = 0.5 * (piece.a[a] + piece.b[a]);
  const double t = 0.5 * (piece.a[n] + piece.b[n]);
  const double eta = cutoff_eta(t);
  const double etap = cutoff_eta_prime(t);

  std::span<double> xs(x.data(), n);
  double acc = piece.zeta[n] * etap * psi.evaluate(xs);
  if (eta != 0.0) {
    for (int a = 0; a < n; ++a) {
      if (piece.zeta[a] == 0.0) continue;
      acc += piece.zeta[a] * eta * dsl::fd_partial(psi, xs, a, base.spacing(a));
    }
  }
  return acc * piece.measure;
}

void check_square_target(const SampledMap& u) {
  const int n = u.grid().dim();
  const int N = u.components();
  if (n != N || (N != 2 && N != 3)) {
    throw std::invalid_argument("level set side needs a square-dimensional map in 2 or 3 variables");
  }
}

const dsl::Expression& only_coefficient(const DomainForm& omega, int n) {
  if (omega.dim() != n || omega.degree() != 0 || omega.terms().size() != 1) {
    throw std::invalid_argument("coarea pairing takes a single-coefficient zero-degree form");
  }
  return omega.terms().front().coefficient;
}

// Shared Monte Carlo sweep: evaluates `level_value` for every stratified y,
// averages with the box volume weight, and tallies degenerate draws.
template <typename LevelValue>
CoareaCheck monte_carlo_rhs(const LevelSetExtractor& ex, const MonteCarloOptions& mc,
                            double lhs, const LevelValue& level_value) {
  const int N = ex.components();
  CoareaCheck out;
  out.lhs = lhs;

  const LevelBox box = cover_box(ex);
  if (box.radius == 0.0) {
    out.samples = mc.samples;
    out.error = std::fabs(out.lhs - out.rhs) / (std::fabs(out.lhs) + 1e-12);
    return out;
  }

  int total = 0;
  const std::vector<double> ys = stratified_levels(box, N, mc.samples, mc.seed, total);
  std::vector<double> vals(total, 0.0);
  std::vector<unsigned char> bad(total, 0);
  parallel_for(total, mc.threads, [&](long lo, long hi) {
    for (long j = lo; j < hi; ++j) {
      const std::span<const double> y(ys.data() + j * N, N);
      try {
        vals[j] = level_value(ex.extract(y));
      } catch (const DegenerateInputError&) {
        bad[j] = 1;
      }
    }
  });

  long degenerate = 0;
  for (unsigned char b : bad) degenerate += b;
  if (degenerate == total) {
    throw DegenerateInputError("every sampled level stayed degenerate");
  }
  double volume = 1.0;
  for (int c = 0; c < N; ++c) volume *= 2.0 * box.radius;
  out.rhs = volume * pairwise_sum(vals) / total;
  out.samples = total;
  out.degenerate_levels = degenerate;
  out.error = std::fabs(out.lhs - out.rhs) / (std::fabs(out.lhs) + 1e-12);
  return out;
}

}  // namespace

// ==== forms on the domain ====

DomainForm::DomainForm(int dim, int degree, std::vector<DomainFormTerm> terms)
    : n_(dim), degree_(degree), terms_(std::move(terms)) {
  if (n_ < 1 || n_ > kMaxGridDim) {
    throw std::invalid_argument("form dimension out of range");
  }
  if (degree_ < 0 || degree_ > n_) {
    throw std::invalid_argument("form degree out of range");
  }
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const DomainFormTerm& term = terms_[i];
    if (term.alpha.ambient() != n_) {
      throw std::invalid_argument("form term indices must match the form's dimension");
    }
    if (term.alpha.size() != degree_) {
      throw std::invalid_argument("every form term must have the declared degree");
    }
    if (term.coefficient.arity() != n_) {
      throw std::invalid_argument("form coefficients take the domain coordinates");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (!(terms_[j].alpha < term.alpha) && !(term.alpha < terms_[j].alpha)) {
        throw std::invalid_argument("form terms must use distinct directions");
      }
    }
  }
}

// ==== distributional Jacobian ====

JacobianCurrentEval ju_eval(const SampledMap& u, const DomainForm& omega,
                            const DivMinorOptions& opts) {
  const int n = u.grid().dim();
  const int N = u.components();
  if (N < 2 || N > n) {
    throw std::invalid_argument("distributional Jacobian needs 2 <= components <= dim");
  }
  if (omega.dim() != n || omega.degree() != n - N) {
    throw std::invalid_argument("form degree must complement the component count");
  }

  const MultiIndex rows = full_rows(N);
  JacobianCurrentEval out;
  for (const MultiIndex& alpha : enumerate_indices(n - N, n)) {
    double value = 0.0;
    for (const DomainFormTerm& term : omega.terms()) {
      if (term.alpha < alpha || alpha < term.alpha) continue;
      const TestFunction psi = sample_test_function(term.coefficient, u.grid(), 0.0, opts.threads);
      const MultiIndex abar = alpha.complement();
      const double sig = static_cast<double>(sigma(alpha, abar).value);
      value = sig * div_minor(u, abar, rows, psi, opts).value;
    }
    out.breakdown.push_back({alpha, value});
    out.value += value;
  }
  return out;
}

// ==== level set extraction ====

LevelSetExtractor::LevelSetExtractor(const SampledMap& w, double core_threshold)
    : w_(&w), threshold_(core_threshold) {
  const BoxGrid& g = w.grid();
  d_ = g.dim();
  N_ = w.components();
  if (N_ != 2 && N_ != 3) {
    throw std::invalid_argument("level extraction supports 2 or 3 components");
  }
  kstar_ = d_ - N_;
  if (kstar_ != 0 && kstar_ != 1) {
    throw std::invalid_argument("level sets must be points or segments here");
  }
  if (threshold_ < 0.0 || !(threshold_ < 1.0)) {
    throw std::invalid_argument("core threshold must lie in [0, 1)");
  }

  cube_count_ = 1;
  for (int a = 0; a < d_; ++a) {
    if (g.res(a) < 2) throw std::invalid_argument("level extraction needs 2 nodes per axis");
    cubes_[a] = g.res(a) - 1;
    cube_count_ *= cubes_[a];
  }
  // Node order is row-major with the last axis fastest.
  long stride = 1;
  for (int a = d_ - 1; a >= 0; --a) {
    node_stride_[a] = stride;
    stride *= g.res(a);
  }

  for (int c = 0; c < N_; ++c) {
    lo_[c] = std::numeric_limits<double>::infinity();
    hi_[c] = -std::numeric_limits<double>::infinity();
  }
  for (long b = 0; b < g.node_count(); ++b) {
    if (w.masked(b)) continue;
    for (int c = 0; c < N_; ++c) {
      lo_[c] = std::min(lo_[c], w.value(b, c));
      hi_[c] = std::max(hi_[c], w.value(b, c));
    }
  }
  if (lo_[0] > hi_[0]) throw DegenerateInputError("level extraction needs finite samples");
  for (int c = 0; c < N_; ++c) {
    scale_[c] = hi_[c] - lo_[c];
    if (scale_[c] == 0.0) scale_[c] = 1.0;
  }

  std::array<int, kMaxGridDim> axes{};
  for (int a = 0; a < d_; ++a) axes[a] = a;
  do {
    std::array<int, kMaxGridDim> p{};
    for (int a = 0; a < d_; ++a) p[a] = axes[a];
    perms_.push_back(p);
  } while (std::next_permutation(axes.begin(), axes.begin() + d_));

  // Value-space buckets: every valid cube lands in each bucket its corner
  // value box overlaps, so a query visits only cubes that can cross y.
  constexpr int kB = 32;
  long buckets = 1;
  for (int c = 0; c < N_; ++c) buckets *= kB;
  std::vector<long> counts(buckets + 1, 0);

  const int corners = 1 << d_;
  const auto corner_node = [&](long cube, int mask) {
    long node = 0;
    long rest = cube;
    for (int a = 0; a < d_; ++a) {
      const int qa = static_cast<int>(rest % cubes_[a]);
      rest /= cubes_[a];
      node += (qa + ((mask >> a) & 1)) * node_stride_[a];
    }
    return node;
  };
  const auto bucket_of = [&](double v, int c) {
    const double margin = 1e-6 * scale_[c];
    const double lo = lo_[c] - margin;
    const double width = (hi_[c] + margin - lo) / kB;
    int i = static_cast<int>((v - lo) / width);
    return std::clamp(i, 0, kB - 1);
  };
  const auto cube_span = [&](long cube, int* blo, int* bhi) {
    double cmin[kMaxMatrixDim], cmax[kMaxMatrixDim];
    for (int c = 0; c < N_; ++c) {
      cmin[c] = std::numeric_limits<double>::infinity();
      cmax[c] = -std::numeric_limits<double>::infinity();
    }
    for (int mk = 0; mk < corners; ++mk) {
      const long node = corner_node(cube, mk);
      if (w_->masked(node)) return false;
      for (int c = 0; c < N_; ++c) {
        const double v = w_->value(node, c);
        cmin[c] = std::min(cmin[c], v);
        cmax[c] = std::max(cmax[c], v);
      }
    }
    for (int c = 0; c < N_; ++c) {
      const double margin = 1e-6 * scale_[c];
      blo[c] = bucket_of(cmin[c] - margin, c);
      bhi[c] = bucket_of(cmax[c] + margin, c);
    }
    return true;
  };
  const auto bucket_flat = [&](const int* q) {
    long f = 0;
    for (int c = N_ - 1; c >= 0; --c) f = f * kB + q[c];
    return f;
  };

  int blo[kMaxMatrixDim], bhi[kMaxMatrixDim], q[kMaxMatrixDim];
  for (long cube = 0; cube < cube_count_; ++cube) {
    if (!cube_span(cube, blo, bhi)) continue;
    for (int c = 0; c < N_; ++c) q[c] = blo[c];
    while (true) {
      ++counts[bucket_flat(q) + 1];
      int c = 0;
      while (c < N_ && ++q[c] > bhi[c]) q[c] = blo[c], ++c;
      if (c == N_) break;
    }
  }
  for (long i = 0; i < buckets; ++i) counts[i + 1] += counts[i];
  bucket_start_ = counts;
  bucket_cubes_.resize(counts[buckets]);
  std::vector<long> cursor(bucket_start_.begin(), bucket_start_.end() - 1);
  for (long cube = 0; cube < cube_count_; ++cube) {
    if (!cube_span(cube, blo, bhi)) continue;
    for (int c = 0; c < N_; ++c) q[c] = blo[c];
    while (true) {
      bucket_cubes_[cursor[bucket_flat(q)]++] = cube;
      int c = 0;
      while (c < N_ && ++q[c] > bhi[c]) q[c] = blo[c], ++c;
      if (c == N_) break;
    }
  }
}

void LevelSetExtractor::value_range(int component, double& lo, double& hi) const {
  if (component < 0 || component >= N_) {
    throw std::invalid_argument("component out of range");
  }
  lo = lo_[component];
  hi = hi_[component];
}

bool LevelSetExtractor::solve_crossing(std::span<const long> nodes, std::span<const double> y,
                                       double amp, std::uint64_t salt,
                                       std::array<double, kMaxGridDim>& pos) const {
  // Rows: the affine constraint, then one row per component. Columns follow
  // the vertex slots. Solved in place by partial-pivot elimination.
  const int m = N_ + 1;
  double A[(kMaxMatrixDim + 1) * (kMaxMatrixDim + 2)];
  const int lead = m + 1;
  double maxabs = 1.0;
  for (int j = 0; j < m; ++j) {
    A[0 * lead + j] = 1.0;
    for (int c = 0; c < N_; ++c) {
      const double v = w_->value(nodes[j], c) +
                       amp * scale_[c] *
                           hash_unit((static_cast<std::uint64_t>(nodes[j]) * N_ + c) * 4 + salt);
      A[(c + 1) * lead + j] = v;
      maxabs = std::max(maxabs, std::fabs(v));
    }
  }
  A[0 * lead + m] = 1.0;
  for (int c = 0; c < N_; ++c) A[(c + 1) * lead + m] = y[c];

  int rowof[kMaxMatrixDim + 1];
  for (int r = 0; r < m; ++r) rowof[r] = r;
  for (int col = 0; col < m; ++col) {
    int best = col;
    for (int r = col + 1; r < m; ++r) {
      if (std::fabs(A[rowof[r] * lead + col]) > std::fabs(A[rowof[best] * lead + col])) best = r;
    }
    std::swap(rowof[col], rowof[best]);
    const double pivot = A[rowof[col] * lead + col];
    // Only fp-exact rank loss counts as singular: facets whose vertices carry
    // duplicate values get pivots of order amp times a hash difference, and
    // those must classify as clean misses, not degeneracies.
    if (std::fabs(pivot) < 1e-16 * maxabs) {
      pos[0] = std::numeric_limits<double>::quiet_NaN();
      return false;
    }
    for (int r = col + 1; r < m; ++r) {
      const double f = A[rowof[r] * lead + col] / pivot;
      if (f == 0.0) continue;
      for (int j = col; j <= m; ++j) A[rowof[r] * lead + j] -= f * A[rowof[col] * lead + j];
    }
  }
  double lambda[kMaxMatrixDim + 1];
  for (int col = m - 1; col >= 0; --col) {
    double s = A[rowof[col] * lead + m];
    for (int j = col + 1; j < m; ++j) s -= A[rowof[col] * lead + j] * lambda[j];
    lambda[col] = s / A[rowof[col] * lead + col];
  }

  double lmin = lambda[0];
  for (int j = 1; j < m; ++j) lmin = std::min(lmin, lambda[j]);
  if (std::fabs(lmin) <= kBaryBand) {
    pos[0] = std::numeric_limits<double>::quiet_NaN();
    return false;
  }
  if (lmin < 0.0) {
    pos[0] = std::numeric_limits<double>::infinity();
    return false;
  }

  const BoxGrid& g = w_->grid();
  std::array<int, kMaxGridDim> idx;
  for (int a = 0; a < d_; ++a) pos[a] = 0.0;
  for (int j = 0; j < m; ++j) {
    g.unflatten(nodes[j], idx);
    for (int a = 0; a < d_; ++a) pos[a] += lambda[j] * g.coord(a, idx[a]);
  }
  return true;
}

bool LevelSetExtractor::trace(std::span<const double> y, double amp, std::uint64_t salt,
                              LevelSetCurrent& out) const {
  constexpr int kB = 32;
  const MultiIndex rows = full_rows(N_);
  const BoxGrid& g = w_->grid();

  long flat = 0;
  for (int c = N_ - 1; c >= 0; --c) {
    const double margin = 1e-6 * scale_[c];
    const double lo = lo_[c] - margin;
    const double width = (hi_[c] + margin - lo) / kB;
    const double rel = (y[c] - lo) / width;
    if (rel < 0.0 || rel >= kB) return true;  // outside every sampled value box
    flat = flat * kB + static_cast<int>(rel);
  }

  const int m = N_ + 1;
  std::array<long, kMaxGridDim + 1> vid{};
  std::array<long, kMaxGridDim + 1> facet{};
  std::array<double, kMaxGridDim> hits[2];

  for (long ci = bucket_start_[flat]; ci < bucket_start_[flat + 1]; ++ci) {
    const long cube = bucket_cubes_[ci];
    long corner = 0;
    long rest = cube;
    for (int a = 0; a < d_; ++a) {
      corner += (rest % cubes_[a]) * node_stride_[a];
      rest /= cubes_[a];
    }
    for (const auto& perm : perms_) {
      vid[0] = corner;
      for (int j = 1; j <= d_; ++j) vid[j] = vid[j - 1] + node_stride_[perm[j - 1]];

      int nhits = 0;
      bool bad = false;
      if (kstar_ == 1) {
        for (int f = 0; f <= d_ && !bad; ++f) {
          int k = 0;
          for (int j = 0; j <= d_; ++j) {
            if (j != f) facet[k++] = vid[j];
          }
          // Sorting makes the solve identical from both simplices sharing
          // the facet, so shared crossings agree bitwise and chain exactly.
          std::sort(facet.begin(), facet.begin() + m);
          std::array<double, kMaxGridDim> p;
          if (solve_crossing(std::span<const long>(facet.data(), m), y, amp, salt, p)) {
            if (nhits < 2) hits[nhits] = p;
            ++nhits;
          } else if (std::isnan(p[0])) {
            bad = true;
          }
        }
        if (!bad && nhits != 0 && nhits != 2) bad = true;
        if (bad) {
          ++out.degenerate_crossings;
          continue;
        }
        if (nhits == 0) continue;
      } else {
        std::array<double, kMaxGridDim> p;
        if (!solve_crossing(std::span<const long>(vid.data(), m), y, amp, salt, p)) {
          if (std::isnan(p[0])) ++out.degenerate_crossings;
          continue;
        }
        hits[0] = p;
        hits[1] = p;
      }

      // Gradient of the simplex interpolant from the unperturbed samples.
      Matrix DU(N_, d_);
      for (int j = 1; j <= d_; ++j) {
        const int axis = perm[j - 1];
        const double h = g.spacing(axis);
        for (int c = 0; c < N_; ++c) {
          DU(c, axis) = (w_->value(vid[j], c) - w_->value(vid[j - 1], c)) / h;
        }
      }

      LevelPiece piece;
      piece.a = hits[0];
      piece.b = hits[1];
      if (kstar_ == 1) {
        double rho[kMaxGridDim];
        double q = 0.0;
        for (int i = 1; i <= d_; ++i) {
          const MultiIndex gamma({i}, d_);
          const MultiIndex gbar = gamma.complement();
          rho[i - 1] = static_cast<double>(sigma(gamma, gbar).value) * minor(DU, gbar, rows);
          q += rho[i - 1] * rho[i - 1];
        }
        piece.jacobian = std::sqrt(q);
        const double pre = (d_ % 2 == 0) ? 1.0 : -1.0;
        if (piece.jacobian > 0.0) {
          for (int a = 0; a < d_; ++a) piece.zeta[a] = pre * rho[a] / piece.jacobian;
        }
        double len = 0.0;
        double along = 0.0;
        for (int a = 0; a < d_; ++a) {
          const double e = piece.b[a] - piece.a[a];
          len += e * e;
          along += e * piece.zeta[a];
        }
        piece.measure = std::sqrt(len);
        if (along < 0.0) std::swap(piece.a, piece.b);  // b - a follows zeta
      } else {
        const double detv = det(DU);
        piece.jacobian = std::fabs(detv);
        piece.zeta[0] = detv > 0.0 ? 1.0 : (detv < 0.0 ? -1.0 : 0.0);
        piece.measure = 1.0;
      }
      out.pieces.push_back(piece);
    }
  }
  return out.degenerate_crossings == 0;
}

LevelSetCurrent LevelSetExtractor::extract(std::span<const double> y) const {
  if (static_cast<int>(y.size()) != N_) {
    throw std::invalid_argument("level needs one entry per component");
  }
  LevelSetCurrent out;
  out.y.assign(y.begin(), y.end());
  out.dim = d_;
  out.piece_dim = kstar_;
  for (int attempt = 0;; ++attempt) {
    out.pieces.clear();
    out.degenerate_crossings = 0;
    const double amp = 1e-9 * std::pow(8.0, attempt);
    if (trace(y, amp, static_cast<std::uint64_t>(attempt), out)) break;
    if (attempt == 2) {
      throw DegenerateInputError("level collides with sampled values beyond the perturbation budget");
    }
  }
  double mx = 0.0;
  for (const LevelPiece& piece : out.pieces) mx = std::max(mx, piece.jacobian);
  out.max_jacobian = mx;
  for (LevelPiece& piece : out.pieces) {
    piece.in_core = piece.jacobian > 0.0 && piece.jacobian >= threshold_ * mx;
  }
  return out;
}

LevelSetCurrent level_set_current(const SampledMap& extended, std::span<const double> y) {
  return LevelSetExtractor(extended).extract(y);
}

void write_level_set_csv(const LevelSetCurrent& current, std::ostream& out) {
  const int d = current.dim;
  const auto axes = [&](const char* stem) {
    for (int a = 0; a < d; ++a) out << stem << (a + 1) << ",";
  };
  axes("a");
  axes("b");
  axes("zeta");
  out << "measure,jacobian,core\n";
  char buf[32];
  const auto cell = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << buf << ",";
  };
  for (const LevelPiece& piece : current.pieces) {
    for (int a = 0; a < d; ++a) cell(piece.a[a]);
    for (int a = 0; a < d; ++a) cell(piece.b[a]);
    for (int a = 0; a < d; ++a) cell(piece.zeta[a]);
    cell(piece.measure);
    cell(piece.jacobian);
    out << (piece.in_core ? 1 : 0) << "\n";
  }
}

// ==== coarea and chain rule ====

CoareaCheck weak_coarea_check(const SampledMap& u, const DomainForm& omega,
                              const CoareaOptions& opts) {
  check_square_target(u);
  const BoxGrid& base = u.grid();
  const int n = base.dim();
  const dsl::Expression& psi = only_coefficient(omega, n);

  const double lhs = ju_eval(u, omega, opts.minor).value;
  const int L = pick_layer_count(base, opts.minor.layers);
  const SampledMap U =
      extend_map(u, cylinder_grid(base, L), opts.minor.profile, opts.minor.threads);
  const LevelSetExtractor ex(U);

  return monte_carlo_rhs(ex, opts.mc, lhs, [&](const LevelSetCurrent& cur) {
    double acc = 0.0;
    for (const LevelPiece& piece : cur.pieces) {
      if (!piece.in_core) continue;
      acc += pair_piece_with_dpsi(piece, psi, base);
    }
    return acc;
  });
}

CoareaCheck chain_rule_check(const SampledMap& u, const dsl::VectorExpression& F,
                             const DomainForm& omega, const CoareaOptions& opts) {
  check_square_target(u);
  const BoxGrid& base = u.grid();
  const int n = base.dim();
  const int N = u.components();
  const dsl::Expression& psi = only_coefficient(omega, n);
  if (F.components() != N || F.arity() != N) {
    throw std::invalid_argument("composition must map the target space to itself");
  }

  // Differentiates F at one target point by central differences.
  const auto df_at = [&](std::span<const double> y, Matrix& DF) {
    std::array<double, kMaxMatrixDim> z;
    std::array<double, kMaxMatrixDim> plus;
    std::array<double, kMaxMatrixDim> minus;
    std::copy(y.begin(), y.end(), z.begin());
    for (int j = 0; j < N; ++j) {
      const double h = 1e-5 * std::max(1.0, std::fabs(y[j]));
      const double keep = z[j];
      z[j] = keep + h;
      F.evaluate(std::span<const double>(z.data(), N), std::span<double>(plus.data(), N));
      z[j] = keep - h;
      F.evaluate(std::span<const double>(z.data(), N), std::span<double>(minus.data(), N));
      z[j] = keep;
      for (int c = 0; c < N; ++c) DF(c, j) = (plus[c] - minus[c]) / (2.0 * h);
    }
  };

  SampledMap composed(base, N);
  composed.provenance = "composition";
  std::array<double, kMaxMatrixDim> yv;
  std::array<double, kMaxMatrixDim> fv;
  Matrix DF(N, N);
  for (long b = 0; b < base.node_count(); ++b) {
    if (u.masked(b)) {
      for (int c = 0; c < N; ++c) composed.value(b, c) = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    u.values_at(b, std::span<double>(yv.data(), N));
    df_at(std::span<const double>(yv.data(), N), DF);
    if (!DF.all_finite()) {
      throw std::invalid_argument("composition has a non-finite derivative at a sampled value");
    }
    F.evaluate(std::span<const double>(yv.data(), N), std::span<double>(fv.data(), N));
    for (int c = 0; c < N; ++c) composed.value(b, c) = fv[c];
  }
  composed.recompute_mask();

  const double lhs = ju_eval(composed, omega, opts.minor).value;
  const int L = pick_layer_count(base, opts.minor.layers);
  const SampledMap U =
      extend_map(u, cylinder_grid(base, L), opts.minor.profile, opts.minor.threads);
  const LevelSetExtractor ex(U);

  return monte_carlo_rhs(ex, opts.mc, lhs, [&](const LevelSetCurrent& cur) {
    Matrix local(N, N);
    df_at(std::span<const double>(cur.y.data(), N), local);
    const double weight = det(local);
    double acc = 0.0;
    for (const LevelPiece& piece : cur.pieces) {
      if (!piece.in_core) continue;
      acc += pair_piece_with_dpsi(piece, psi, base);
    }
    return weight * acc;
  });
}

CoareaCheck strong_coarea_check(const SampledMap& u, const MonteCarloOptions& opts) {
  const BoxGrid& g = u.grid();
  const int n = g.dim();
  const int N = u.components();
  if (N != 2 && N != 3) {
    throw std::invalid_argument("strong coarea supports 2 or 3 components");
  }
  if (n - N != 0 && n - N != 1) {
    throw std::invalid_argument("strong coarea needs level sets of points or segments");
  }
  if (u.masked_count() > 0) {
    throw DegenerateInputError("strong coarea needs an everywhere-finite map");
  }

  const JacobianField J = jacobian(u, opts.threads);
  const MultiIndex rows = full_rows(N);
  const std::vector<MultiIndex> alphas = enumerate_indices(n - N, n);
  std::vector<double> buf(g.node_count());
  parallel_for(g.node_count(), opts.threads, [&](long lo, long hi) {
    for (long b = lo; b < hi; ++b) {
      const Matrix M = J.matrix(b);
      double s = 0.0;
      for (const MultiIndex& alpha : alphas) s += std::fabs(minor(M, alpha.complement(), rows));
      buf[b] = s;
    }
  });
  const double lhs = g.cell_volume() * pairwise_sum(buf);

  const LevelSetExtractor ex(u);
  return monte_carlo_rhs(ex, opts, lhs, [&](const LevelSetCurrent& cur) {
    double acc = 0.0;
    for (const LevelPiece& piece : cur.pieces) {
      if (piece.in_core) acc += piece.measure;
    }
    return acc;
  });
}

double bnv_mass(const SampledMap& u, std::span<const DomainForm> dictionary,
                const DivMinorOptions& opts) {
  if (dictionary.empty()) {
    throw std::invalid_argument("mass bound needs a nonempty dictionary");
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const DomainForm& omega : dictionary) {
    best = std::max(best, ju_eval(u, omega, opts).value);
  }
  return best;
}

}  // namespace distcurrents
