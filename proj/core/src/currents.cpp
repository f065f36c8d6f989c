#include "distcurrents/currents.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cylinder_sweep.hpp"
#include "distcurrents/exterior.hpp"
#include "distcurrents/parallel.hpp"
#include "distcurrents/reduce.hpp"

namespace distcurrents {

namespace {

// Directions complement(alpha) + (n+1) with their merge signs; shared by the
// boundary-route evaluators.
struct BoundaryTerm {
  int label;
  MultiIndex cols;
  double sign;  // sigma(cols, {label})
};

std::vector<BoundaryTerm> boundary_terms(const MultiIndex& alpha, int n) {
  const MultiIndex aplus = alpha.complement().widen(n + 1).add(n + 1);
  std::vector<BoundaryTerm> specs;
  for (int s = 0; s < aplus.size(); ++s) {
    const int i = aplus.label(s);
    MultiIndex cols = aplus.remove(i);
    const double sign = static_cast<double>(sigma(cols, MultiIndex({i}, n + 1)).value);
    specs.push_back({i, std::move(cols), sign});
  }
  return specs;
}

void check_component_pair(const MultiIndex& alpha, const MultiIndex& beta, int n, int N) {
  if (alpha.ambient() != n) {
    throw std::invalid_argument("alpha must index the domain axes");
  }
  if (beta.ambient() != N) {
    throw std::invalid_argument("beta must index the target components");
  }
  if (alpha.size() + beta.size() != n) {
    throw std::invalid_argument("component degree must match the domain dimension");
  }
}

int pick_layers(const BoxGrid& base, int requested) {
  int L = requested;
  if (L == 0) {
    for (int a = 0; a < base.dim(); ++a) L = std::max(L, base.res(a));
  }
  if (L < 3) throw std::invalid_argument("extension axis needs at least 3 layers");
  return L;
}

// Finite-difference step in the y arguments: the grid step scaled by how
// steep the map is, clamped to stay local.
double y_step(const SampledMap& u, int threads) {
  double steep = 0.0;
  if (u.grid().res(0) >= 3) {
    const JacobianField J = jacobian(u, threads);
    for (long b = 0; b < u.grid().node_count(); ++b) {
      if (J.masked(b)) continue;
      const Matrix& M = J.matrix(b);
      for (int r = 0; r < M.rows(); ++r)
        for (int c = 0; c < M.cols(); ++c) steep = std::max(steep, std::abs(M(r, c)));
    }
  }
  return u.grid().min_spacing() * std::clamp(steep, 1.0, 8.0);
}

}  // namespace

DifferentialForm::DifferentialForm(int domain_dim, int target_dim, int degree,
                                   std::vector<FormTerm> terms)
    : n_(domain_dim), N_(target_dim), degree_(degree), terms_(std::move(terms)) {
  if (n_ < 1 || n_ > kMaxGridDim) {
    throw std::invalid_argument("form domain dimension out of range");
  }
  if (N_ < 1 || N_ > kMaxMatrixDim) {
    throw std::invalid_argument("form target dimension out of range");
  }
  if (degree_ < 0 || degree_ > n_ + N_) {
    throw std::invalid_argument("form degree out of range");
  }
  for (const FormTerm& term : terms_) {
    if (term.alpha.ambient() != n_ || term.beta.ambient() != N_) {
      throw std::invalid_argument("form term indices must match the form's dimensions");
    }
    if (term.alpha.size() + term.beta.size() != degree_) {
      throw std::invalid_argument("every form term must have the declared degree");
    }
    if (term.coefficient.arity() != n_ + N_) {
      throw std::invalid_argument("form coefficients take the domain then target coordinates");
    }
  }
}

double graph_current_eval(const SampledMap& u, const DifferentialForm& omega, int threads) {
  const BoxGrid& g = u.grid();
  const int n = g.dim();
  const int N = u.components();
  if (omega.domain_dim() != n || omega.target_dim() != N) {
    throw std::invalid_argument("form dimensions must match the map");
  }
  if (omega.degree() != n) {
    throw std::invalid_argument("graph currents act on forms of the domain's degree");
  }
  if (u.masked_count() > 0) {
    throw DegenerateInputError("graph current needs an everywhere-finite map");
  }

  const JacobianField J = jacobian(u, threads);
  const long B = g.node_count();
  const double vol = g.cell_volume();

  double value = 0.0;
  std::vector<double> buf(B);
  for (const FormTerm& term : omega.terms()) {
    const MultiIndex abar = term.alpha.complement();
    if (abar.size() != term.beta.size()) {
      throw std::invalid_argument("graph route needs |beta| complementary to |alpha|");
    }
    const double sig = static_cast<double>(sigma(term.alpha, abar).value);
    parallel_for(B, threads, [&](long lo, long hi) {
      std::array<int, kMaxGridDim> idx;
      std::array<double, kMaxGridDim + kMaxMatrixDim> z;
      for (long b = lo; b < hi; ++b) {
        g.unflatten(b, idx);
        g.node_coord(std::span<const int>(idx.data(), n), std::span<double>(z.data(), n));
        u.values_at(b, std::span<double>(z.data() + n, N));
        const double w = term.coefficient.evaluate(std::span<const double>(z.data(), n + N));
        buf[b] = w == 0.0 ? 0.0 : w * minor(J.matrix(b), abar, term.beta);
      }
    });
    value += sig * vol * pairwise_sum(buf);
  }
  return value;
}

CurrentComponentValue graph_component(const SampledMap& u, const MultiIndex& alpha,
                                      const MultiIndex& beta, const dsl::Expression& coefficient,
                                      int threads) {
  const int n = u.grid().dim();
  const int N = u.components();
  check_component_pair(alpha, beta, n, N);
  std::vector<FormTerm> terms;
  terms.push_back({alpha, beta, coefficient});
  const DifferentialForm omega(n, N, n, std::move(terms));
  return {alpha, beta, graph_current_eval(u, omega, threads), FormulaRoute::Graph, 0};
}

CurrentComponentValue tu_component(const SampledMap& u, const MultiIndex& alpha,
                                   const MultiIndex& beta, const dsl::Expression& coefficient,
                                   const DivMinorOptions& opts) {
  const BoxGrid& base = u.grid();
  const int n = base.dim();
  const int N = u.components();
  check_component_pair(alpha, beta, n, N);
  if (coefficient.arity() != n + N) {
    throw std::invalid_argument("component coefficients take the domain then target coordinates");
  }

  const int L = pick_layers(base, opts.layers);
  const BoxGrid cyl = cylinder_grid(base, L);
  const std::vector<BoundaryTerm> specs = boundary_terms(alpha, n);
  const int nterms = static_cast<int>(specs.size());
  const double sig_alpha = static_cast<double>(sigma(alpha, alpha.complement()).value);

  const double hy = y_step(u, opts.threads);
  std::array<double, kMaxGridDim> hx;
  for (int a = 0; a < n; ++a) hx[a] = base.spacing(a);

  const auto live = [](long) { return true; };
  const auto eval = [&](long, std::span<const int> idx, double, double eta, double etap,
                        const double* y, const Matrix& DU, std::span<double> slots) {
    std::array<double, kMaxGridDim + kMaxMatrixDim> z;
    for (int a = 0; a < n; ++a) z[a] = base.coord(a, idx[a]);
    for (int c = 0; c < N; ++c) z[n + c] = y[c];
    const std::span<const double> zs(z.data(), n + N);

    const double psi0 = coefficient.evaluate(zs);
    std::array<double, kMaxGridDim> dx;
    for (int a = 0; a < n; ++a) {
      const double keep = z[a];
      z[a] = keep + hx[a];
      const double f1 = coefficient.evaluate(zs);
      z[a] = keep - hx[a];
      const double f0 = coefficient.evaluate(zs);
      z[a] = keep;
      dx[a] = (f1 - f0) / (2.0 * hx[a]);
    }
    std::array<double, kMaxMatrixDim> dy;
    for (int c = 0; c < N; ++c) {
      const double keep = z[n + c];
      z[n + c] = keep + hy;
      const double f1 = coefficient.evaluate(zs);
      z[n + c] = keep - hy;
      const double f0 = coefficient.evaluate(zs);
      z[n + c] = keep;
      dy[c] = (f1 - f0) / (2.0 * hy);
    }

    for (int s = 0; s < nterms; ++s) {
      const int label = specs[s].label;
      const int col = label - 1;
      double chain = 0.0;
      for (int c = 0; c < N; ++c) chain += dy[c] * DU(c, col);
      const double total =
          label <= n ? eta * (dx[col] + chain) : psi0 * etap + eta * chain;
      slots[s] = total == 0.0 ? 0.0 : minor(DU, specs[s].cols, beta) * total;
    }
  };

  const detail::SweepOutcome sweep =
      detail::cylinder_sweep(u, base, cyl, opts.profile.kind, opts.threads, nterms, live, eval);
  if (sweep.candidates > 0 && sweep.masked == sweep.candidates) {
    throw DegenerateInputError("boundary integrand is non-finite everywhere");
  }

  double value = 0.0;
  const double vol = cyl.cell_volume();
  for (int s = 0; s < nterms; ++s) {
    value += -specs[s].sign * sig_alpha * vol * sweep.term_sums[s];
  }
  return {alpha, beta, value, FormulaRoute::Boundary, sweep.masked};
}

PushforwardComparison pushforward_check(const SampledMap& u, const MultiIndex& alpha,
                                        const MultiIndex& beta, const TestFunction& psi,
                                        const DivMinorOptions& opts) {
  const BoxGrid& base = u.grid();
  const int n = base.dim();
  const int N = u.components();
  check_component_pair(alpha, beta, n, N);
  if (!psi.grid().same_geometry(base)) {
    throw std::invalid_argument("test function must live on the map's grid");
  }

  // The radial cutoff plateaus past every value the extension can reach:
  // layer values are averages of map samples, so their norms never exceed
  // the largest sample norm.
  double reach = 0.0;
  for (long b = 0; b < base.node_count(); ++b) {
    if (u.masked(b)) continue;
    double q = 0.0;
    for (int c = 0; c < N; ++c) {
      const double v = u.value(b, c);
      q += v * v;
    }
    reach = std::max(reach, q);
  }
  const double R = std::max(2.0 * std::sqrt(reach), 1.0);

  const auto chi = [R](double rho) {
    if (rho <= R) return 1.0;
    if (rho >= 2.0 * R) return 0.0;
    const double s = (rho - R) / R;
    return 1.0 - s * s * (3.0 - 2.0 * s);
  };
  const auto chi_slope = [R](double rho) {
    if (rho <= R || rho >= 2.0 * R) return 0.0;
    const double s = (rho - R) / R;
    return -6.0 * s * (1.0 - s) / R;
  };

  const int L = pick_layers(base, opts.layers);
  const BoxGrid cyl = cylinder_grid(base, L);
  const std::vector<BoundaryTerm> specs = boundary_terms(alpha, n);
  const int nterms = static_cast<int>(specs.size());

  // Two slots per direction: the psi-derivative part and the cutoff-gradient
  // part, kept separate so the latter can be certified negligible.
  const auto live = [&](long b) {
    if (psi.value(b) != 0.0) return true;
    for (int a = 0; a < n; ++a) {
      if (psi.gradient(b, a) != 0.0) return true;
    }
    return false;
  };
  const auto eval = [&](long b, std::span<const int>, double, double eta, double etap,
                        const double* y, const Matrix& DU, std::span<double> slots) {
    const double psi_v = psi.value(b);
    double rho = 0.0;
    for (int c = 0; c < N; ++c) rho += y[c] * y[c];
    rho = std::sqrt(rho);
    const double cut = chi(rho);
    const double slope = chi_slope(rho);

    for (int s = 0; s < nterms; ++s) {
      const int label = specs[s].label;
      const double dpsi =
          label <= n ? eta * (psi.gradient(b, label - 1) * cut) : (psi_v * cut) * etap;
      double leak = 0.0;
      if (slope != 0.0 && rho > 0.0) {
        for (int c = 0; c < N; ++c) leak += slope * (y[c] / rho) * DU(c, label - 1);
        leak *= eta * psi_v;
      }
      const double m =
          dpsi == 0.0 && leak == 0.0 ? 0.0 : minor(DU, specs[s].cols, beta);
      slots[s] = dpsi == 0.0 ? 0.0 : m * dpsi;
      slots[nterms + s] = leak == 0.0 ? 0.0 : m * leak;
    }
  };

  const detail::SweepOutcome sweep = detail::cylinder_sweep(
      u, base, cyl, opts.profile.kind, opts.threads, 2 * nterms, live, eval);
  if (sweep.candidates > 0 && sweep.masked == sweep.candidates) {
    throw DegenerateInputError("boundary integrand is non-finite everywhere");
  }

  PushforwardComparison out;
  const double vol = cyl.cell_volume();
  double leak_total = 0.0;
  for (int s = 0; s < nterms; ++s) {
    out.boundary_route += -specs[s].sign * vol * sweep.term_sums[s];
    leak_total += -specs[s].sign * vol * sweep.term_sums[nterms + s];
  }
  out.boundary_route += leak_total;
  out.cutoff_residual = std::abs(leak_total);
  if (out.cutoff_residual > 1e-10 * std::max(1.0, std::abs(out.boundary_route))) {
    throw std::runtime_error("radial cutoff leaked into the pushforward");
  }

  const MultiIndex abar = alpha.complement();
  out.minor_route = div_minor(u, abar, beta, psi, opts).value;
  return out;
}

double mass_lower_bound(const std::function<double(const DifferentialForm&)>& evaluate,
                        std::span<const DifferentialForm> dictionary) {
  if (dictionary.empty()) {
    throw std::invalid_argument("mass bound needs a nonempty dictionary");
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const DifferentialForm& omega : dictionary) {
    best = std::max(best, evaluate(omega));
  }
  return best;
}

}  // namespace distcurrents
