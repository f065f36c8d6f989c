#include "distcurrents/distminor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cylinder_sweep.hpp"
#include "distcurrents/errors.hpp"
#include "distcurrents/exterior.hpp"
#include "distcurrents/parallel.hpp"
#include "distcurrents/reduce.hpp"

namespace distcurrents {

namespace {

void check_index_pair(const MultiIndex& alpha, const MultiIndex& beta, int n, int N) {
  if (alpha.ambient() != n) {
    throw std::invalid_argument("alpha must index the domain axes");
  }
  if (beta.ambient() != N) {
    throw std::invalid_argument("beta must index the target components");
  }
  if (alpha.size() != beta.size()) {
    throw std::invalid_argument("alpha and beta must have equal order");
  }
  if (alpha.size() > std::min(n, N)) {
    throw std::invalid_argument("minor order exceeds min(domain, target) dimension");
  }
}

}  // namespace

DistributionalEvaluation div_minor(const SampledMap& u, const MultiIndex& alpha,
                                   const MultiIndex& beta, const TestFunction& psi,
                                   const DivMinorOptions& opts) {
  const int n = u.grid().dim();
  const int N = u.components();
  check_index_pair(alpha, beta, n, N);
  const BoxGrid& base = psi.grid();
  if (!base.same_geometry(u.grid())) {
    throw std::invalid_argument("test function must live on the map's grid");
  }
  const int k = alpha.size();

  DistributionalEvaluation out;
  out.extension = opts.profile.kind;

  if (k == 0) {
    // Order zero pairs against the underlying measure: plain int psi.
    const auto r = integrate(psi.values(), base);
    out.value = r.value;
    out.quadrature = base;
    out.terms = {{n + 1, r.value}};
    return out;
  }

  int L = opts.layers;
  if (L == 0) {
    for (int a = 0; a < n; ++a) L = std::max(L, base.res(a));
  }
  if (L < 3) throw std::invalid_argument("extension axis needs at least 3 layers");
  const BoxGrid cyl = cylinder_grid(base, L);
  out.quadrature = cyl;

  // One term per direction in alpha + (n+1): strip the direction from the
  // column set, keep its merge sign.
  struct TermSpec {
    int label;
    MultiIndex cols;
    double outer;
  };
  const MultiIndex aplus = alpha.widen(n + 1).add(n + 1);
  std::vector<TermSpec> specs;
  for (int s = 0; s < aplus.size(); ++s) {
    const int i = aplus.label(s);
    MultiIndex cols = aplus.remove(i);
    const double outer = -static_cast<double>(sigma(cols, MultiIndex({i}, n + 1)).value);
    specs.push_back({i, std::move(cols), outer});
  }
  const int nterms = static_cast<int>(specs.size());

  const auto live = [&](long b) {
    if (psi.value(b) != 0.0) return true;
    for (int a = 0; a < n; ++a) {
      if (psi.gradient(b, a) != 0.0) return true;
    }
    return false;
  };
  const auto eval = [&](long b, std::span<const int>, double, double eta, double etap,
                        const double*, const Matrix& DU, std::span<double> slots) {
    const double psi_v = psi.value(b);
    for (int s = 0; s < nterms; ++s) {
      const int label = specs[s].label;
      const double dpsi = label <= n ? eta * psi.gradient(b, label - 1) : psi_v * etap;
      slots[s] = dpsi == 0.0 ? 0.0 : minor(DU, specs[s].cols, beta) * dpsi;
    }
  };
  const detail::SweepOutcome sweep =
      detail::cylinder_sweep(u, base, cyl, opts.profile.kind, opts.threads, nterms, live, eval);

  out.masked = sweep.masked;
  if (sweep.candidates > 0 && sweep.masked == sweep.candidates) {
    throw DegenerateInputError("distributional integrand is non-finite everywhere");
  }

  out.value = 0.0;
  const double vol = cyl.cell_volume();
  for (int s = 0; s < nterms; ++s) {
    const double term = specs[s].outer * vol * sweep.term_sums[s];
    out.terms.emplace_back(specs[s].label, term);
    out.value += term;
  }
  return out;
}

double pointwise_minor_integral(const SampledMap& u, const MultiIndex& alpha,
                                const MultiIndex& beta, const TestFunction& psi,
                                int threads) {
  const int n = u.grid().dim();
  const int N = u.components();
  check_index_pair(alpha, beta, n, N);
  if (!psi.grid().same_geometry(u.grid())) {
    throw std::invalid_argument("test function must live on the map's grid");
  }
  if (u.masked_count() > 0) {
    throw DegenerateInputError("pointwise minors need an everywhere-finite map");
  }
  if (alpha.size() == 0) return integrate(psi.values(), u.grid()).value;

  const JacobianField J = jacobian(u, threads);
  const long B = u.grid().node_count();
  std::vector<double> buf(B);
  parallel_for(B, threads, [&](long lo, long hi) {
    for (long b = lo; b < hi; ++b) {
      const double p = psi.value(b);
      buf[b] = p == 0.0 ? 0.0 : minor(J.matrix(b), alpha, beta) * p;
    }
  });
  return u.grid().cell_volume() * pairwise_sum(buf);
}

double cofactor_divergence_residual(const SampledMap& U, const MultiIndex& alpha,
                                    const MultiIndex& beta, int row_label,
                                    int threads) {
  const int d = U.grid().dim();
  const int N = U.components();
  check_index_pair(alpha, beta, d, N);
  if (alpha.size() < 1) {
    throw std::invalid_argument("cofactor divergence needs order at least 1");
  }
  if (!beta.contains(row_label)) {
    throw std::invalid_argument("row label must belong to beta");
  }
  if (U.masked_count() > 0) {
    throw DegenerateInputError("cofactor divergence needs an everywhere-finite map");
  }

  const JacobianField J = jacobian(U, threads);
  const long B = U.grid().node_count();
  std::vector<double> div(B, 0.0);
  for (int s = 0; s < alpha.size(); ++s) {
    const int i = alpha.label(s);
    SampledMap f(U.grid(), 1);
    parallel_for(B, threads, [&](long lo, long hi) {
      for (long b = lo; b < hi; ++b) {
        f.value(b, 0) = adjoint_entry(J.matrix(b), alpha, beta, row_label, i);
      }
    });
    const JacobianField Jf = jacobian(f, threads);
    parallel_for(B, threads, [&](long lo, long hi) {
      for (long b = lo; b < hi; ++b) div[b] += Jf.matrix(b)(0, i - 1);
    });
  }
  for (long b = 0; b < B; ++b) div[b] = std::abs(div[b]);
  return U.grid().cell_volume() * pairwise_sum(div);
}

}  // namespace distcurrents
