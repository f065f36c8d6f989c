#pragma once

// Internal: the layered cylinder walk shared by the extension-based
// evaluators. Not installed.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "distcurrents/extension.hpp"
#include "distcurrents/grid.hpp"
#include "distcurrents/parallel.hpp"
#include "distcurrents/reduce.hpp"

namespace distcurrents::detail {

// Supplies U(., t) on the base lattice one layer at a time.
class LayerSource {
 public:
  LayerSource(const SampledMap& u, const BoxGrid& base, ExtensionKind kind, int threads)
      : u_(&u), base_(&base), kind_(kind), threads_(threads) {
    if (kind_ == ExtensionKind::Averaging) {
      avg_.emplace(u, 1.0);
      return;
    }
    source_node_.resize(base.node_count());
    if (base.same_geometry(u.grid())) {
      for (long b = 0; b < base.node_count(); ++b) source_node_[b] = b;
      return;
    }
    const BoxGrid& ug = u.grid();
    std::array<int, kMaxGridDim> idx, uidx;
    for (long b = 0; b < base.node_count(); ++b) {
      base.unflatten(b, idx);
      for (int a = 0; a < base.dim(); ++a) {
        const double x = base.coord(a, idx[a]);
        const int i = static_cast<int>(std::floor((x - ug.lower(a)) / ug.spacing(a)));
        uidx[a] = std::clamp(i, 0, ug.res(a) - 1);
      }
      source_node_[b] = ug.flatten(std::span<const int>(uidx.data(), base.dim()));
    }
  }

  void fill(double t, std::vector<double>& out) const {
    const int N = u_->components();
    const long B = base_->node_count();
    out.resize(static_cast<std::size_t>(B) * N);
    if (kind_ == ExtensionKind::ProductCutoff) {
      parallel_for(B, threads_, [&](long lo, long hi) {
        for (long b = lo; b < hi; ++b) {
          for (int c = 0; c < N; ++c) out[b * N + c] = u_->value(source_node_[b], c);
        }
      });
      return;
    }
    const int n = base_->dim();
    parallel_for(B, threads_, [&](long lo, long hi) {
      std::array<int, kMaxGridDim> idx;
      std::array<double, kMaxGridDim> x;
      std::array<double, kMaxMatrixDim> v;
      for (long b = lo; b < hi; ++b) {
        base_->unflatten(b, idx);
        for (int a = 0; a < n; ++a) x[a] = base_->coord(a, idx[a]);
        avg_->mean(std::span<const double>(x.data(), n), t,
                   std::span<double>(v.data(), N));
        for (int c = 0; c < N; ++c) out[b * N + c] = v[c];
      }
    });
  }

 private:
  const SampledMap* u_;
  const BoxGrid* base_;
  ExtensionKind kind_;
  int threads_;
  std::optional<BallAverager> avg_;
  std::vector<long> source_node_;
};

struct SweepOutcome {
  // Per integrand slot: pairwise sum over layers of pairwise sums over base
  // nodes. Multiply by cell volume and outer signs at the call site.
  std::vector<double> term_sums;
  long candidates = 0;
  long masked = 0;
};

// Walks Omega x (0,1) in layers with a five-slot ring, differentiating the
// extension on the fly. Layers where the cutoff and its slope both vanish
// contribute exactly zero for every caller (their integrands carry an eta or
// eta' factor) and are skipped without being filled.
//
// live(b) gates a base node cheaply before any data is assembled. For each
// surviving node the driver builds U and DU; non-finite data marks the node
// masked, otherwise eval(b, idx, t, eta, etap, y, DU, out) writes one
// integrand value per slot. Reductions are deterministic for any thread
// count.
template <typename Live, typename Eval>
SweepOutcome cylinder_sweep(const SampledMap& u, const BoxGrid& base, const BoxGrid& cyl,
                            ExtensionKind kind, int threads, int nterms,
                            const Live& live, const Eval& eval) {
  const int n = base.dim();
  const int N = u.components();
  const int L = cyl.res(n);
  const long B = base.node_count();
  const double ht = cyl.spacing(n);
  if (nterms < 1 || nterms > 16) throw std::invalid_argument("sweep slot count out of range");

  int last_active = -1;
  for (int j = 0; j < L; ++j) {
    const double t = cyl.coord(n, j);
    if (cutoff_eta(t) != 0.0 || cutoff_eta_prime(t) != 0.0) last_active = j;
  }
  const int fill_last = std::min(L - 1, last_active + 1);

  long stride[kMaxGridDim];
  stride[n - 1] = 1;
  for (int a = n - 2; a >= 0; --a) stride[a] = stride[a + 1] * base.res(a + 1);

  const LayerSource src(u, base, kind, threads);
  std::array<std::vector<double>, 5> ring;
  auto slot = [&](int j) -> std::vector<double>& { return ring[j % 5]; };

  std::vector<std::vector<double>> bufs(nterms, std::vector<double>(B));
  std::vector<unsigned char> flags(B);
  std::vector<std::vector<double>> layer_sums(nterms, std::vector<double>(L, 0.0));
  long candidates_total = 0, masked_total = 0;

  // Integrand of layer j; every layer it touches must already be in the ring.
  auto process = [&](int j) {
    const double t = cyl.coord(n, j);
    const double eta = cutoff_eta(t);
    const double etap = cutoff_eta_prime(t);
    if (eta == 0.0 && etap == 0.0) return;

    const std::vector<double>& cur = slot(j);
    const double* t0 = nullptr;
    const double* t1 = nullptr;
    const double* t2 = nullptr;
    enum { Central, Bottom, Top } tmode;
    if (j == 0) {
      tmode = Bottom;
      t0 = slot(0).data();
      t1 = slot(1).data();
      t2 = slot(2).data();
    } else if (j == L - 1) {
      tmode = Top;
      t0 = slot(L - 1).data();
      t1 = slot(L - 2).data();
      t2 = slot(L - 3).data();
    } else {
      tmode = Central;
      t1 = slot(j - 1).data();
      t2 = slot(j + 1).data();
    }

    parallel_for(B, threads, [&](long lo, long hi) {
      std::array<int, kMaxGridDim> idx;
      std::array<double, 16> tmp;
      Matrix DU(N, n + 1);
      for (long b = lo; b < hi; ++b) {
        if (!live(b)) {
          flags[b] = 0;
          for (int s = 0; s < nterms; ++s) bufs[s][b] = 0.0;
          continue;
        }

        base.unflatten(b, idx);
        bool bad = false;
        for (int a = 0; a < n && !bad; ++a) {
          const long st = stride[a];
          const int ia = idx[a];
          const int r = base.res(a);
          const double h = base.spacing(a);
          for (int c = 0; c < N; ++c) {
            auto pick = [&](int jj) {
              return cur[(b + static_cast<long>(jj - ia) * st) * N + c];
            };
            const double d = fd_axis(pick, ia, r, h);
            if (!std::isfinite(d)) {
              bad = true;
              break;
            }
            DU(c, a) = d;
          }
        }
        for (int c = 0; c < N && !bad; ++c) {
          double d;
          if (tmode == Central) {
            d = (t2[b * N + c] - t1[b * N + c]) / (2.0 * ht);
          } else if (tmode == Bottom) {
            d = (-3.0 * t0[b * N + c] + 4.0 * t1[b * N + c] - t2[b * N + c]) / (2.0 * ht);
          } else {
            d = (3.0 * t0[b * N + c] - 4.0 * t1[b * N + c] + t2[b * N + c]) / (2.0 * ht);
          }
          if (!std::isfinite(d)) bad = true;
          DU(c, n) = d;
        }

        if (bad) {
          flags[b] = 2;
          for (int s = 0; s < nterms; ++s) bufs[s][b] = 0.0;
          continue;
        }
        flags[b] = 1;
        eval(b, std::span<const int>(idx.data(), n), t, eta, etap, cur.data() + b * N, DU,
             std::span<double>(tmp.data(), nterms));
        for (int s = 0; s < nterms; ++s) bufs[s][b] = tmp[s];
      }
    });

    for (long b = 0; b < B; ++b) {
      candidates_total += flags[b] != 0;
      masked_total += flags[b] == 2;
    }
    for (int s = 0; s < nterms; ++s) layer_sums[s][j] = pairwise_sum(bufs[s]);
  };

  for (int j = 0; j <= fill_last; ++j) {
    src.fill(cyl.coord(n, j), slot(j));
    if (j == 2) process(0);
    if (j >= 2 && j - 1 <= L - 2) process(j - 1);
    if (j == fill_last && last_active == L - 1) process(L - 1);
  }

  SweepOutcome out;
  out.candidates = candidates_total;
  out.masked = masked_total;
  out.term_sums.resize(nterms);
  for (int s = 0; s < nterms; ++s) out.term_sums[s] = pairwise_sum(layer_sums[s]);
  return out;
}

}  // namespace distcurrents::detail
