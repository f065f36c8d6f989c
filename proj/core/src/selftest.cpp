#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "distcurrents/exterior.hpp"
#include "distcurrents/multiindex.hpp"
#include "distcurrents/runner.hpp"

namespace distcurrents {

namespace {

long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long v = 1;
  for (int i = 0; i < k; ++i) v = v * (n - i) / (i + 1);
  return v;
}

// Parity of the permutation sorting the concatenated label lists.
int brute_parity(const MultiIndex& a, const MultiIndex& b) {
  std::vector<int> labels;
  for (int i = 0; i < a.size(); ++i) labels.push_back(a.label(i));
  for (int i = 0; i < b.size(); ++i) labels.push_back(b.label(i));
  int inversions = 0;
  for (size_t i = 0; i < labels.size(); ++i)
    for (size_t j = i + 1; j < labels.size(); ++j)
      if (labels[i] > labels[j]) ++inversions;
  return (inversions % 2 == 0) ? 1 : -1;
}

bool complement_involution() {
  for (int n = 1; n <= 6; ++n)
    for (int k = 0; k <= n; ++k)
      for (const MultiIndex& a : enumerate_indices(k, n)) {
        const MultiIndex c = a.complement();
        if (c.size() != n - k) return false;
        if (c.complement() != a) return false;
        for (int i = 0; i < c.size(); ++i)
          if (a.contains(c.label(i))) return false;
      }
  return true;
}

bool enumeration_order() {
  for (int n = 1; n <= 6; ++n)
    for (int k = 0; k <= n; ++k) {
      const std::vector<MultiIndex> all = enumerate_indices(k, n);
      if (static_cast<long>(all.size()) != binomial(n, k)) return false;
      for (size_t i = 0; i < all.size(); ++i) {
        if (all[i].size() != k || all[i].ambient() != n) return false;
        if (i > 0 && !(all[i - 1] < all[i])) return false;
      }
    }
  return true;
}

bool sigma_parity() {
  for (int n = 1; n <= 6; ++n)
    for (int k = 0; k <= n; ++k)
      for (const MultiIndex& a : enumerate_indices(k, n))
        if (sigma(a, a.complement()).value != brute_parity(a, a.complement())) return false;
  return true;
}

bool sigma_antisymmetry() {
  for (int n = 1; n <= 5; ++n)
    for (int k = 0; k <= n; ++k)
      for (const MultiIndex& a : enumerate_indices(k, n)) {
        const MultiIndex rest = a.complement();
        for (int m = 0; m <= rest.size(); ++m)
          for (const MultiIndex& pick : enumerate_indices(m, rest.size())) {
            std::vector<int> labels;
            for (int i = 0; i < pick.size(); ++i) labels.push_back(rest.label(pick.axis(i)));
            const MultiIndex b(std::span<const int>(labels.data(), labels.size()), n);
            const int swap = (a.size() * b.size()) % 2 == 0 ? 1 : -1;
            if (sigma(a, b).value * sigma(b, a).value != swap) return false;
          }
      }
  return true;
}

bool laplace_expansion() {
  std::mt19937_64 rng(20240901ull);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix A(4, 4);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) A(r, c) = unit(rng);
    for (int k = 1; k <= 4; ++k)
      for (const MultiIndex& cols : enumerate_indices(k, 4))
        for (const MultiIndex& rows : enumerate_indices(k, 4)) {
          const double direct = minor(A, cols, rows);
          for (int i = 0; i < rows.size(); ++i)
            if (std::abs(laplace_minor(A, cols, rows, rows.label(i)) - direct) > 1e-12)
              return false;
        }
  }
  return true;
}

// Wedge of the graph column vectors checked against determinants of their
// coordinate slices: the coefficient of w_1 ^ ... ^ w_n on a sorted tuple S
// is det [w_i(S_j)].
bool graph_orientation() {
  std::mt19937_64 rng(911ull);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int n = 1; n <= 4; ++n)
    for (int N = 1; N <= 3 && n + N <= 6; ++N)
      for (int trial = 0; trial < 10; ++trial) {
        Matrix du(N, n);
        for (int r = 0; r < N; ++r)
          for (int c = 0; c < n; ++c) du(r, c) = unit(rng);

        std::vector<std::vector<double>> w(n, std::vector<double>(n + N, 0.0));
        for (int i = 0; i < n; ++i) {
          w[i][i] = 1.0;
          for (int s = 0; s < N; ++s) w[i][n + s] = du(s, i);
        }

        const KVector m = graph_nvector(du);
        for (const MultiIndex& tuple : enumerate_indices(n, n + N)) {
          Matrix slice(n, n);
          for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) slice(r, c) = w[r][tuple.axis(c)];
          if (std::abs(m.coefficient(tuple) - det(slice)) > 1e-12) return false;
        }
      }
  return true;
}

}  // namespace

std::vector<std::pair<std::string, bool>> selftest_properties() {
  std::vector<std::pair<std::string, bool>> out;
  out.emplace_back("complement-involution", complement_involution());
  out.emplace_back("enumeration-order", enumeration_order());
  out.emplace_back("sigma-parity", sigma_parity());
  out.emplace_back("sigma-antisymmetry", sigma_antisymmetry());
  out.emplace_back("laplace-expansion", laplace_expansion());
  out.emplace_back("graph-orientation", graph_orientation());
  return out;
}

}  // namespace distcurrents
