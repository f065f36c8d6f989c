#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "distcurrents/exterior.hpp"
#include "distcurrents/multiindex.hpp"
#include "oracles.hpp"

using distcurrents::KVector;
using distcurrents::Matrix;
using distcurrents::MultiIndex;
using distcurrents::adjoint_entry;
using distcurrents::det;
using distcurrents::enumerate_indices;
using distcurrents::graph_nvector;
using distcurrents::join_xy;
using distcurrents::laplace_minor;
using distcurrents::minor;
using distcurrents::sigma;

namespace {

Matrix sample_2x2() {
  Matrix A(2, 2);
  A(0, 0) = 1;
  A(0, 1) = 2;
  A(1, 0) = 3;
  A(1, 1) = 4;
  return A;
}

}  // namespace

TEST_SUITE("exterior") {

TEST_CASE("determinant matches Leibniz expansion up to 6x6") {
  std::mt19937_64 rng(7);
  for (int d = 0; d <= 6; ++d) {
    for (int rep = 0; rep < 20; ++rep) {
      Matrix A = oracles::random_matrix(d, d, rng);
      const double ref = oracles::leibniz_det(A);
      CHECK(det(A) == doctest::Approx(ref).epsilon(1e-12));
    }
  }
}

TEST_CASE("pinned 2x2 minors") {
  Matrix A = sample_2x2();
  CHECK(minor(A, MultiIndex::full(2), MultiIndex::full(2)) == doctest::Approx(-2.0));
  CHECK(minor(A, MultiIndex({1}, 2), MultiIndex({2}, 2)) == doctest::Approx(3.0));
  CHECK(minor(A, MultiIndex(2), MultiIndex(2)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(minor(A, MultiIndex({1}, 2), MultiIndex::full(2)), std::invalid_argument);
}

TEST_CASE("pinned adjoint entries reproduce the classical 2x2 adjugate") {
  Matrix A = sample_2x2();
  const MultiIndex full = MultiIndex::full(2);
  CHECK(adjoint_entry(A, full, full, 1, 1) == doctest::Approx(4.0));
  CHECK(adjoint_entry(A, full, full, 1, 2) == doctest::Approx(-3.0));
  CHECK(adjoint_entry(A, full, full, 2, 1) == doctest::Approx(-2.0));
  CHECK(adjoint_entry(A, full, full, 2, 2) == doctest::Approx(1.0));
  CHECK_THROWS_AS(adjoint_entry(A, MultiIndex({1}, 2), full, 1, 2), std::invalid_argument);
}

TEST_CASE("adjoint entry of the identity vanishes off-diagonal") {
  Matrix I = Matrix::identity(3);
  const MultiIndex full = MultiIndex::full(3);
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j)
      CHECK(adjoint_entry(I, full, full, i, j) == doctest::Approx(i == j ? 1.0 : 0.0));
}

TEST_CASE("laplace expansion agrees with the minor on 1000 random 4x4 matrices") {
  std::mt19937_64 rng(1234);
  const MultiIndex full = MultiIndex::full(4);
  for (int rep = 0; rep < 1000; ++rep) {
    Matrix A = oracles::random_matrix(4, 4, rng);
    const double ref = minor(A, full, full);
    for (int i = 1; i <= 4; ++i) {
      const double expanded = laplace_minor(A, full, full, i);
      CHECK(std::fabs(expanded - ref) <= 1e-12 * std::max(1.0, std::fabs(ref)));
    }
  }
}

TEST_CASE("laplace expansion agrees on strict submatrices") {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 100; ++rep) {
    Matrix A = oracles::random_matrix(4, 4, rng);
    for (int k = 1; k <= 3; ++k) {
      for (const auto& rows : enumerate_indices(k, 4)) {
        for (const auto& cols : enumerate_indices(k, 4)) {
          const double ref = minor(A, cols, rows);
          for (int i = 0; i < k; ++i) {
            CHECK(laplace_minor(A, cols, rows, rows.label(i)) ==
                  doctest::Approx(ref).epsilon(1e-12));
          }
        }
      }
    }
  }
}

TEST_CASE("swapping two selected rows flips the minor sign") {
  std::mt19937_64 rng(5);
  Matrix A = oracles::random_matrix(4, 4, rng);
  Matrix B = A;
  for (int c = 0; c < 4; ++c) std::swap(B(1, c), B(3, c));
  const MultiIndex rows({2, 4}, 4);
  for (const auto& cols : enumerate_indices(2, 4)) {
    CHECK(minor(B, cols, rows) == doctest::Approx(-minor(A, cols, rows)).epsilon(1e-13));
  }
}

TEST_CASE("kvector stores sparse coefficients") {
  KVector v(4, 2);
  const MultiIndex a({1, 3}, 4);
  CHECK(v.coefficient(a) == 0.0);
  v.set(a, 2.5);
  CHECK(v.coefficient(a) == 2.5);
  v.accumulate(a, 0.5);
  CHECK(v.coefficient(a) == 3.0);
  CHECK(v.norm() == doctest::Approx(3.0));
  CHECK_THROWS_AS(v.set(MultiIndex({1}, 4), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(v.set(MultiIndex({1, 3}, 5), 1.0), std::invalid_argument);
}

TEST_CASE("pairing sums matching coefficients") {
  KVector a(3, 1), b(3, 1);
  a.set(MultiIndex({1}, 3), 2.0);
  a.set(MultiIndex({3}, 3), -1.0);
  b.set(MultiIndex({1}, 3), 0.5);
  b.set(MultiIndex({2}, 3), 10.0);
  CHECK(distcurrents::pair(a, b) == doctest::Approx(1.0));
  KVector c(3, 2);
  CHECK_THROWS_AS(distcurrents::pair(a, c), std::invalid_argument);
}

TEST_CASE("join_xy shifts the target block") {
  CHECK(join_xy(MultiIndex({1}, 2), MultiIndex({2}, 2), 2, 2) == MultiIndex({1, 4}, 4));
  CHECK(join_xy(MultiIndex(2), MultiIndex::full(2), 2, 2) == MultiIndex({3, 4}, 4));
}

TEST_CASE("graph n-vector matches brute-force wedge expansion for n+N <= 6") {
  std::mt19937_64 rng(2024);
  for (int n = 1; n <= 4; ++n) {
    for (int N = 1; N + n <= 6; ++N) {
      for (int rep = 0; rep < 25; ++rep) {
        Matrix du = oracles::random_matrix(N, n, rng);
        const KVector xi = graph_nvector(du);
        const auto brute = oracles::brute_graph_nvector(du);
        // every brute coefficient is reproduced
        for (const auto& [mask, val] : brute) {
          bool found = false;
          for (const auto& [idx, coeff] : xi.terms()) {
            if (oracles::index_mask(idx) == mask) {
              CHECK(coeff == doctest::Approx(val).epsilon(1e-12));
              found = true;
            }
          }
          if (std::fabs(val) > 1e-12) CHECK(found);
        }
        // and no spurious ones appear
        for (const auto& [idx, coeff] : xi.terms()) {
          auto it = brute.find(oracles::index_mask(idx));
          const double val = it == brute.end() ? 0.0 : it->second;
          CHECK(coeff == doctest::Approx(val).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("graph n-vector norm squared equals the sum of squared minors") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 50; ++rep) {
    Matrix du = oracles::random_matrix(2, 2, rng);
    const KVector xi = graph_nvector(du);
    double sq = 0.0;
    for (int k = 0; k <= 2; ++k) {
      for (const auto& alpha : enumerate_indices(2 - k, 2)) {
        for (const auto& beta : enumerate_indices(k, 2)) {
          const double m = minor(du, alpha.complement(), beta);
          sq += m * m;
        }
      }
    }
    CHECK(xi.norm() * xi.norm() == doctest::Approx(sq).epsilon(1e-12));
  }
}

TEST_CASE("graph n-vector of the identity map in the plane") {
  Matrix du = Matrix::identity(2);
  const KVector xi = graph_nvector(du);
  // wedge of (e1 + eps1, e2 + eps2): unit coefficient on the pure x block,
  // the pure y block, and the mixed diagonal blocks.
  CHECK(xi.coefficient(MultiIndex({1, 2}, 4)) == doctest::Approx(1.0));
  CHECK(xi.coefficient(MultiIndex({3, 4}, 4)) == doctest::Approx(1.0));
  CHECK(xi.coefficient(MultiIndex({2, 3}, 4)) == doctest::Approx(-1.0));
  CHECK(xi.coefficient(MultiIndex({1, 4}, 4)) == doctest::Approx(1.0));
  CHECK(xi.norm() == doctest::Approx(2.0));
}

}  // TEST_SUITE
