#pragma once

#include <array>
#include <map>

#include "distcurrents/multiindex.hpp"

namespace distcurrents {

/// Hard cap on matrix extent: target dimensions stay at or below 3 and source
/// dimensions at or below 4 in the quadrature paths, while self-tests exercise
/// square matrices up to 6x6.
inline constexpr int kMaxMatrixDim = 6;

/// Dense row-major matrix with inline storage. Rows index the target space,
/// columns the source space, matching Jacobians of maps u: R^cols -> R^rows.
class Matrix {
 public:
  Matrix(int rows, int cols);
  static Matrix identity(int d);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  double& operator()(int r, int c) { return a_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return a_[static_cast<std::size_t>(r) * cols_ + c]; }

  bool all_finite() const;

 private:
  int rows_, cols_;
  std::array<double, kMaxMatrixDim * kMaxMatrixDim> a_{};
};

/// Determinant of a square matrix: direct expansion up to 3x3, partially
/// pivoted LU beyond. Deterministic pivot choice (largest magnitude, lowest
/// row on ties).
double det(const Matrix& A);

/// Minor with rows selected by `rows` and columns by `cols`. The selections
/// must have equal size; the empty selection yields 1.
double minor(const Matrix& A, const MultiIndex& cols, const MultiIndex& rows);

/// Entry of the adjoint of the (cols, rows) submatrix:
///   sigma(row_label, rows - row_label) * sigma(col_label, cols - col_label)
///     * minor(A, cols - col_label, rows - row_label).
/// row_label must lie in rows, col_label in cols.
double adjoint_entry(const Matrix& A, const MultiIndex& cols, const MultiIndex& rows,
                     int row_label, int col_label);

/// Expansion of minor(A, cols, rows) along the row `row_label` in rows:
///   sum over j in cols of A(row_label, j) * adjoint_entry(..., row_label, j).
/// Agrees with minor() for every admissible expansion row.
double laplace_minor(const Matrix& A, const MultiIndex& cols, const MultiIndex& rows,
                     int row_label);

/// Sparse k-vector (or k-covector): coefficients on the basis indexed by
/// MultiIndex in a fixed ambient dimension. Absent keys read as 0.
class KVector {
 public:
  KVector(int ambient, int degree);

  int ambient() const noexcept { return ambient_; }
  int degree() const noexcept { return degree_; }

  double coefficient(const MultiIndex& idx) const;
  void set(const MultiIndex& idx, double value);
  void accumulate(const MultiIndex& idx, double value);

  const std::map<MultiIndex, double>& terms() const noexcept { return terms_; }

  /// Euclidean norm of the coefficient vector.
  double norm() const;

 private:
  int ambient_, degree_;
  std::map<MultiIndex, double> terms_;
};

/// Duality pairing: sum of products of matching coefficients. Degrees and
/// ambient dimensions must agree.
double pair(const KVector& omega, const KVector& xi);

/// Combines an x-index (ambient n) and a y-index (ambient N) into a single
/// index in ambient n + N; y labels are shifted past the x block, so the
/// concatenation is already sorted and carries no extra sign.
MultiIndex join_xy(const MultiIndex& alpha, const MultiIndex& beta, int n, int N);

/// n-vector orienting the graph of a map with Jacobian du (N rows, n cols):
/// the wedge over i of (e_i + sum_s du(s,i) eps_s). Its coefficient on the
/// (alpha, beta) block is sigma(alpha, complement(alpha)) times the minor of
/// du with columns complement(alpha) and rows beta.
KVector graph_nvector(const Matrix& du);

}  // namespace distcurrents
