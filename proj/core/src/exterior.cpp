#include "distcurrents/exterior.hpp"

#include <cmath>
#include <stdexcept>

namespace distcurrents {

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0 || rows > kMaxMatrixDim || cols > kMaxMatrixDim) {
    throw std::invalid_argument("matrix extent outside [0, " + std::to_string(kMaxMatrixDim) +
                                "]");
  }
}

Matrix Matrix::identity(int d) {
  Matrix I(d, d);
  for (int i = 0; i < d; ++i) I(i, i) = 1.0;
  return I;
}

bool Matrix::all_finite() const {
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c)
      if (!std::isfinite((*this)(r, c))) return false;
  return true;
}

namespace {

double det_lu(const Matrix& A) {
  const int d = A.rows();
  std::array<double, kMaxMatrixDim * kMaxMatrixDim> m;
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m[r * d + c] = A(r, c);

  double sign = 1.0;
  for (int k = 0; k < d; ++k) {
    int pivot = k;
    double best = std::fabs(m[k * d + k]);
    for (int r = k + 1; r < d; ++r) {
      double cand = std::fabs(m[r * d + k]);
      if (cand > best) {
        best = cand;
        pivot = r;
      }
    }
    if (best == 0.0) return 0.0;
    if (pivot != k) {
      for (int c = k; c < d; ++c) std::swap(m[k * d + c], m[pivot * d + c]);
      sign = -sign;
    }
    const double inv = 1.0 / m[k * d + k];
    for (int r = k + 1; r < d; ++r) {
      const double f = m[r * d + k] * inv;
      if (f == 0.0) continue;
      for (int c = k + 1; c < d; ++c) m[r * d + c] -= f * m[k * d + c];
    }
  }
  double out = sign;
  for (int k = 0; k < d; ++k) out *= m[k * d + k];
  return out;
}

}  // namespace

double det(const Matrix& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("det requires a square matrix");
  switch (A.rows()) {
    case 0:
      return 1.0;
    case 1:
      return A(0, 0);
    case 2:
      return A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
    case 3:
      return A(0, 0) * (A(1, 1) * A(2, 2) - A(1, 2) * A(2, 1)) -
             A(0, 1) * (A(1, 0) * A(2, 2) - A(1, 2) * A(2, 0)) +
             A(0, 2) * (A(1, 0) * A(2, 1) - A(1, 1) * A(2, 0));
    default:
      return det_lu(A);
  }
}

double minor(const Matrix& A, const MultiIndex& cols, const MultiIndex& rows) {
  const int k = cols.size();
  if (rows.size() != k) {
    throw std::invalid_argument("minor requires equally sized row and column selections, got " +
                                rows.to_string() + " and " + cols.to_string());
  }
  if (k == 0) return 1.0;
  if (cols.ambient() > A.cols() || rows.ambient() > A.rows()) {
    throw std::invalid_argument("minor selection exceeds matrix extent");
  }
  Matrix sub(k, k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) sub(r, c) = A(rows.axis(r), cols.axis(c));
  return det(sub);
}

double adjoint_entry(const Matrix& A, const MultiIndex& cols, const MultiIndex& rows,
                     int row_label, int col_label) {
  if (!rows.contains(row_label)) {
    throw std::invalid_argument("adjoint row label " + std::to_string(row_label) +
                                " not in " + rows.to_string());
  }
  if (!cols.contains(col_label)) {
    throw std::invalid_argument("adjoint column label " + std::to_string(col_label) +
                                " not in " + cols.to_string());
  }
  const MultiIndex rrest = rows.remove(row_label);
  const MultiIndex crest = cols.remove(col_label);
  const Sign sr = sigma(MultiIndex({row_label}, rows.ambient()), rrest);
  const Sign sc = sigma(MultiIndex({col_label}, cols.ambient()), crest);
  return (sr * sc) * minor(A, crest, rrest);
}

double laplace_minor(const Matrix& A, const MultiIndex& cols, const MultiIndex& rows,
                     int row_label) {
  if (!rows.contains(row_label)) {
    throw std::invalid_argument("laplace expansion row " + std::to_string(row_label) +
                                " not in " + rows.to_string());
  }
  double out = 0.0;
  for (int j = 0; j < cols.size(); ++j) {
    const int col_label = cols.label(j);
    out += A(row_label - 1, col_label - 1) * adjoint_entry(A, cols, rows, row_label, col_label);
  }
  return out;
}

KVector::KVector(int ambient, int degree) : ambient_(ambient), degree_(degree) {
  if (degree < 0 || degree > ambient) {
    throw std::invalid_argument("k-vector degree outside [0, ambient]");
  }
}

double KVector::coefficient(const MultiIndex& idx) const {
  auto it = terms_.find(idx);
  return it == terms_.end() ? 0.0 : it->second;
}

void KVector::set(const MultiIndex& idx, double value) {
  if (idx.ambient() != ambient_ || idx.size() != degree_) {
    throw std::invalid_argument("k-vector term " + idx.to_string() +
                                " does not match ambient/degree");
  }
  terms_[idx] = value;
}

void KVector::accumulate(const MultiIndex& idx, double value) {
  if (idx.ambient() != ambient_ || idx.size() != degree_) {
    throw std::invalid_argument("k-vector term " + idx.to_string() +
                                " does not match ambient/degree");
  }
  terms_[idx] += value;
}

double KVector::norm() const {
  double s = 0.0;
  for (const auto& [idx, v] : terms_) s += v * v;
  return std::sqrt(s);
}

double pair(const KVector& omega, const KVector& xi) {
  if (omega.ambient() != xi.ambient() || omega.degree() != xi.degree()) {
    throw std::invalid_argument("pairing requires matching ambient and degree");
  }
  // Iterate the sparser operand.
  const KVector& small = omega.terms().size() <= xi.terms().size() ? omega : xi;
  const KVector& large = omega.terms().size() <= xi.terms().size() ? xi : omega;
  double s = 0.0;
  for (const auto& [idx, v] : small.terms()) s += v * large.coefficient(idx);
  return s;
}

MultiIndex join_xy(const MultiIndex& alpha, const MultiIndex& beta, int n, int N) {
  if (alpha.ambient() != n || beta.ambient() != N) {
    throw std::invalid_argument("join_xy ambient mismatch");
  }
  MultiIndex out = alpha.widen(n + N);
  for (int i = 0; i < beta.size(); ++i) out = out.add(n + beta.label(i));
  return out;
}

KVector graph_nvector(const Matrix& du) {
  const int N = du.rows();
  const int n = du.cols();
  KVector xi(n + N, n);
  const int kmax = n < N ? n : N;
  for (int k = 0; k <= kmax; ++k) {
    for (const MultiIndex& alpha : enumerate_indices(n - k, n)) {
      const MultiIndex abar = alpha.complement();
      const Sign s = sigma(alpha, abar);
      for (const MultiIndex& beta : enumerate_indices(k, N)) {
        const double coeff = s * minor(du, abar, beta);
        if (coeff != 0.0) xi.set(join_xy(alpha, beta, n, N), coeff);
      }
    }
  }
  return xi;
}

}  // namespace distcurrents
