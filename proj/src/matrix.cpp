#include "tasktree/matrix.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <cstring>

#include "tasktree/common.hpp"

namespace tasktree {

namespace {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;
using MutMap = Eigen::Map<EigenRowMajor>;

ConstMap as_eigen(const Matrix& m) { return ConstMap(m.a.data(), m.rows, m.cols); }

}  // namespace

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(int r, int c, const double* data) {
  Matrix m(r, c);
  std::memcpy(m.a.data(), data, sizeof(double) * m.size());
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int r = 0; r < m.rows; ++r) {
    if (rows[r].size() != rows.front().size())
      throw ValidationError("dimension error: ragged rows in from_rows");
    for (int c = 0; c < m.cols; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

Matrix matmul(const Matrix& A, const Matrix& B) {
  if (A.cols != B.rows) throw ValidationError("dimension error: matmul shape mismatch");
  Matrix C(A.rows, B.cols);
  MutMap(C.a.data(), C.rows, C.cols) = as_eigen(A) * as_eigen(B);
  return C;
}

Matrix matmul_nt(const Matrix& A, const Matrix& B) {
  if (A.cols != B.cols) throw ValidationError("dimension error: matmul_nt shape mismatch");
  Matrix C(A.rows, B.rows);
  MutMap(C.a.data(), C.rows, C.cols) = as_eigen(A) * as_eigen(B).transpose();
  return C;
}

Matrix matmul_tn(const Matrix& A, const Matrix& B) {
  if (A.rows != B.rows) throw ValidationError("dimension error: matmul_tn shape mismatch");
  Matrix C(A.cols, B.cols);
  MutMap(C.a.data(), C.rows, C.cols) = as_eigen(A).transpose() * as_eigen(B);
  return C;
}

Matrix transpose(const Matrix& A) {
  Matrix C(A.cols, A.rows);
  for (int r = 0; r < A.rows; ++r)
    for (int c = 0; c < A.cols; ++c) C(c, r) = A(r, c);
  return C;
}

Matrix add(const Matrix& A, const Matrix& B) {
  if (!A.same_shape(B)) throw ValidationError("dimension error: add shape mismatch");
  Matrix C = A;
  for (size_t i = 0; i < C.size(); ++i) C.a[i] += B.a[i];
  return C;
}

Matrix sub(const Matrix& A, const Matrix& B) {
  if (!A.same_shape(B)) throw ValidationError("dimension error: sub shape mismatch");
  Matrix C = A;
  for (size_t i = 0; i < C.size(); ++i) C.a[i] -= B.a[i];
  return C;
}

Matrix scale(const Matrix& A, double s) {
  Matrix C = A;
  for (double& v : C.a) v *= s;
  return C;
}

Matrix hadamard(const Matrix& A, const Matrix& B) {
  if (!A.same_shape(B)) throw ValidationError("dimension error: hadamard shape mismatch");
  Matrix C = A;
  for (size_t i = 0; i < C.size(); ++i) C.a[i] *= B.a[i];
  return C;
}

void add_inplace(Matrix& A, const Matrix& B) {
  if (!A.same_shape(B)) throw ValidationError("dimension error: add_inplace shape mismatch");
  for (size_t i = 0; i < A.size(); ++i) A.a[i] += B.a[i];
}

void axpy_inplace(Matrix& A, double s, const Matrix& B) {
  if (!A.same_shape(B)) throw ValidationError("dimension error: axpy shape mismatch");
  for (size_t i = 0; i < A.size(); ++i) A.a[i] += s * B.a[i];
}

Matrix relu(const Matrix& A) {
  Matrix C = A;
  for (double& v : C.a)
    if (v < 0.0) v = 0.0;
  return C;
}

Matrix relu_mask(const Matrix& A) {
  Matrix C(A.rows, A.cols);
  for (size_t i = 0; i < A.size(); ++i) C.a[i] = A.a[i] > 0.0 ? 1.0 : 0.0;
  return C;
}

double row_norm(const Matrix& A, int r) {
  double s = 0.0;
  const double* p = A.row(r);
  for (int c = 0; c < A.cols; ++c) s += p[c] * p[c];
  return std::sqrt(s);
}

double frob_norm(const Matrix& A) {
  double s = 0.0;
  for (double v : A.a) s += v * v;
  return std::sqrt(s);
}

double dot_all(const Matrix& A, const Matrix& B) {
  if (!A.same_shape(B)) throw ValidationError("dimension error: dot_all shape mismatch");
  double s = 0.0;
  for (size_t i = 0; i < A.size(); ++i) s += A.a[i] * B.a[i];
  return s;
}

bool all_finite(const Matrix& A) {
  for (double v : A.a)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix row_normalize_eps(const Matrix& A) {
  Matrix C = A;
  for (int r = 0; r < A.rows; ++r) {
    double s = 1.0 / (row_norm(A, r) + kNormEps);
    double* p = C.row(r);
    for (int c = 0; c < A.cols; ++c) p[c] *= s;
  }
  return C;
}

SvdResult svd_thin(const Matrix& A) {
  Eigen::JacobiSVD<EigenRowMajor> svd(as_eigen(A),
                                      Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& U = svd.matrixU();
  const auto& V = svd.matrixV();
  const auto& S = svd.singularValues();
  SvdResult out;
  out.u = Matrix(static_cast<int>(U.rows()), static_cast<int>(U.cols()));
  out.v = Matrix(static_cast<int>(V.rows()), static_cast<int>(V.cols()));
  out.sigma.assign(S.data(), S.data() + S.size());
  for (int r = 0; r < out.u.rows; ++r)
    for (int c = 0; c < out.u.cols; ++c) out.u(r, c) = U(r, c);
  for (int r = 0; r < out.v.rows; ++r)
    for (int c = 0; c < out.v.cols; ++c) out.v(r, c) = V(r, c);
  return out;
}

double spectral_norm(const Matrix& A) {
  if (A.rows == 0 || A.cols == 0) return 0.0;
  Eigen::JacobiSVD<EigenRowMajor> svd(as_eigen(A));
  return svd.singularValues()(0);
}

Matrix ridge_least_squares(const Matrix& A, const Matrix& B, double ridge) {
  if (A.rows != B.rows)
    throw ValidationError("dimension error: ridge_least_squares row mismatch");
  if (ridge < 0.0) throw ValidationError("ridge_least_squares: negative ridge");
  EigenRowMajor gram = as_eigen(A).transpose() * as_eigen(A);
  for (int i = 0; i < A.cols; ++i) gram(i, i) += ridge;
  EigenRowMajor rhs = as_eigen(A).transpose() * as_eigen(B);
  EigenRowMajor w = gram.ldlt().solve(rhs);
  Matrix out(A.cols, B.cols);
  MutMap(out.a.data(), out.rows, out.cols) = w;
  return out;
}

}  // namespace tasktree
