#pragma once

#include <cstddef>
#include <vector>

namespace tasktree {

// Dense row-major matrix of 64-bit reals.  Row-major layout matches the
// checkpoint wire format and numpy's default, so blobs can be memcpy'd.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  static Matrix zeros(int r, int c) { return Matrix(r, c); }
  static Matrix identity(int n);
  static Matrix from_rows(int r, int c, const double* data);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  double* row(int r) { return a.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return a.data() + static_cast<size_t>(r) * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  size_t size() const { return a.size(); }
};

// Dense kernels.  Matrix products and factorizations go through Eigen; the
// rest are straightforward loops.
Matrix matmul(const Matrix& A, const Matrix& B);     // A * B
Matrix matmul_nt(const Matrix& A, const Matrix& B);  // A * B^T
Matrix matmul_tn(const Matrix& A, const Matrix& B);  // A^T * B
Matrix transpose(const Matrix& A);

Matrix add(const Matrix& A, const Matrix& B);
Matrix sub(const Matrix& A, const Matrix& B);
Matrix scale(const Matrix& A, double s);
Matrix hadamard(const Matrix& A, const Matrix& B);
void add_inplace(Matrix& A, const Matrix& B);
void axpy_inplace(Matrix& A, double s, const Matrix& B);  // A += s*B

Matrix relu(const Matrix& A);
Matrix relu_mask(const Matrix& A);  // 1 where A > 0, else 0 (derivative at 0 is 0)

double row_norm(const Matrix& A, int r);
double frob_norm(const Matrix& A);
double dot_all(const Matrix& A, const Matrix& B);  // sum of elementwise products
bool all_finite(const Matrix& A);

// Row-wise rho(z) = z / (||z|| + kNormEps); zero rows map to zero rows.
inline constexpr double kNormEps = 1e-12;
Matrix row_normalize_eps(const Matrix& A);

struct SvdResult {
  Matrix u;                   // rows x k
  std::vector<double> sigma;  // k, descending
  Matrix v;                   // cols x k
};
SvdResult svd_thin(const Matrix& A);
double spectral_norm(const Matrix& A);

// Ridge least squares: argmin_W ||A W - B||_F^2 + ridge ||W||_F^2, solved via
// the normal equations (A^T A + ridge I) W = A^T B with an LDLT factorization.
Matrix ridge_least_squares(const Matrix& A, const Matrix& B, double ridge);

}  // namespace tasktree
