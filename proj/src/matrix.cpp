#include "dctlm/matrix.hpp"

#include <cblas.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dctlm {

namespace {

[[noreturn]] void shape_error(const char* what, const Matrix& a, const Matrix& b) {
  std::ostringstream os;
  os << what << ": lhs is " << a.rows() << "x" << a.cols() << ", rhs is " << b.rows() << "x"
     << b.cols();
  throw std::invalid_argument(os.str());
}

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, const Matrix& a,
          const Matrix& b, Matrix& out) {
  const int lda = a.cols();
  const int ldb = b.cols();
  const int ldc = out.cols();
  if (m == 0 || n == 0) return;
#ifdef DCTLM_FLOAT32
  cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, 1.0f, a.data(), lda, b.data(), ldb, 0.0f,
              out.data(), ldc);
#else
  cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, 1.0, a.data(), lda, b.data(), ldb, 0.0,
              out.data(), ldc);
#endif
}

}  // namespace

Matrix Matrix::full(int rows, int cols, real_t value) {
  Matrix m(rows, cols);
  m.fill(value);
  return m;
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1;
  return m;
}

Matrix Matrix::scalar(real_t value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<real_t>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  Matrix m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c)
      throw std::invalid_argument("from_rows: ragged initializer");
    int j = 0;
    for (real_t v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

real_t Matrix::max_abs() const {
  real_t best = 0;
  for (real_t v : data_) best = std::max(best, std::abs(v));
  return best;
}

real_t Matrix::frobenius_norm() const {
  double acc = 0;
  for (real_t v : data_) acc += static_cast<double>(v) * v;
  return static_cast<real_t>(std::sqrt(acc));
}

real_t Matrix::sum() const {
  double acc = 0;
  for (real_t v : data_) acc += v;
  return static_cast<real_t>(acc);
}

bool Matrix::all_finite() const {
  for (real_t v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Matrix::fill(real_t value) {
  for (real_t& v : data_) v = value;
}

void Matrix::add_inplace(const Matrix& other) {
  if (!same_shape(other)) shape_error("add_inplace shape mismatch", *this, other);
  for (size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void Matrix::scale_inplace(real_t k) {
  for (real_t& v : data_) v *= k;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_error("matmul inner-dimension mismatch", a, b);
  Matrix out(a.rows(), b.cols());
  gemm(CblasNoTrans, CblasNoTrans, a.rows(), b.cols(), a.cols(), a, b, out);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_error("matmul_nt inner-dimension mismatch", a, b);
  Matrix out(a.rows(), b.rows());
  gemm(CblasNoTrans, CblasTrans, a.rows(), b.rows(), a.cols(), a, b, out);
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_error("matmul_tn inner-dimension mismatch", a, b);
  Matrix out(a.cols(), b.cols());
  gemm(CblasTrans, CblasNoTrans, a.cols(), b.cols(), a.rows(), a, b, out);
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("hadamard shape mismatch", a, b);
  Matrix out(a.rows(), a.cols());
  for (size_t i = 0; i < a.size(); ++i) out.flat()[i] = a.flat()[i] * b.flat()[i];
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("add shape mismatch", a, b);
  Matrix out = a;
  out.add_inplace(b);
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("subtract shape mismatch", a, b);
  Matrix out(a.rows(), a.cols());
  for (size_t i = 0; i < a.size(); ++i) out.flat()[i] = a.flat()[i] - b.flat()[i];
  return out;
}

real_t max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) shape_error("max_abs_diff shape mismatch", a, b);
  real_t best = 0;
  for (size_t i = 0; i < a.size(); ++i)
    best = std::max(best, std::abs(a.flat()[i] - b.flat()[i]));
  return best;
}

}  // namespace dctlm
