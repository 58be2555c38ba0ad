#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dctlm {

#ifdef DCTLM_FLOAT32
using real_t = float;
#else
using real_t = double;
#endif

/// Dense row-major matrix. Row and column vectors are 1xN / Nx1 matrices;
/// scalars are 1x1. All shape violations throw std::invalid_argument with
/// both shapes in the message.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, real_t{0}) {
    assert(rows >= 0 && cols >= 0);
  }

  static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
  static Matrix full(int rows, int cols, real_t value);
  static Matrix identity(int n);
  static Matrix scalar(real_t value);
  static Matrix from_rows(std::initializer_list<std::initializer_list<real_t>> rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  real_t& operator()(int r, int c) {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<size_t>(r) * cols_ + c];
  }
  real_t operator()(int r, int c) const {
    assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
    return data_[static_cast<size_t>(r) * cols_ + c];
  }

  real_t* data() { return data_.data(); }
  const real_t* data() const { return data_.data(); }
  std::span<real_t> flat() { return data_; }
  std::span<const real_t> flat() const { return data_; }

  real_t* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
  const real_t* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

  real_t max_abs() const;
  real_t frobenius_norm() const;
  real_t sum() const;
  bool all_finite() const;

  void fill(real_t value);
  void add_inplace(const Matrix& other);        // this += other
  void scale_inplace(real_t k);

  bool operator==(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<real_t> data_;
};

// GEMM wrappers (BLAS-backed). Throw on inner-dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b

Matrix transpose(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);

real_t max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace dctlm
