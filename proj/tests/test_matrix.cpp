#include <cmath>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "dctlm/matrix.hpp"

using namespace dctlm;

TEST_CASE("matmul basics") {
  Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  Matrix ones = Matrix::from_rows({{1}, {1}});
  Matrix r = matmul(a, ones);
  CHECK(r.rows() == 2);
  CHECK(r.cols() == 1);
  CHECK(r(0, 0) == doctest::Approx(3));
  CHECK(r(1, 0) == doctest::Approx(7));

  Matrix i3 = Matrix::identity(3);
  Matrix b = Matrix::from_rows({{1, -2, 0.5}, {0, 4, -1}, {2, 2, 2}});
  CHECK(max_abs_diff(matmul(i3, b), b) == 0);
  CHECK(max_abs_diff(matmul(b, i3), b) == 0);
}

TEST_CASE("matmul transpose variants agree with explicit transpose") {
  Matrix a = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});          // 2x3
  Matrix b = Matrix::from_rows({{1, 0}, {2, 1}, {0, -1}});       // 3x2
  CHECK(max_abs_diff(matmul_nt(a, transpose(b)), matmul(a, b)) < 1e-14);
  CHECK(max_abs_diff(matmul_tn(transpose(a), b), matmul(a, b)) < 1e-14);
}

TEST_CASE("shape mismatches throw with both shapes in the message") {
  Matrix a(2, 3), b(2, 3);
  CHECK_THROWS_AS((void)matmul(a, b), std::invalid_argument);
  try {
    (void)matmul(a, b);
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
  CHECK_THROWS_AS((void)add(Matrix(2, 2), Matrix(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS((void)hadamard(Matrix(1, 2), Matrix(2, 1)), std::invalid_argument);
}

TEST_CASE("elementwise helpers") {
  Matrix a = Matrix::from_rows({{1, -2}, {3, 0}});
  Matrix b = Matrix::from_rows({{2, 2}, {-1, 5}});
  Matrix s = add(a, b);
  CHECK(s(0, 0) == 3);
  CHECK(s(1, 0) == 2);
  Matrix d = subtract(a, b);
  CHECK(d(0, 1) == -4);
  Matrix h = hadamard(a, b);
  CHECK(h(0, 0) == 2);
  CHECK(h(1, 1) == 0);
  CHECK(a.max_abs() == 3);
  CHECK(a.sum() == doctest::Approx(2));
  CHECK(a.frobenius_norm() == doctest::Approx(std::sqrt(1.0 + 4 + 9)));
}

TEST_CASE("all_finite flags inf and nan") {
  Matrix a(2, 2);
  CHECK(a.all_finite());
  a(1, 1) = std::numeric_limits<real_t>::infinity();
  CHECK_FALSE(a.all_finite());
  a(1, 1) = std::numeric_limits<real_t>::quiet_NaN();
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("transpose round-trip") {
  Matrix a = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(max_abs_diff(transpose(transpose(a)), a) == 0);
  CHECK(transpose(a).rows() == 3);
}
