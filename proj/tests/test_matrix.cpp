#include "doctest.h"

#include <limits>

#include "cyclegzsl/errors.hpp"
#include "cyclegzsl/matrix.hpp"

using cyclegzsl::Matrix;

TEST_CASE("matmul against hand-computed product") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5, 6}, {7, 8}};
  CHECK(cyclegzsl::matmul(a, b) == Matrix{{19, 22}, {43, 50}});
  CHECK_THROWS_AS(cyclegzsl::matmul(a, Matrix(3, 1)), cyclegzsl::DimensionError);
}

TEST_CASE("concatenation, slicing and gathering") {
  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{9}, {8}};
  const Matrix ab = cyclegzsl::hconcat(a, b);
  CHECK(ab == Matrix{{1, 2, 9}, {3, 4, 8}});
  CHECK(ab.slice_cols(2, 1) == b);
  const std::size_t idx[] = {1, 1, 0};
  CHECK(a.gather_rows(idx) == Matrix{{3, 4}, {3, 4}, {1, 2}});
  CHECK(cyclegzsl::vconcat(a, a).rows() == 4);
  CHECK(a.transposed() == Matrix{{1, 3}, {2, 4}});
}

TEST_CASE("finiteness and shape checks") {
  Matrix m(2, 2);
  CHECK(m.all_finite());
  m(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(m.all_finite());
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>(3)), cyclegzsl::DimensionError);
  CHECK_THROWS_AS(cyclegzsl::require_same_shape(Matrix(1, 2), Matrix(2, 1), "add"),
                  cyclegzsl::DimensionError);
}
