#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace cyclegzsl {

/// Dense row-major matrix of doubles. Vectors are 1×n rows; batches stack
/// samples as rows.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  /// Nested-list literal, one inner list per row.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }
  static Matrix ones(std::size_t rows, std::size_t cols) { return Matrix(rows, cols, 1.0); }
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool same_shape(const Matrix &other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Matrix transposed() const;
  /// Copy of the listed rows, in order (duplicates allowed).
  Matrix gather_rows(std::span<const std::size_t> indices) const;
  Matrix slice_cols(std::size_t begin, std::size_t count) const;

  bool all_finite() const noexcept;
  double sum() const noexcept;
  double max_abs() const noexcept;

  friend bool operator==(const Matrix &, const Matrix &) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Throws DimensionError mentioning `op` unless a and b have identical shape.
void require_same_shape(const Matrix &a, const Matrix &b, std::string_view op);

Matrix matmul(const Matrix &a, const Matrix &b);
Matrix hconcat(const Matrix &left, const Matrix &right);
Matrix vconcat(const Matrix &top, const Matrix &bottom);

} // namespace cyclegzsl
