#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace attrsel {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles. Disk payloads are float32; all compute
// happens in double.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Reductions run strictly left to right so results are reproducible bit for bit.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

// Cosine similarity clamped to [-1, 1]. Throws DimMismatch / ZeroVector.
double cosine(std::span<const double> u, std::span<const double> v);

// Throws ZeroRow(i) when a row norm falls below 1e-30.
Matrix l2_normalize_rows(const Matrix& m);
Vector l2_normalize(std::span<const double> v);

// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& m);

// a * b^T
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

Matrix select_rows(const Matrix& m, std::span<const std::size_t> indices);
Matrix select_cols(const Matrix& m, std::span<const std::size_t> indices);

bool all_finite(std::span<const double> values);
inline bool all_finite(const Matrix& m) { return all_finite(m.data()); }

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace attrsel
