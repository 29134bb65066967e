#include "attrsel/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "attrsel/error.hpp"

namespace attrsel {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, ErrorCode::ShapeMismatch,
          "matrix data length " + std::to_string(data_.size()) + " != " +
              std::to_string(rows_) + "x" + std::to_string(cols_));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    require(r.size() == cols_, ErrorCode::ShapeMismatch, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorCode::DimMismatch,
          std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), ErrorCode::DimMismatch,
          std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  const double nu = norm(u);
  const double nv = norm(v);
  require(nu >= 1e-30 && nv >= 1e-30, ErrorCode::ZeroVector, "cosine of a zero vector");
  double c = dot(u, v) / (nu * nv);
  return std::clamp(c, -1.0, 1.0);
}

Vector l2_normalize(std::span<const double> v) {
  const double n = norm(v);
  require(n >= 1e-30, ErrorCode::ZeroVector, "cannot normalize a zero vector");
  Vector out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

Matrix l2_normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = out.row(r);
    const double n = norm(row);
    require(n >= 1e-30, ErrorCode::ZeroRow, "row " + std::to_string(r));
    for (double& x : row) x /= n;
  }
  return out;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto in = m.row(r);
    auto o = out.row(r);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    for (double& x : o) x /= sum;
  }
  return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), ErrorCode::DimMismatch,
          "inner dims " + std::to_string(a.cols()) + " vs " + std::to_string(b.cols()));
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ar = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) out(i, j) = dot(ar, b.row(j));
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < m.rows(), ErrorCode::BadIndex, "row " + std::to_string(indices[i]));
    std::copy_n(m.row(indices[i]).begin(), m.cols(), out.row(i).begin());
  }
  return out;
}

Matrix select_cols(const Matrix& m, std::span<const std::size_t> indices) {
  for (std::size_t idx : indices)
    require(idx < m.cols(), ErrorCode::BadIndex, "column " + std::to_string(idx));
  Matrix out(m.rows(), indices.size());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t j = 0; j < indices.size(); ++j) out(r, j) = m(r, indices[j]);
  return out;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

}  // namespace attrsel
