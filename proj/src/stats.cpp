#include "attrsel/stats.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "attrsel/error.hpp"
#include "attrsel/rng.hpp"

namespace attrsel {
namespace {

using EigenRowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kMaxRidgeRetries = 3;

std::optional<Matrix> cholesky(const Matrix& cov, double ridge) {
  const auto d = static_cast<Eigen::Index>(cov.rows());
  EigenRowMatrix a = Eigen::Map<const EigenRowMatrix>(cov.data().data(), d, d);
  a.diagonal().array() += ridge;
  Eigen::LLT<EigenRowMatrix> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  EigenRowMatrix l = llt.matrixL();
  for (Eigen::Index i = 0; i < d; ++i)
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) return std::nullopt;
  Matrix out(cov.rows(), cov.cols());
  Eigen::Map<EigenRowMatrix>(out.data().data(), d, d) = l;
  return out;
}

// Solves L y = x - mu.
Vector whiten(const GaussianSummary& g, std::span<const double> x) {
  require(x.size() == g.dim(), ErrorCode::DimMismatch,
          "x has " + std::to_string(x.size()) + " dims, summary has " + std::to_string(g.dim()));
  const std::size_t d = g.dim();
  Vector y(d);
  for (std::size_t i = 0; i < d; ++i) {
    double s = x[i] - g.mu[i];
    for (std::size_t k = 0; k < i; ++k) s -= g.chol(i, k) * y[k];
    y[i] = s / g.chol(i, i);
  }
  return y;
}

}  // namespace

GaussianSummary fit_gaussian(const Matrix& rows, double ridge_scale) {
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  require(n >= 2, ErrorCode::TooFewRows, "need at least 2 rows, got " + std::to_string(n));
  require(ridge_scale >= 0.0, ErrorCode::InvalidArgument, "ridge_scale must be >= 0");

  Vector mu(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mu[c] += rows(r, c);
  for (double& m : mu) m /= static_cast<double>(n);

  Matrix cov(d, d);
  Vector centered(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) centered[c] = rows(r, c) - mu[c];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j <= i; ++j) cov(i, j) += centered[i] * centered[j];
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      cov(i, j) /= static_cast<double>(n);
      cov(j, i) = cov(i, j);
    }

  double trace = 0.0;
  for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);
  // A zero-spread pool has no scale to borrow; fall back to unit variance.
  const double scale = trace > 0.0 ? trace / static_cast<double>(d) : 1.0;
  double ridge = ridge_scale * scale;

  for (int attempt = 0; attempt <= kMaxRidgeRetries; ++attempt) {
    if (auto chol = cholesky(cov, ridge)) {
      return GaussianSummary{std::move(mu), std::move(cov), std::move(*chol), ridge};
    }
    ridge = ridge > 0.0 ? ridge * 10.0 : 1e-10 * scale;
  }
  fail(ErrorCode::FactorizationFailed, "covariance not positive definite after ridge retries");
}

GaussianSummary gaussian_from_moments(Vector mu, Matrix cov, double ridge) {
  require(cov.rows() == mu.size() && cov.cols() == mu.size(), ErrorCode::DimMismatch,
          "covariance shape does not match mean");
  auto chol = cholesky(cov, ridge);
  require(chol.has_value(), ErrorCode::FactorizationFailed, "covariance not positive definite");
  return GaussianSummary{std::move(mu), std::move(cov), std::move(*chol), ridge};
}

double mahalanobis(const GaussianSummary& g, std::span<const double> x) {
  const Vector y = whiten(g, x);
  return std::sqrt(dot(y, y));
}

Vector mahalanobis_grad(const GaussianSummary& g, std::span<const double> x) {
  Vector y = whiten(g, x);
  const double dist = std::sqrt(dot(y, y));
  // Back-substitute L^T z = y, giving z = S^{-1}(x - mu).
  const std::size_t d = g.dim();
  for (std::size_t ii = d; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < d; ++k) s -= g.chol(k, ii) * y[k];
    y[ii] = s / g.chol(ii, ii);
  }
  const double denom = std::max(dist, 1e-12);
  for (double& v : y) v /= denom;
  return y;
}

Vector sample_gaussian(const GaussianSummary& g, Rng& rng) {
  const std::size_t d = g.dim();
  Vector z(d);
  for (double& v : z) v = rng.normal();
  Vector x = g.mu;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k <= i; ++k) x[i] += g.chol(i, k) * z[k];
  return x;
}

}  // namespace attrsel
