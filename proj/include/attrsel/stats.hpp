#pragma once

#include <span>

#include "attrsel/tensor.hpp"

namespace attrsel {

// Gaussian summary of a set of embeddings, used as the target distribution of
// the Mahalanobis regularizer.
struct GaussianSummary {
  Vector mu;
  Matrix cov;   // maximum-likelihood covariance (divides by N), without ridge
  Matrix chol;  // lower Cholesky factor of cov + ridge * I
  double ridge = 0.0;

  std::size_t dim() const noexcept { return mu.size(); }
};

// ridge = ridge_scale * trace(cov) / D. A singular factorization is retried
// with 10x the ridge, at most 3 times, before FactorizationFailed.
GaussianSummary fit_gaussian(const Matrix& rows, double ridge_scale = 1e-4);

// Builds a summary from given moments (cov is factorized as cov + ridge * I).
GaussianSummary gaussian_from_moments(Vector mu, Matrix cov, double ridge = 0.0);

// sqrt((x - mu)^T (S + ridge I)^{-1} (x - mu)), via triangular solves.
double mahalanobis(const GaussianSummary& g, std::span<const double> x);

// (S + ridge I)^{-1}(x - mu) / max(mahalanobis, 1e-12).
Vector mahalanobis_grad(const GaussianSummary& g, std::span<const double> x);

// Draws x = mu + L z with z standard normal.
class Rng;
Vector sample_gaussian(const GaussianSummary& g, Rng& rng);

}  // namespace attrsel
