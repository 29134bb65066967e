#include "attrsel/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "attrsel/error.hpp"
#include "attrsel/projection.hpp"
#include "attrsel/rng.hpp"

namespace attrsel {
namespace {

constexpr double kKmeansTol = 1e-6;
constexpr int kKmeansMaxIter = 100;
constexpr double kPowerTol = 1e-10;
constexpr int kPowerMaxIter = 5000;

void check_k(std::size_t k, std::size_t limit, const std::string& what) {
  require(k >= 1, ErrorCode::BadK, "k must be >= 1");
  require(k <= limit, ErrorCode::KTooLarge, "k=" + std::to_string(k) + " > " + what + "=" + std::to_string(limit));
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// For each target in order, the best-scoring unclaimed row.
std::vector<std::size_t> claim_rows(const Matrix& score, bool higher_is_better) {
  const std::size_t n = score.cols();
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < score.rows(); ++t) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best == n || (higher_is_better ? score(t, i) > score(t, best) : score(t, i) < score(t, best))) best = i;
    }
    taken[best] = true;
    out.push_back(best);
  }
  return out;
}

}  // namespace

SelectionResult select_uniform(const AttributePool& pool, std::size_t k, std::uint64_t seed) {
  check_k(k, pool.size(), "pool size");
  Rng rng(seed);
  auto picks = rng.sample_without_replacement(pool.size(), k);
  std::sort(picks.begin(), picks.end());
  return make_selection("uniform", std::move(picks), pool, seed, {{"k", k}, {"seed", seed}});
}

SelectionResult select_kmeans(const AttributePool& pool, std::size_t k, std::uint64_t seed) {
  check_k(k, pool.size(), "pool size");
  const Matrix x = l2_normalize_rows(pool.embeddings);
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  Rng rng(seed);

  // k-means++ seeding.
  std::vector<std::size_t> seeds{rng.below(n)};
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(n, false);
  chosen[seeds[0]] = true;
  while (seeds.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(x.row(i), x.row(seeds.back())));
      if (!chosen[i]) total += nearest[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || nearest[i] <= 0.0) continue;
        pick = i;
        r -= nearest[i];
        if (r < 0.0) break;
      }
    }
    if (pick == n) {
      // Remaining points coincide with centers; take an unchosen one uniformly.
      std::vector<std::size_t> rest;
      for (std::size_t i = 0; i < n; ++i)
        if (!chosen[i]) rest.push_back(i);
      pick = rest[rng.below(rest.size())];
    }
    chosen[pick] = true;
    seeds.push_back(pick);
  }

  Matrix centroids = select_rows(x, seeds);
  std::vector<std::size_t> assign(n, 0);
  int iterations = 0;
  for (; iterations < kKmeansMaxIter; ++iterations) {
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = squared_distance(x.row(i), centroids.row(c));
        if (dist < best) {
          best = dist;
          assign[i] = c;
        }
      }
    }
    Matrix next(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      auto dst = next.row(assign[i]);
      auto src = x.row(i);
      for (std::size_t t = 0; t < d; ++t) dst[t] += src[t];
    }
    double max_move = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      auto dst = next.row(c);
      if (counts[c] == 0) {
        std::copy_n(centroids.row(c).begin(), d, dst.begin());  // empty cluster keeps its centroid
      } else {
        for (double& v : dst) v /= static_cast<double>(counts[c]);
      }
      max_move = std::max(max_move, std::sqrt(squared_distance(dst, centroids.row(c))));
    }
    centroids = std::move(next);
    if (max_move < kKmeansTol) {
      ++iterations;
      break;
    }
  }

  Matrix dist(k, n);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < n; ++i) dist(c, i) = squared_distance(centroids.row(c), x.row(i));
  auto picks = claim_rows(dist, false);
  auto sel = make_selection("kmeans", std::move(picks), pool, seed, {{"k", k}, {"seed", seed}});
  sel.metrics = {{"lloyd_iterations", iterations}};
  return sel;
}

SelectionResult select_svd(const AttributePool& pool, std::size_t k) {
  check_k(k, std::min(pool.size(), pool.dim()), "min(N, D)");
  const Matrix& t = pool.embeddings;
  const std::size_t d = t.cols();

  // Gram matrix T^T T (D x D).
  Matrix gram(d, d);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    auto row = t.row(r);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b <= a; ++b) gram(a, b) += row[a] * row[b];
  }
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < a; ++b) gram(b, a) = gram(a, b);

  Rng rng(0x5eed5eedULL);
  Matrix vectors(k, d);
  std::vector<double> values;
  Vector v(d), w(d);
  for (std::size_t c = 0; c < k; ++c) {
    for (double& x : v) x = rng.normal();
    // Start orthogonal to the vectors already found.
    for (std::size_t p = 0; p < c; ++p) {
      const double proj = dot(v, vectors.row(p));
      for (std::size_t t2 = 0; t2 < d; ++t2) v[t2] -= proj * vectors(p, t2);
    }
    v = l2_normalize(v);
    double lambda = 0.0;
    for (int it = 0; it < kPowerMaxIter; ++it) {
      for (std::size_t a = 0; a < d; ++a) w[a] = dot(gram.row(a), v);
      // Deflation: remove found components.
      for (std::size_t p = 0; p < c; ++p) {
        const double proj = dot(w, vectors.row(p));
        for (std::size_t t2 = 0; t2 < d; ++t2) w[t2] -= proj * vectors(p, t2);
      }
      const double wn = norm(w);
      if (wn < 1e-300) break;  // null space: keep the current orthogonal direction
      lambda = wn;
      double delta = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        const double next = w[a] / wn;
        delta = std::max(delta, std::abs(next - v[a]));
        v[a] = next;
      }
      if (delta < kPowerTol) break;
    }
    std::copy(v.begin(), v.end(), vectors.row(c).begin());
    values.push_back(lambda);
  }

  Matrix abs_cos(k, pool.size());
  const Matrix tn = l2_normalize_rows(t);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < pool.size(); ++i) abs_cos(c, i) = std::abs(dot(vectors.row(c), tn.row(i)));
  auto picks = claim_rows(abs_cos, true);
  auto sel = make_selection("svd", std::move(picks), pool, 0, {{"k", k}});
  nlohmann::json sv = nlohmann::json::array();
  for (double l : values) sv.push_back(std::sqrt(std::max(l, 0.0)));
  sel.metrics = {{"singular_values", sv}};
  return sel;
}

SelectionResult select_similarity(const ImageSet& images, const AttributePool& pool, std::size_t k) {
  check_k(k, pool.size(), "pool size");
  const ScoreMatrix s = semantic_project(images, pool);
  Vector mean(pool.size(), 0.0);
  for (std::size_t i = 0; i < s.image_count(); ++i)
    for (std::size_t j = 0; j < pool.size(); ++j) mean[j] += s.scores(i, j);
  for (double& m : mean) m /= static_cast<double>(std::max<std::size_t>(s.image_count(), 1));
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return mean[a] > mean[b]; });
  order.resize(k);
  return make_selection("similarity", std::move(order), pool, 0, {{"k", k}});
}

}  // namespace attrsel
