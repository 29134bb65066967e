#include "attrsel/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "attrsel/error.hpp"
#include "attrsel/rng.hpp"

namespace attrsel {
namespace {

Vector random_unit(std::size_t d, Rng& rng) {
  Vector v(d);
  double n = 0.0;
  do {
    for (double& x : v) x = rng.normal();
    n = norm(v);
  } while (n < 1e-12);
  for (double& x : v) x /= n;
  return v;
}

// Modified Gram-Schmidt, applied twice for orthogonality to working precision.
void orthonormalize_rows(Matrix& m) {
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      auto ri = m.row(i);
      for (std::size_t j = 0; j < i; ++j) {
        auto rj = m.row(j);
        const double p = dot(ri, rj);
        for (std::size_t c = 0; c < ri.size(); ++c) ri[c] -= p * rj[c];
      }
      const double n = norm(ri);
      require(n > 1e-12, ErrorCode::FactorizationFailed, "rank-deficient random draw");
      for (double& x : ri) x /= n;
    }
  }
}

ImageSet sample_images(const std::vector<Vector>& prototypes, std::size_t per_class, double sigma,
                       const std::vector<std::string>& class_names, Rng& rng) {
  const std::size_t d = prototypes.front().size();
  ImageSet out;
  out.embeddings = Matrix(prototypes.size() * per_class, d);
  out.class_names = class_names;
  std::size_t row = 0;
  for (std::size_t c = 0; c < prototypes.size(); ++c) {
    for (std::size_t i = 0; i < per_class; ++i, ++row) {
      auto r = out.embeddings.row(row);
      for (std::size_t k = 0; k < d; ++k) r[k] = prototypes[c][k] + sigma * rng.normal();
      const double n = norm(r);
      require(n > 1e-30, ErrorCode::ZeroRow, "degenerate synthetic image");
      for (double& x : r) x /= n;
      out.labels.push_back(static_cast<int>(c));
    }
  }
  return out;
}

}  // namespace

AttributePool gen_random_pool(std::size_t n, std::size_t d, std::uint64_t seed, bool orthonormalize) {
  require(n >= 1 && d >= 1, ErrorCode::ConfigError, "n and d must be positive");
  if (orthonormalize)
    require(n <= d, ErrorCode::TooManyForOrthonormal,
            std::to_string(n) + " orthonormal rows do not fit in " + std::to_string(d) + " dims");
  Rng rng(seed);
  AttributePool pool;
  pool.embeddings = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const Vector v = random_unit(d, rng);
    std::copy(v.begin(), v.end(), pool.embeddings.row(i).begin());
    pool.names.push_back("rand_" + std::to_string(i));
  }
  if (orthonormalize) orthonormalize_rows(pool.embeddings);
  return pool;
}

AttributePool gen_similar_pool(std::size_t n, std::size_t d, double spread, std::uint64_t seed) {
  require(n >= 1 && d >= 1, ErrorCode::ConfigError, "n and d must be positive");
  require(spread > 0.0, ErrorCode::ConfigError, "spread must be > 0");
  Rng rng(seed);
  const Vector base = random_unit(d, rng);
  const double per_coord = spread / std::sqrt(static_cast<double>(d));
  AttributePool pool;
  pool.embeddings = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = pool.embeddings.row(i);
    for (std::size_t k = 0; k < d; ++k) r[k] = base[k] + per_coord * rng.normal();
    const double nr = norm(r);
    for (double& x : r) x /= nr;
    pool.names.push_back("sim_" + std::to_string(i));
  }
  return pool;
}

PlantedTask gen_planted_task(const PlantedTaskConfig& cfg) {
  require(cfg.classes >= 2, ErrorCode::ConfigError, "need at least 2 classes");
  require(cfg.dim >= 1, ErrorCode::ConfigError, "dim must be positive");
  require(cfg.planted_attrs >= 1, ErrorCode::ConfigError, "planted_attrs must be >= 1");
  require(cfg.noise_sigma >= 0.0, ErrorCode::ConfigError, "noise_sigma must be >= 0");
  require(cfg.shared_weight >= 0.0, ErrorCode::ConfigError, "shared_weight must be >= 0");
  require(cfg.train_per_class >= 1 && cfg.test_per_class >= 1, ErrorCode::ConfigError,
          "need at least one train and one test image per class");

  Rng rng(cfg.seed);
  const std::size_t p = cfg.planted_attrs;
  const std::size_t n = p + cfg.distractor_attrs;

  std::vector<Vector> planted;
  for (std::size_t i = 0; i < p; ++i) planted.push_back(random_unit(cfg.dim, rng));
  const Vector shared = random_unit(cfg.dim, rng);

  // Each class gets a primary attribute c mod P plus distinct extras, with
  // supports unique across classes where possible.
  const std::size_t extra = std::min<std::size_t>(1, p - 1);
  std::vector<std::vector<std::size_t>> supports(cfg.classes);
  std::set<std::vector<std::size_t>> used;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    std::vector<std::size_t> s;
    for (int attempt = 0; attempt < 64; ++attempt) {
      s = {c % p};
      while (s.size() < extra + 1) {
        const std::size_t a = rng.below(p);
        if (std::find(s.begin(), s.end(), a) == s.end()) s.push_back(a);
      }
      std::sort(s.begin(), s.end());
      if (used.count(s) == 0) break;
    }
    used.insert(s);
    supports[c] = s;
  }

  std::vector<std::vector<double>> weights(cfg.classes);
  std::vector<Vector> prototypes(cfg.classes, Vector(cfg.dim, 0.0));
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    for (std::size_t a : supports[c]) {
      const double w = rng.uniform(0.5, 1.0);
      weights[c].push_back(w);
      for (std::size_t k = 0; k < cfg.dim; ++k) prototypes[c][k] += w * planted[a][k];
    }
    for (std::size_t k = 0; k < cfg.dim; ++k) prototypes[c][k] += cfg.shared_weight * shared[k];
  }

  std::vector<std::string> class_names;
  for (std::size_t c = 0; c < cfg.classes; ++c) class_names.push_back("class_" + std::to_string(c));

  PlantedTask task;

  // Pool: planted then distractors, then a seeded shuffle.
  std::vector<Vector> rows = planted;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < p; ++i) names.push_back("planted_" + std::to_string(i));
  for (std::size_t i = 0; i < cfg.distractor_attrs; ++i) {
    rows.push_back(random_unit(cfg.dim, rng));
    names.push_back("distractor_" + std::to_string(i));
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(std::span<std::size_t>(perm));
  // perm[position] = original row
  task.pool.embeddings = Matrix(n, cfg.dim);
  task.pool.names.resize(n);
  std::vector<std::size_t> position_of(n);
  for (std::size_t pos = 0; pos < n; ++pos) {
    std::copy(rows[perm[pos]].begin(), rows[perm[pos]].end(), task.pool.embeddings.row(pos).begin());
    task.pool.names[pos] = names[perm[pos]];
    position_of[perm[pos]] = pos;
  }
  for (std::size_t i = 0; i < p; ++i) task.planted_indices.push_back(position_of[i]);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t a : supports[c]) idx.push_back(position_of[a]);
    task.class_attributes.push_back(idx);
  }
  task.class_weights = weights;

  task.train = sample_images(prototypes, cfg.train_per_class, cfg.noise_sigma, class_names, rng);
  task.test = sample_images(prototypes, cfg.test_per_class, cfg.noise_sigma, class_names, rng);
  return task;
}

}  // namespace attrsel
