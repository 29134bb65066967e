#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "attrsel/embedding_io.hpp"
#include "attrsel/optim.hpp"
#include "attrsel/selection.hpp"
#include "attrsel/stats.hpp"
#include "attrsel/tensor.hpp"

namespace attrsel {

enum class RegKind { Mahalanobis, Cosine, CrossEntropyOnly };
enum class InitMode { PoolSubset, Gaussian };

const char* reg_kind_name(RegKind kind) noexcept;
RegKind parse_reg_kind(const std::string& name);  // "mah", "cos", "ce"
const char* init_mode_name(InitMode mode) noexcept;
InitMode parse_init_mode(const std::string& name);  // "pool_subset", "gaussian"

struct TrainConfig {
  std::size_t k = 8;
  double lambda = 0.01;
  RegKind reg_kind = RegKind::Mahalanobis;
  double lr = 0.01;
  std::size_t max_epochs = 5000;
  std::size_t batch_size = 4096;  // clamped to the training split size
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  std::size_t eval_every = 10;
  std::size_t patience = 20;
  InitMode init_mode = InitMode::PoolSubset;
  double init_jitter = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double ridge_scale = 1e-4;

  // Throws ConfigError.
  void check() const;
  LoopConfig loop() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Default lambda grid, largest first.
inline constexpr double kLambdaGrid[] = {1.0, 0.1, 0.01, 0.001, 0.0};

// Learnable K x D matrix; rows are not constrained to unit norm.
struct Dictionary {
  Matrix e;
  std::size_t k() const noexcept { return e.rows(); }
};

struct ForwardPass {
  Matrix scores;  // M x K cosines
  Matrix logits;  // M x K_C
  Matrix probs;   // M x K_C
};

struct LossBreakdown {
  double total = 0.0;
  double ce = 0.0;
  double reg = 0.0;
};

struct Gradients {
  Matrix d_e;
  Matrix d_w;
  Vector d_b;
};

// Train/validation row split from a seeded shuffle.
struct TrainValSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};
TrainValSplit split_train_val(std::size_t count, double val_fraction, std::uint64_t seed);

// pool_subset: K distinct pool rows plus N(0, init_jitter^2) noise.
// gaussian: K draws from the pool's Gaussian summary. Throws KTooLarge.
Dictionary init_dictionary(const AttributePool& pool, const TrainConfig& cfg);

ForwardPass forward(const Dictionary& dict, const Head& head, const Matrix& images);

// ce + lambda * reg, with reg chosen by cfg.reg_kind:
//   MAH: mean Mahalanobis distance of the rows of E from the pool Gaussian
//   COS: minus the mean cosine between rows of E and pool rows (uses g.mu,
//        the mean of the unit pool rows)
LossBreakdown loss(const Dictionary& dict, const Head& head, const Matrix& images, std::span<const int> labels,
                   const GaussianSummary& g, const TrainConfig& cfg);

Gradients grad(const Dictionary& dict, const Head& head, const Matrix& images, std::span<const int> labels,
               const GaussianSummary& g, const TrainConfig& cfg);

struct TrainedDictionary {
  Dictionary dict;
  Head head;
  TrainReport report;
  TrainValSplit split;
};

// Throws DivergenceError (DivergenceDetected) on a non-finite loss.
TrainedDictionary train(const ImageSet& images, const AttributePool& pool, const TrainConfig& cfg);

// Row j takes the most cosine-similar pool row not already taken.
SelectionResult greedy_select(const Dictionary& dict, const AttributePool& pool);

// train + greedy_select. The result carries the stage-one head (columns in
// selection order) and metrics including the validation accuracy of that head
// on the snapped attributes.
SelectionResult select_learned(const ImageSet& images, const AttributePool& pool, const TrainConfig& cfg);

// Runs select_learned for each lambda and keeps the highest snapped validation
// accuracy (ties: earlier grid entry).
SelectionResult select_learned_grid(const ImageSet& images, const AttributePool& pool, const TrainConfig& cfg,
                                    std::span<const double> lambdas = kLambdaGrid);

}  // namespace attrsel
