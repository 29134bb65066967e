#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "attrsel/error.hpp"

namespace attrsel {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
public:
  Adam(AdamConfig cfg, std::vector<std::size_t> block_sizes);

  void step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads);

private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
};

struct EvalPoint {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean mini-batch loss over the epoch (0 for the initial point)
  double val_loss = 0.0;    // validation cross-entropy
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EvalPoint> curve;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  double best_val_loss = 0.0;
  std::size_t epochs_run = 0;
  std::string stop_reason;  // "patience", "max_epochs"
};

class DivergenceError : public Error {
public:
  DivergenceError(const std::string& message, TrainReport report)
      : Error(ErrorCode::DivergenceDetected, "DivergenceDetected: " + message), report_(std::move(report)) {}
  const TrainReport& report() const noexcept { return report_; }

private:
  TrainReport report_;
};

struct LoopConfig {
  AdamConfig adam;
  std::size_t max_epochs = 5000;
  std::size_t batch_size = 4096;
  std::size_t eval_every = 10;
  std::size_t patience = 20;
  std::uint64_t seed = 0;
};

struct ValidationScore {
  double loss = 0.0;
  double accuracy = 0.0;
};

// A model trained by `run_training`. Gradient blocks line up with parameters().
class Objective {
public:
  virtual ~Objective() = default;
  virtual std::vector<std::span<double>> parameters() = 0;
  // Loss on the listed training rows; gradient blocks stay valid until the next call.
  virtual double loss_and_gradient(std::span<const std::size_t> batch,
                                   std::vector<std::span<const double>>& gradient) = 0;
  virtual ValidationScore validate() = 0;
};

// Adam over shuffled mini-batches with early stopping. The best evaluation is
// the highest validation accuracy, ties broken by lower validation loss;
// parameters are restored from it before returning. Throws DivergenceError.
TrainReport run_training(Objective& objective, std::size_t train_count, const LoopConfig& cfg);

}  // namespace attrsel
