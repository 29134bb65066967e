#include "attrsel/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attrsel/rng.hpp"

namespace attrsel {
namespace {

constexpr double kLossTieTolerance = 1e-9;

std::vector<std::vector<double>> snapshot(const std::vector<std::span<double>>& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (auto p : params) out.emplace_back(p.begin(), p.end());
  return out;
}

void restore(const std::vector<std::span<double>>& params, const std::vector<std::vector<double>>& saved) {
  for (std::size_t i = 0; i < params.size(); ++i) std::copy(saved[i].begin(), saved[i].end(), params[i].begin());
}

bool improves(const ValidationScore& s, double best_acc, double best_loss) {
  if (s.accuracy > best_acc) return true;
  return s.accuracy == best_acc && s.loss < best_loss - kLossTieTolerance;
}

}  // namespace

Adam::Adam(AdamConfig cfg, std::vector<std::size_t> block_sizes) : cfg_(cfg) {
  for (std::size_t n : block_sizes) {
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  }
}

void Adam::step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = m_[b];
    auto& v = v_[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

TrainReport run_training(Objective& objective, std::size_t train_count, const LoopConfig& cfg) {
  require(train_count >= 1, ErrorCode::InvalidArgument, "empty training split");
  require(cfg.eval_every >= 1, ErrorCode::ConfigError, "eval_every must be >= 1");
  require(cfg.batch_size >= 1, ErrorCode::ConfigError, "batch_size must be >= 1");

  const auto params = objective.parameters();
  std::vector<std::size_t> sizes;
  for (auto p : params) sizes.push_back(p.size());
  Adam adam(cfg.adam, sizes);

  TrainReport report;
  const ValidationScore initial = objective.validate();
  report.curve.push_back({0, 0.0, initial.loss, initial.accuracy});
  report.best_epoch = 0;
  report.best_val_accuracy = initial.accuracy;
  report.best_val_loss = initial.loss;
  auto best = snapshot(params);
  std::size_t stale = 0;

  const std::size_t batch = std::min(cfg.batch_size, train_count);
  std::vector<std::size_t> order(train_count);
  std::vector<std::span<const double>> grads;
  const Rng root(cfg.seed);
  report.stop_reason = "max_epochs";

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng epoch_rng = root.derive(epoch);
    epoch_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train_count; start += batch) {
      const std::size_t len = std::min(batch, train_count - start);
      const double loss = objective.loss_and_gradient(std::span<const std::size_t>(order).subspan(start, len), grads);
      bool finite = std::isfinite(loss);
      for (auto g : grads) finite = finite && std::all_of(g.begin(), g.end(), [](double x) { return std::isfinite(x); });
      if (!finite) {
        report.epochs_run = epoch;
        report.stop_reason = "diverged";
        restore(params, best);
        throw DivergenceError("non-finite loss or gradient at epoch " + std::to_string(epoch), report);
      }
      adam.step(params, grads);
      loss_sum += loss;
      ++batches;
    }
    report.epochs_run = epoch;

    if (epoch % cfg.eval_every != 0 && epoch != cfg.max_epochs) continue;
    const ValidationScore score = objective.validate();
    report.curve.push_back({epoch, loss_sum / static_cast<double>(batches), score.loss, score.accuracy});
    if (improves(score, report.best_val_accuracy, report.best_val_loss)) {
      report.best_epoch = epoch;
      report.best_val_accuracy = score.accuracy;
      report.best_val_loss = score.loss;
      best = snapshot(params);
      stale = 0;
    } else if (++stale >= cfg.patience) {
      report.stop_reason = "patience";
      break;
    }
  }
  restore(params, best);
  return report;
}

}  // namespace attrsel
