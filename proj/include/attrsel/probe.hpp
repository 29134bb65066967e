#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include <nlohmann/json.hpp>

#include "attrsel/embedding_io.hpp"
#include "attrsel/optim.hpp"
#include "attrsel/projection.hpp"
#include "attrsel/selection.hpp"
#include "attrsel/selector.hpp"

namespace attrsel {

struct ProbeMetrics {
  double train_acc = 0.0;
  double val_acc = 0.0;
  std::optional<double> test_acc;
};

// Linear classifier over selected attribute scores.
struct ProbeModel {
  Matrix w;  // K_C x K
  Vector b;  // K_C
  SelectionResult selection;
  ProbeMetrics metrics;
  nlohmann::json config = nlohmann::json::object();
  TrainReport report;

  std::size_t class_count() const noexcept { return w.rows(); }
  std::size_t attribute_count() const noexcept { return w.cols(); }
  Vector logits(std::span<const double> score_row) const;
  std::size_t predict(std::span<const double> score_row) const;
};

struct EvalResult {
  double accuracy = 0.0;
  Matrix confusion;  // rows: true class, cols: predicted class
};

// Cross-entropy linear probe trained with Adam and the selector's early-stopping
// contract. `init` warm-starts from a stage-one head; otherwise W = 0, b = 0.
// lambda and the regularizer in `cfg` are ignored. Throws ShapeMismatch,
// TooFewClasses, DivergenceDetected.
ProbeModel train_probe(const ScoreMatrix& train_scores, std::span<const int> labels, std::size_t class_count,
                       const Head* init, const TrainConfig& cfg);

// argmax ties go to the lower class index.
EvalResult evaluate(const Matrix& w, const Vector& b, const Matrix& scores, std::span<const int> labels,
                    std::size_t class_count);
EvalResult evaluate(const ProbeModel& model, const ScoreMatrix& scores, std::span<const int> labels);

// Projects train/test images onto the selected pool rows, trains the probe on
// train and reports test accuracy. Uses selection.head for warm start when
// `warm_start` is set and no explicit head is given.
ProbeModel probe_selection(const ImageSet& train, const ImageSet& test, const AttributePool& pool,
                           const SelectionResult& selection, const Head* warm_start, const TrainConfig& cfg);

struct ImageProbeResult {
  double test_acc = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  std::size_t k = 0;
  TrainReport report;
};

// Black-box reference: Linear(D -> k) then Linear(k -> K_C), no activation.
ImageProbeResult train_image_probe(const ImageSet& train, const ImageSet& test, std::size_t k,
                                   const TrainConfig& cfg);

}  // namespace attrsel
