#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "attrsel/probe.hpp"
#include "attrsel/projection.hpp"

namespace attrsel {

// Per-attribute contribution to one class logit: w[c][j] * score[j].
struct ImportanceVector {
  Vector values;
  std::vector<std::string> attribute_names;
  std::size_t class_index = 0;
};

// Throws BadClass, ShapeMismatch.
ImportanceVector importance_scores(const ProbeModel& model, std::span<const double> score_row, std::size_t class_c);

struct RankedAttribute {
  std::size_t position = 0;  // column in the selection
  std::string name;
  double mean_importance = 0.0;  // signed
};

// Mean importance over the test samples of class_c, ranked by |mean|
// (ties to the lower position). Throws EmptyClass, BadClass.
std::vector<RankedAttribute> class_importance(const ProbeModel& model, const ScoreMatrix& test_scores,
                                              std::span<const int> labels, std::size_t class_c, std::size_t top_n);

struct Intervention {
  std::size_t old_pred = 0;
  std::size_t new_pred = 0;
  Vector old_logits;
  Vector new_logits;
  Vector logit_delta;  // delta * column attr_j of W
};

// Shifts score_row[attr_j] by delta and re-predicts. Throws BadIndex.
Intervention intervene(const ProbeModel& model, std::span<const double> score_row, std::size_t attr_j, double delta);

}  // namespace attrsel
