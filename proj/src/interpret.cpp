#include "attrsel/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attrsel/error.hpp"

namespace attrsel {

ImportanceVector importance_scores(const ProbeModel& model, std::span<const double> score_row, std::size_t class_c) {
  require(class_c < model.class_count(), ErrorCode::BadClass,
          "class " + std::to_string(class_c) + " of " + std::to_string(model.class_count()));
  require(score_row.size() == model.attribute_count(), ErrorCode::ShapeMismatch,
          "score row has " + std::to_string(score_row.size()) + " entries, probe expects " +
              std::to_string(model.attribute_count()));
  ImportanceVector out;
  out.class_index = class_c;
  out.attribute_names = model.selection.names;
  out.values.resize(score_row.size());
  for (std::size_t j = 0; j < score_row.size(); ++j) out.values[j] = model.w(class_c, j) * score_row[j];
  return out;
}

std::vector<RankedAttribute> class_importance(const ProbeModel& model, const ScoreMatrix& test_scores,
                                              std::span<const int> labels, std::size_t class_c, std::size_t top_n) {
  require(class_c < model.class_count(), ErrorCode::BadClass,
          "class " + std::to_string(class_c) + " of " + std::to_string(model.class_count()));
  require(labels.size() == test_scores.image_count(), ErrorCode::ShapeMismatch, "labels length != score rows");
  const std::size_t k = model.attribute_count();
  Vector mean(k, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != static_cast<int>(class_c)) continue;
    const ImportanceVector iv = importance_scores(model, test_scores.scores.row(i), class_c);
    for (std::size_t j = 0; j < k; ++j) mean[j] += iv.values[j];
    ++count;
  }
  require(count > 0, ErrorCode::EmptyClass, "no test samples for class " + std::to_string(class_c));
  for (double& m : mean) m /= static_cast<double>(count);

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(mean[a]) > std::abs(mean[b]); });
  order.resize(std::min(top_n, k));

  std::vector<RankedAttribute> out;
  for (std::size_t j : order) {
    const std::string name = j < model.selection.names.size() ? model.selection.names[j] : std::to_string(j);
    out.push_back({j, name, mean[j]});
  }
  return out;
}

Intervention intervene(const ProbeModel& model, std::span<const double> score_row, std::size_t attr_j, double delta) {
  require(attr_j < model.attribute_count(), ErrorCode::BadIndex,
          "attribute " + std::to_string(attr_j) + " of " + std::to_string(model.attribute_count()));
  Intervention out;
  out.old_logits = model.logits(score_row);
  Vector shifted(score_row.begin(), score_row.end());
  shifted[attr_j] += delta;
  out.new_logits = model.logits(shifted);
  out.logit_delta.resize(model.class_count());
  for (std::size_t c = 0; c < model.class_count(); ++c) out.logit_delta[c] = delta * model.w(c, attr_j);
  out.old_pred = argmax(out.old_logits);
  out.new_pred = argmax(out.new_logits);
  return out;
}

}  // namespace attrsel
