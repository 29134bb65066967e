#include "attrsel/probe.hpp"

#include <algorithm>
#include <cmath>

#include "attrsel/error.hpp"
#include "attrsel/rng.hpp"

namespace attrsel {
namespace {

constexpr double kProbFloor = 1e-12;
constexpr std::uint64_t kImageProbeInitStream = 11;

// Softmax cross-entropy on one logit row. Writes dL/dz (scaled by `weight`)
// into `dz` and returns the loss contribution.
double softmax_ce(std::span<const double> z, std::size_t label, double weight, std::span<double> dz) {
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    dz[c] = std::exp(z[c] - zmax);
    sum += dz[c];
  }
  for (double& p : dz) p /= sum;
  const double py = dz[label];
  const double loss = -std::log(std::max(py, kProbFloor)) * weight;
  for (std::size_t c = 0; c < z.size(); ++c) {
    if (py < kProbFloor) {
      dz[c] = 0.0;
    } else {
      dz[c] = (dz[c] - (c == label ? 1.0 : 0.0)) * weight;
    }
  }
  return loss;
}

std::vector<int> gather_labels(std::span<const int> labels, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels[r]);
  return out;
}

class LinearObjective final : public Objective {
public:
  LinearObjective(Matrix& w, Vector& b, const Matrix& x, std::span<const int> labels, const TrainValSplit& split)
      : w_(w), b_(b), x_(x), labels_(labels), split_(split), dw_(w.rows(), w.cols()), db_(b.size()) {}

  std::vector<std::span<double>> parameters() override { return {w_.data(), std::span<double>(b_)}; }

  double loss_and_gradient(std::span<const std::size_t> batch, std::vector<std::span<const double>>& gradient) override {
    std::fill(dw_.data().begin(), dw_.data().end(), 0.0);
    std::fill(db_.begin(), db_.end(), 0.0);
    const double weight = 1.0 / static_cast<double>(batch.size());
    Vector z(w_.rows()), dz(w_.rows());
    double loss = 0.0;
    for (std::size_t bi : batch) {
      const std::size_t i = split_.train[bi];
      auto xi = x_.row(i);
      for (std::size_t c = 0; c < w_.rows(); ++c) z[c] = dot(w_.row(c), xi) + b_[c];
      loss += softmax_ce(z, static_cast<std::size_t>(labels_[i]), weight, dz);
      for (std::size_t c = 0; c < w_.rows(); ++c) {
        db_[c] += dz[c];
        auto g = dw_.row(c);
        for (std::size_t j = 0; j < xi.size(); ++j) g[j] += dz[c] * xi[j];
      }
    }
    gradient = {dw_.data(), std::span<const double>(db_)};
    return loss;
  }

  ValidationScore validate() override {
    const Matrix xv = select_rows(x_, split_.val);
    const auto lv = gather_labels(labels_, split_.val);
    double loss = 0.0;
    std::size_t correct = 0;
    Vector z(w_.rows()), dz(w_.rows());
    const double weight = 1.0 / static_cast<double>(xv.rows());
    for (std::size_t i = 0; i < xv.rows(); ++i) {
      for (std::size_t c = 0; c < w_.rows(); ++c) z[c] = dot(w_.row(c), xv.row(i)) + b_[c];
      if (argmax(z) == static_cast<std::size_t>(lv[i])) ++correct;
      loss += softmax_ce(z, static_cast<std::size_t>(lv[i]), weight, dz);
    }
    return {loss, static_cast<double>(correct) / static_cast<double>(xv.rows())};
  }

private:
  Matrix& w_;
  Vector& b_;
  const Matrix& x_;
  std::span<const int> labels_;
  const TrainValSplit& split_;
  Matrix dw_;
  Vector db_;
};

// Linear(D -> k) followed by Linear(k -> K_C).
class TwoLayerObjective final : public Objective {
public:
  TwoLayerObjective(Matrix& w1, Vector& b1, Matrix& w2, Vector& b2, const Matrix& x, std::span<const int> labels,
                    const TrainValSplit& split)
      : w1_(w1), b1_(b1), w2_(w2), b2_(b2), x_(x), labels_(labels), split_(split),
        dw1_(w1.rows(), w1.cols()), db1_(b1.size()), dw2_(w2.rows(), w2.cols()), db2_(b2.size()) {}

  std::vector<std::span<double>> parameters() override {
    return {w1_.data(), std::span<double>(b1_), w2_.data(), std::span<double>(b2_)};
  }

  Vector logits(std::span<const double> xi, Vector& h) const {
    for (std::size_t r = 0; r < w1_.rows(); ++r) h[r] = dot(w1_.row(r), xi) + b1_[r];
    Vector z(w2_.rows());
    for (std::size_t c = 0; c < w2_.rows(); ++c) z[c] = dot(w2_.row(c), h) + b2_[c];
    return z;
  }

  double loss_and_gradient(std::span<const std::size_t> batch, std::vector<std::span<const double>>& gradient) override {
    for (auto* m : {&dw1_, &dw2_}) std::fill(m->data().begin(), m->data().end(), 0.0);
    for (auto* v : {&db1_, &db2_}) std::fill(v->begin(), v->end(), 0.0);
    const double weight = 1.0 / static_cast<double>(batch.size());
    Vector h(w1_.rows()), dh(w1_.rows()), dz(w2_.rows());
    double loss = 0.0;
    for (std::size_t bi : batch) {
      const std::size_t i = split_.train[bi];
      auto xi = x_.row(i);
      const Vector z = logits(xi, h);
      loss += softmax_ce(z, static_cast<std::size_t>(labels_[i]), weight, dz);
      std::fill(dh.begin(), dh.end(), 0.0);
      for (std::size_t c = 0; c < w2_.rows(); ++c) {
        db2_[c] += dz[c];
        auto g = dw2_.row(c);
        auto wc = w2_.row(c);
        for (std::size_t r = 0; r < h.size(); ++r) {
          g[r] += dz[c] * h[r];
          dh[r] += dz[c] * wc[r];
        }
      }
      for (std::size_t r = 0; r < h.size(); ++r) {
        db1_[r] += dh[r];
        auto g = dw1_.row(r);
        for (std::size_t t = 0; t < xi.size(); ++t) g[t] += dh[r] * xi[t];
      }
    }
    gradient = {dw1_.data(), std::span<const double>(db1_), dw2_.data(), std::span<const double>(db2_)};
    return loss;
  }

  ValidationScore validate() override { return score_rows(split_.val); }

  ValidationScore score_rows(std::span<const std::size_t> rows) const {
    Vector h(w1_.rows()), dz(w2_.rows());
    double loss = 0.0;
    std::size_t correct = 0;
    const double weight = 1.0 / static_cast<double>(rows.size());
    for (std::size_t i : rows) {
      const Vector z = logits(x_.row(i), h);
      if (argmax(z) == static_cast<std::size_t>(labels_[i])) ++correct;
      loss += softmax_ce(z, static_cast<std::size_t>(labels_[i]), weight, dz);
    }
    return {loss, static_cast<double>(correct) / static_cast<double>(rows.size())};
  }

private:
  Matrix& w1_;
  Vector& b1_;
  Matrix& w2_;
  Vector& b2_;
  const Matrix& x_;
  std::span<const int> labels_;
  const TrainValSplit& split_;
  Matrix dw1_;
  Vector db1_;
  Matrix dw2_;
  Vector db2_;
};

std::vector<std::size_t> iota_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t class_count) {
  require(labels.size() == rows, ErrorCode::ShapeMismatch,
          "labels length " + std::to_string(labels.size()) + " != rows " + std::to_string(rows));
  for (std::size_t i = 0; i < labels.size(); ++i)
    require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < class_count, ErrorCode::LabelOutOfRange,
            "row " + std::to_string(i));
}

}  // namespace

Vector ProbeModel::logits(std::span<const double> score_row) const {
  require(score_row.size() == w.cols(), ErrorCode::ShapeMismatch,
          "score row has " + std::to_string(score_row.size()) + " entries, probe expects " + std::to_string(w.cols()));
  Vector z(w.rows());
  for (std::size_t c = 0; c < w.rows(); ++c) z[c] = dot(w.row(c), score_row) + b[c];
  return z;
}

std::size_t ProbeModel::predict(std::span<const double> score_row) const { return argmax(logits(score_row)); }

ProbeModel train_probe(const ScoreMatrix& train_scores, std::span<const int> labels, std::size_t class_count,
                       const Head* init, const TrainConfig& cfg) {
  require(class_count >= 2, ErrorCode::TooFewClasses, "probe needs at least 2 classes");
  check_labels(labels, train_scores.image_count(), class_count);
  TrainConfig c = cfg;
  c.k = std::max<std::size_t>(train_scores.attribute_count(), 1);
  c.check();

  ProbeModel model;
  const std::size_t k = train_scores.attribute_count();
  if (init) {
    require(init->w.rows() == class_count && init->w.cols() == k && init->b.size() == class_count,
            ErrorCode::ShapeMismatch, "warm-start head shape does not match the probe");
    model.w = init->w;
    model.b = init->b;
  } else {
    model.w = Matrix(class_count, k);
    model.b = Vector(class_count, 0.0);
  }

  const TrainValSplit split = split_train_val(train_scores.image_count(), cfg.val_fraction, cfg.seed);
  LinearObjective objective(model.w, model.b, train_scores.scores, labels, split);
  model.report = run_training(objective, split.train.size(), c.loop());

  const Matrix xt = select_rows(train_scores.scores, split.train);
  const auto lt = gather_labels(labels, split.train);
  model.metrics.train_acc = evaluate(model.w, model.b, xt, lt, class_count).accuracy;
  model.metrics.val_acc = model.report.best_val_accuracy;
  nlohmann::json conf = cfg.to_json();
  conf.erase("lambda");
  conf.erase("reg");
  conf["warm_start"] = init != nullptr;
  model.config = conf;
  return model;
}

EvalResult evaluate(const Matrix& w, const Vector& b, const Matrix& scores, std::span<const int> labels,
                    std::size_t class_count) {
  require(scores.cols() == w.cols(), ErrorCode::ShapeMismatch,
          "scores have " + std::to_string(scores.cols()) + " columns, model expects " + std::to_string(w.cols()));
  require(w.rows() == class_count && b.size() == class_count, ErrorCode::ShapeMismatch, "model class count mismatch");
  check_labels(labels, scores.rows(), class_count);
  EvalResult out;
  out.confusion = Matrix(class_count, class_count);
  if (scores.rows() == 0) return out;
  Vector z(class_count);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    for (std::size_t c = 0; c < class_count; ++c) z[c] = dot(w.row(c), scores.row(i)) + b[c];
    const std::size_t pred = argmax(z);
    const auto y = static_cast<std::size_t>(labels[i]);
    out.confusion(y, pred) += 1.0;
    if (pred == y) ++correct;
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(scores.rows());
  return out;
}

EvalResult evaluate(const ProbeModel& model, const ScoreMatrix& scores, std::span<const int> labels) {
  return evaluate(model.w, model.b, scores.scores, labels, model.class_count());
}

ProbeModel probe_selection(const ImageSet& train, const ImageSet& test, const AttributePool& pool,
                           const SelectionResult& selection, const Head* warm_start, const TrainConfig& cfg) {
  validate(train, pool);
  validate(test, pool);
  check_selection(selection, pool);
  require(train.class_names == test.class_names, ErrorCode::InvalidArgument, "train and test class lists differ");
  const ScoreMatrix train_scores = semantic_project(train, pool, selection.indices);
  ProbeModel model = train_probe(train_scores, train.labels, train.class_count(), warm_start, cfg);
  const ScoreMatrix test_scores = semantic_project(test, pool, selection.indices);
  model.metrics.test_acc = evaluate(model, test_scores, test.labels).accuracy;
  model.selection = selection;
  return model;
}

ImageProbeResult train_image_probe(const ImageSet& train, const ImageSet& test, std::size_t k,
                                   const TrainConfig& cfg) {
  require(k >= 1, ErrorCode::BadK, "k must be >= 1");
  require(train.class_count() >= 2, ErrorCode::TooFewClasses, "probe needs at least 2 classes");
  require(train.dim() == test.dim(), ErrorCode::DimMismatch, "train and test dims differ");
  require(train.class_names == test.class_names, ErrorCode::InvalidArgument, "train and test class lists differ");
  check_image_set(train);
  check_image_set(test);
  TrainConfig c = cfg;
  c.k = k;
  c.check();

  const std::size_t d = train.dim();
  const std::size_t kc = train.class_count();
  Rng rng = Rng(cfg.seed).derive(kImageProbeInitStream);
  Matrix w1(k, d), w2(kc, k);
  Vector b1(k, 0.0), b2(kc, 0.0);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(k));
  for (double& x : w1.data()) x = s1 * rng.normal();
  for (double& x : w2.data()) x = s2 * rng.normal();

  const TrainValSplit split = split_train_val(train.count(), cfg.val_fraction, cfg.seed);
  TwoLayerObjective objective(w1, b1, w2, b2, train.embeddings, train.labels, split);
  ImageProbeResult out;
  out.k = k;
  out.report = run_training(objective, split.train.size(), c.loop());
  out.train_acc = objective.score_rows(split.train).accuracy;
  out.val_acc = out.report.best_val_accuracy;

  TwoLayerObjective test_view(w1, b1, w2, b2, test.embeddings, test.labels, split);
  out.test_acc = test_view.score_rows(iota_rows(test.count())).accuracy;
  return out;
}

}  // namespace attrsel
