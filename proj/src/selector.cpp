#include "attrsel/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "attrsel/error.hpp"
#include "attrsel/rng.hpp"

namespace attrsel {
namespace {

constexpr double kProbFloor = 1e-12;

// Stream ids for Rng::derive.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kLoopStream = 3;

void check_shapes(const Dictionary& dict, const Head& head, const Matrix& images) {
  require(dict.e.cols() == images.cols(), ErrorCode::DimMismatch,
          "dictionary D=" + std::to_string(dict.e.cols()) + ", images D=" + std::to_string(images.cols()));
  require(head.w.cols() == dict.k(), ErrorCode::ShapeMismatch, "head width != K");
  require(head.b.size() == head.w.rows(), ErrorCode::ShapeMismatch, "bias length != K_C");
}

// Shared forward/backward over a set of image rows. When `grads` is null only
// the loss is computed. `rows` indexes into `images`/`labels`.
LossBreakdown evaluate(const Matrix& e, const Matrix& w, const Vector& b, const Matrix& images,
                       std::span<const int> labels, std::span<const std::size_t> rows, const GaussianSummary* g,
                       const TrainConfig& cfg, Gradients* grads) {
  const std::size_t k = e.rows();
  const std::size_t d = e.cols();
  const std::size_t kc = w.rows();
  const std::size_t m = rows.size();
  require(m > 0, ErrorCode::InvalidArgument, "empty batch");

  Vector e_norm(k);
  for (std::size_t j = 0; j < k; ++j) {
    e_norm[j] = norm(e.row(j));
    require(e_norm[j] >= 1e-30, ErrorCode::ZeroRow, "dictionary row " + std::to_string(j));
  }

  if (grads) {
    grads->d_e = Matrix(k, d);
    grads->d_w = Matrix(kc, k);
    grads->d_b.assign(kc, 0.0);
  }

  LossBreakdown out;
  Vector s(k), z(kc), p(kc), ds(k);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = rows[r];
    auto v = images.row(i);
    const double v_norm = norm(v);
    require(v_norm >= 1e-30, ErrorCode::ZeroRow, "image row " + std::to_string(i));
    for (std::size_t j = 0; j < k; ++j) s[j] = dot(v, e.row(j)) / (v_norm * e_norm[j]);
    for (std::size_t c = 0; c < kc; ++c) z[c] = dot(w.row(c), s) + b[c];
    const double zmax = *std::max_element(z.begin(), z.end());
    double zsum = 0.0;
    for (std::size_t c = 0; c < kc; ++c) {
      p[c] = std::exp(z[c] - zmax);
      zsum += p[c];
    }
    for (double& x : p) x /= zsum;

    const auto y = static_cast<std::size_t>(labels[i]);
    require(y < kc, ErrorCode::LabelOutOfRange, "row " + std::to_string(i));
    const double py = p[y];
    out.ce -= std::log(std::max(py, kProbFloor)) * inv_m;

    // Below the probability floor the clamped loss is flat.
    if (!grads || py < kProbFloor) continue;
    std::fill(ds.begin(), ds.end(), 0.0);
    for (std::size_t c = 0; c < kc; ++c) {
      const double gic = (p[c] - (c == y ? 1.0 : 0.0)) * inv_m;
      grads->d_b[c] += gic;
      auto dw = grads->d_w.row(c);
      auto wc = w.row(c);
      for (std::size_t j = 0; j < k; ++j) {
        dw[j] += gic * s[j];
        ds[j] += gic * wc[j];
      }
    }
    for (std::size_t j = 0; j < k; ++j) {
      auto de = grads->d_e.row(j);
      auto ej = e.row(j);
      const double a = ds[j] / (v_norm * e_norm[j]);
      const double c2 = ds[j] * s[j] / (e_norm[j] * e_norm[j]);
      for (std::size_t t = 0; t < d; ++t) de[t] += a * v[t] - c2 * ej[t];
    }
  }

  const double scale = 1.0 / static_cast<double>(k);
  switch (cfg.reg_kind) {
    case RegKind::CrossEntropyOnly:
      break;
    case RegKind::Mahalanobis:
      require(g != nullptr, ErrorCode::InvalidArgument, "Mahalanobis regularizer needs a Gaussian summary");
      for (std::size_t j = 0; j < k; ++j) {
        out.reg += mahalanobis(*g, e.row(j)) * scale;
        if (grads && cfg.lambda != 0.0) {
          const Vector gj = mahalanobis_grad(*g, e.row(j));
          auto de = grads->d_e.row(j);
          for (std::size_t t = 0; t < d; ++t) de[t] += cfg.lambda * scale * gj[t];
        }
      }
      break;
    case RegKind::Cosine:
      require(g != nullptr, ErrorCode::InvalidArgument, "cosine regularizer needs the pool mean");
      for (std::size_t j = 0; j < k; ++j) {
        auto ej = e.row(j);
        const double mu_dot = dot(g->mu, ej);
        out.reg -= mu_dot / e_norm[j] * scale;
        if (grads && cfg.lambda != 0.0) {
          auto de = grads->d_e.row(j);
          const double n3 = e_norm[j] * e_norm[j] * e_norm[j];
          for (std::size_t t = 0; t < d; ++t)
            de[t] -= cfg.lambda * scale * (g->mu[t] / e_norm[j] - mu_dot * ej[t] / n3);
        }
      }
      break;
  }
  out.total = out.ce + cfg.lambda * out.reg;
  return out;
}

std::vector<std::size_t> all_rows(std::size_t m) {
  std::vector<std::size_t> r(m);
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

std::size_t count_correct(const Matrix& e, const Matrix& w, const Vector& b, const Matrix& images,
                          std::span<const int> labels, std::span<const std::size_t> rows) {
  const Matrix en = l2_normalize_rows(e);
  std::size_t correct = 0;
  Vector s(e.rows()), z(w.rows());
  for (std::size_t i : rows) {
    auto v = images.row(i);
    const double vn = norm(v);
    for (std::size_t j = 0; j < e.rows(); ++j) s[j] = dot(v, en.row(j)) / vn;
    for (std::size_t c = 0; c < w.rows(); ++c) z[c] = dot(w.row(c), s) + b[c];
    if (argmax(z) == static_cast<std::size_t>(labels[i])) ++correct;
  }
  return correct;
}

class DictionaryObjective final : public Objective {
public:
  DictionaryObjective(Dictionary& dict, Head& head, const ImageSet& images, const TrainValSplit& split,
                      const GaussianSummary& g, const TrainConfig& cfg)
      : dict_(dict), head_(head), images_(images), split_(split), g_(g), cfg_(cfg) {}

  std::vector<std::span<double>> parameters() override {
    return {dict_.e.data(), head_.w.data(), std::span<double>(head_.b)};
  }

  double loss_and_gradient(std::span<const std::size_t> batch, std::vector<std::span<const double>>& gradient) override {
    rows_.resize(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) rows_[i] = split_.train[batch[i]];
    const LossBreakdown l =
        evaluate(dict_.e, head_.w, head_.b, images_.embeddings, images_.labels, rows_, &g_, cfg_, &grads_);
    gradient = {grads_.d_e.data(), grads_.d_w.data(), std::span<const double>(grads_.d_b)};
    return l.total;
  }

  ValidationScore validate() override {
    TrainConfig ce_only = cfg_;
    ce_only.reg_kind = RegKind::CrossEntropyOnly;
    const LossBreakdown l =
        evaluate(dict_.e, head_.w, head_.b, images_.embeddings, images_.labels, split_.val, nullptr, ce_only, nullptr);
    const std::size_t correct =
        count_correct(dict_.e, head_.w, head_.b, images_.embeddings, images_.labels, split_.val);
    return {l.ce, static_cast<double>(correct) / static_cast<double>(split_.val.size())};
  }

private:
  Dictionary& dict_;
  Head& head_;
  const ImageSet& images_;
  const TrainValSplit& split_;
  const GaussianSummary& g_;
  const TrainConfig& cfg_;
  std::vector<std::size_t> rows_;
  Gradients grads_;
};

}  // namespace

const char* reg_kind_name(RegKind kind) noexcept {
  switch (kind) {
    case RegKind::Mahalanobis: return "mah";
    case RegKind::Cosine: return "cos";
    case RegKind::CrossEntropyOnly: return "ce";
  }
  return "unknown";
}

RegKind parse_reg_kind(const std::string& name) {
  if (name == "mah" || name == "MAH") return RegKind::Mahalanobis;
  if (name == "cos" || name == "COS") return RegKind::Cosine;
  if (name == "ce" || name == "CE" || name == "CE_ONLY") return RegKind::CrossEntropyOnly;
  fail(ErrorCode::ConfigError, "unknown regularizer '" + name + "'");
}

const char* init_mode_name(InitMode mode) noexcept {
  return mode == InitMode::PoolSubset ? "pool_subset" : "gaussian";
}

InitMode parse_init_mode(const std::string& name) {
  if (name == "pool_subset") return InitMode::PoolSubset;
  if (name == "gaussian") return InitMode::Gaussian;
  fail(ErrorCode::ConfigError, "unknown init mode '" + name + "'");
}

void TrainConfig::check() const {
  require(k >= 1, ErrorCode::ConfigError, "k must be >= 1");
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::ConfigError, "lambda must be >= 0");
  require(lr >= 0.0, ErrorCode::ConfigError, "lr must be >= 0");
  require(val_fraction > 0.0 && val_fraction < 0.5, ErrorCode::ConfigError, "val_fraction must be in (0, 0.5)");
  require(batch_size >= 1 && eval_every >= 1, ErrorCode::ConfigError, "batch_size and eval_every must be >= 1");
  require(init_jitter >= 0.0 && ridge_scale >= 0.0, ErrorCode::ConfigError, "negative jitter or ridge");
}

LoopConfig TrainConfig::loop() const {
  LoopConfig l;
  l.adam = {lr, adam_beta1, adam_beta2, adam_eps};
  l.max_epochs = max_epochs;
  l.batch_size = batch_size;
  l.eval_every = eval_every;
  l.patience = patience;
  l.seed = Rng(seed).derive(kLoopStream).next();
  return l;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"k", k},
          {"lambda", lambda},
          {"reg", reg_kind_name(reg_kind)},
          {"lr", lr},
          {"max_epochs", max_epochs},
          {"batch_size", batch_size},
          {"seed", seed},
          {"val_fraction", val_fraction},
          {"eval_every", eval_every},
          {"patience", patience},
          {"init_mode", init_mode_name(init_mode)},
          {"init_jitter", init_jitter},
          {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},
          {"adam_eps", adam_eps},
          {"ridge_scale", ridge_scale}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.k = j.value("k", c.k);
  c.lambda = j.value("lambda", c.lambda);
  c.reg_kind = parse_reg_kind(j.value("reg", std::string(reg_kind_name(c.reg_kind))));
  c.lr = j.value("lr", c.lr);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.val_fraction = j.value("val_fraction", c.val_fraction);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.patience = j.value("patience", c.patience);
  c.init_mode = parse_init_mode(j.value("init_mode", std::string(init_mode_name(c.init_mode))));
  c.init_jitter = j.value("init_jitter", c.init_jitter);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.ridge_scale = j.value("ridge_scale", c.ridge_scale);
  return c;
}

TrainValSplit split_train_val(std::size_t count, double val_fraction, std::uint64_t seed) {
  require(count >= 2, ErrorCode::InvalidArgument, "need at least 2 rows to split");
  std::vector<std::size_t> order = all_rows(count);
  Rng rng = Rng(seed).derive(kSplitStream);
  rng.shuffle(std::span<std::size_t>(order));
  auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(count)));
  n_val = std::clamp<std::size_t>(n_val, 1, count - 1);
  TrainValSplit split;
  split.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

Dictionary init_dictionary(const AttributePool& pool, const TrainConfig& cfg) {
  Rng rng = Rng(cfg.seed).derive(kInitStream);
  Dictionary dict{Matrix(cfg.k, pool.dim())};
  if (cfg.init_mode == InitMode::PoolSubset) {
    require(cfg.k <= pool.size(), ErrorCode::KTooLarge,
            "k=" + std::to_string(cfg.k) + " > pool size " + std::to_string(pool.size()));
    const auto picks = rng.sample_without_replacement(pool.size(), cfg.k);
    for (std::size_t j = 0; j < cfg.k; ++j) {
      auto src = pool.embeddings.row(picks[j]);
      auto dst = dict.e.row(j);
      for (std::size_t t = 0; t < dst.size(); ++t) dst[t] = src[t] + cfg.init_jitter * rng.normal();
    }
  } else {
    const GaussianSummary g = fit_gaussian(pool.embeddings, cfg.ridge_scale);
    for (std::size_t j = 0; j < cfg.k; ++j) {
      const Vector x = sample_gaussian(g, rng);
      std::copy(x.begin(), x.end(), dict.e.row(j).begin());
    }
  }
  return dict;
}

ForwardPass forward(const Dictionary& dict, const Head& head, const Matrix& images) {
  check_shapes(dict, head, images);
  ForwardPass out;
  out.scores = Matrix(images.rows(), dict.k());
  const Matrix en = l2_normalize_rows(dict.e);
  for (std::size_t i = 0; i < images.rows(); ++i) {
    auto v = images.row(i);
    const double vn = norm(v);
    require(vn >= 1e-30, ErrorCode::ZeroRow, "image row " + std::to_string(i));
    for (std::size_t j = 0; j < dict.k(); ++j) out.scores(i, j) = dot(v, en.row(j)) / vn;
  }
  out.logits = matmul_transposed(out.scores, head.w);
  for (std::size_t i = 0; i < out.logits.rows(); ++i)
    for (std::size_t c = 0; c < out.logits.cols(); ++c) out.logits(i, c) += head.b[c];
  out.probs = softmax_rows(out.logits);
  return out;
}

LossBreakdown loss(const Dictionary& dict, const Head& head, const Matrix& images, std::span<const int> labels,
                   const GaussianSummary& g, const TrainConfig& cfg) {
  check_shapes(dict, head, images);
  require(labels.size() == images.rows(), ErrorCode::ShapeMismatch, "labels length != batch size");
  const auto rows = all_rows(images.rows());
  return evaluate(dict.e, head.w, head.b, images, labels, rows, &g, cfg, nullptr);
}

Gradients grad(const Dictionary& dict, const Head& head, const Matrix& images, std::span<const int> labels,
               const GaussianSummary& g, const TrainConfig& cfg) {
  check_shapes(dict, head, images);
  require(labels.size() == images.rows(), ErrorCode::ShapeMismatch, "labels length != batch size");
  const auto rows = all_rows(images.rows());
  Gradients out;
  evaluate(dict.e, head.w, head.b, images, labels, rows, &g, cfg, &out);
  return out;
}

TrainedDictionary train(const ImageSet& images, const AttributePool& pool, const TrainConfig& cfg) {
  cfg.check();
  validate(images, pool);
  require(images.class_count() >= 2, ErrorCode::TooFewClasses, "training needs at least 2 classes");
  require(cfg.k <= pool.size(), ErrorCode::KTooLarge,
          "k=" + std::to_string(cfg.k) + " > pool size " + std::to_string(pool.size()));

  const GaussianSummary g = fit_gaussian(pool.embeddings, cfg.ridge_scale);
  TrainedDictionary out;
  out.dict = init_dictionary(pool, cfg);
  out.head = Head{Matrix(images.class_count(), cfg.k), Vector(images.class_count(), 0.0)};
  out.split = split_train_val(images.count(), cfg.val_fraction, cfg.seed);

  DictionaryObjective objective(out.dict, out.head, images, out.split, g, cfg);
  out.report = run_training(objective, out.split.train.size(), cfg.loop());
  return out;
}

SelectionResult greedy_select(const Dictionary& dict, const AttributePool& pool) {
  require(dict.k() <= pool.size(), ErrorCode::KTooLarge,
          "K=" + std::to_string(dict.k()) + " > pool size " + std::to_string(pool.size()));
  require(dict.e.cols() == pool.dim(), ErrorCode::DimMismatch, "dictionary and pool dims differ");
  const Matrix sims = matmul_transposed(l2_normalize_rows(dict.e), l2_normalize_rows(pool.embeddings));
  std::vector<bool> taken(pool.size(), false);
  std::vector<std::size_t> picks;
  for (std::size_t j = 0; j < dict.k(); ++j) {
    std::size_t best = pool.size();
    double best_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (taken[i]) continue;
      if (sims(j, i) > best_sim) {
        best_sim = sims(j, i);
        best = i;
      }
    }
    taken[best] = true;
    picks.push_back(best);
  }
  return make_selection("learned", std::move(picks), pool, 0);
}

SelectionResult select_learned(const ImageSet& images, const AttributePool& pool, const TrainConfig& cfg) {
  TrainedDictionary trained = train(images, pool, cfg);
  SelectionResult sel = greedy_select(trained.dict, pool);
  sel.seed = cfg.seed;
  sel.config = cfg.to_json();

  // Validation accuracy of the stage-one head once E is snapped to the pool.
  const Dictionary snapped{select_rows(pool.embeddings, sel.indices)};
  const std::size_t correct = count_correct(snapped.e, trained.head.w, trained.head.b, images.embeddings,
                                            images.labels, trained.split.val);
  const double snapped_val = static_cast<double>(correct) / static_cast<double>(trained.split.val.size());

  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : trained.report.curve)
    curve.push_back({{"epoch", p.epoch}, {"train_loss", p.train_loss}, {"val_loss", p.val_loss},
                     {"val_accuracy", p.val_accuracy}});
  sel.metrics = {{"best_epoch", trained.report.best_epoch},
                 {"best_val_accuracy", trained.report.best_val_accuracy},
                 {"best_val_loss", trained.report.best_val_loss},
                 {"epochs_run", trained.report.epochs_run},
                 {"stop_reason", trained.report.stop_reason},
                 {"snapped_val_accuracy", snapped_val},
                 {"curve", curve}};
  sel.head = trained.head;
  return sel;
}

SelectionResult select_learned_grid(const ImageSet& images, const AttributePool& pool, const TrainConfig& cfg,
                                    std::span<const double> lambdas) {
  require(!lambdas.empty(), ErrorCode::ConfigError, "empty lambda grid");
  std::optional<SelectionResult> best;
  nlohmann::json grid = nlohmann::json::array();
  for (double lambda : lambdas) {
    TrainConfig c = cfg;
    c.lambda = lambda;
    SelectionResult sel = select_learned(images, pool, c);
    const double acc = sel.metrics.at("snapped_val_accuracy").get<double>();
    grid.push_back({{"lambda", lambda}, {"snapped_val_accuracy", acc}});
    if (!best || acc > best->metrics.at("snapped_val_accuracy").get<double>()) best = std::move(sel);
  }
  best->metrics["lambda_grid"] = grid;
  return *best;
}

}  // namespace attrsel
