#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "attrsel/error.hpp"
#include "attrsel/selector.hpp"
#include "attrsel/synthetic.hpp"
#include "support.hpp"

using namespace attrsel;

namespace {

struct Instance {
  Dictionary dict;
  Head head;
  Matrix images;
  std::vector<int> labels;
  AttributePool pool;
  GaussianSummary g;
};

Instance random_instance(std::uint64_t seed, std::size_t d, std::size_t k, std::size_t n, std::size_t kc,
                         std::size_t m) {
  Rng rng(seed);
  Instance in;
  in.dict.e = testing::random_matrix(k, d, rng);
  in.head = Head{testing::random_matrix(kc, k, rng), Vector(kc)};
  for (double& b : in.head.b) b = rng.normal();
  in.images = l2_normalize_rows(testing::random_matrix(m, d, rng));
  for (std::size_t i = 0; i < m; ++i) in.labels.push_back(static_cast<int>(rng.below(kc)));
  in.pool.embeddings = l2_normalize_rows(testing::random_matrix(n, d, rng));
  for (std::size_t i = 0; i < n; ++i) in.pool.names.push_back("t" + std::to_string(i));
  in.g = fit_gaussian(in.pool.embeddings);
  return in;
}

double rel_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += std::pow(analytic[i] - numeric[i], 2);
    scale += std::pow(numeric[i], 2);
  }
  return std::sqrt(diff) / std::max(std::sqrt(scale), 1e-8);
}

// Central differences of the total loss over every parameter block.
double worst_gradient_error(Instance in, const TrainConfig& cfg) {
  const Gradients g = grad(in.dict, in.head, in.images, in.labels, in.g, cfg);
  const double h = 1e-5;
  auto numeric = [&](std::span<double> p) {
    Vector out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double keep = p[i];
      p[i] = keep + h;
      const double up = loss(in.dict, in.head, in.images, in.labels, in.g, cfg).total;
      p[i] = keep - h;
      const double down = loss(in.dict, in.head, in.images, in.labels, in.g, cfg).total;
      p[i] = keep;
      out[i] = (up - down) / (2 * h);
    }
    return out;
  };
  const Vector ne = numeric(in.dict.e.data());
  const Vector nw = numeric(in.head.w.data());
  const Vector nb = numeric(in.head.b);
  return std::max({rel_error(g.d_e.data(), ne), rel_error(g.d_w.data(), nw), rel_error(g.d_b, nb)});
}

PlantedTask small_task(std::uint64_t seed = 0) {
  PlantedTaskConfig cfg;
  cfg.classes = 4;
  cfg.dim = 12;
  cfg.planted_attrs = 4;
  cfg.distractor_attrs = 28;
  cfg.train_per_class = 20;
  cfg.test_per_class = 20;
  cfg.seed = seed;
  return gen_planted_task(cfg);
}

}  // namespace

TEST_CASE("forward on the one-attribute example") {
  const Dictionary dict{Matrix{{1, 0}}};
  const Head head{Matrix{{1}, {-1}}, Vector{0, 0}};
  const ForwardPass f = forward(dict, head, Matrix{{1, 0}});
  CHECK(f.scores(0, 0) == 1.0);
  CHECK(f.logits(0, 0) == 1.0);
  CHECK(f.logits(0, 1) == -1.0);
  CHECK(std::abs(f.probs(0, 0) - 0.88079708) < 1e-8);
  CHECK(std::abs(f.probs(0, 1) - 0.11920292) < 1e-8);

  CHECK_THROWS_AS(forward(dict, head, Matrix{{1, 0, 0}}), Error);
}

TEST_CASE("forward with a zero head is uniform and ignores row scale") {
  Instance in = random_instance(1, 5, 3, 6, 4, 7);
  const Head zero{Matrix(4, 3), Vector(4, 0.0)};
  const ForwardPass f = forward(in.dict, zero, in.images);
  for (double p : f.probs.data()) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));

  Dictionary scaled = in.dict;
  for (double& x : scaled.e.row(0)) x *= 5.0;
  const ForwardPass a = forward(in.dict, in.head, in.images);
  const ForwardPass b = forward(scaled, in.head, in.images);
  CHECK(testing::max_abs_diff(a.scores.data(), b.scores.data()) < 1e-15);
  CHECK(testing::max_abs_diff(a.probs.data(), b.probs.data()) < 1e-15);
}

TEST_CASE("loss examples") {
  Instance in = random_instance(2, 6, 3, 8, 5, 9);
  TrainConfig cfg;
  cfg.lambda = 0.0;
  const Head zero{Matrix(5, 3), Vector(5, 0.0)};
  CHECK(std::abs(loss(in.dict, zero, in.images, in.labels, in.g, cfg).ce - std::log(5.0)) < 1e-10);

  const Dictionary one{Matrix{{1, 0}}};
  const Head head{Matrix{{1}, {-1}}, Vector{0, 0}};
  const std::vector<int> label0{0};
  const GaussianSummary id = gaussian_from_moments({0, 0}, Matrix::identity(2));
  const LossBreakdown l = loss(one, head, Matrix{{1, 0}}, label0, id, cfg);
  CHECK(std::abs(l.total - std::log(1.0 + std::exp(-2.0))) < 1e-12);
  CHECK(std::abs(l.total - 0.12692801) < 1e-8);

  TrainConfig mah;
  mah.lambda = 0.1;
  mah.reg_kind = RegKind::Mahalanobis;
  const LossBreakdown lm = loss(Dictionary{Matrix{{3, 4}}}, head, Matrix{{1, 0}}, label0, id, mah);
  CHECK(lm.reg == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(std::abs(lm.total - lm.ce - 0.5) < 1e-14);
}

TEST_CASE("cosine regularizer equals the brute-force mean cosine") {
  Instance in = random_instance(3, 6, 4, 10, 3, 5);
  TrainConfig cfg;
  cfg.reg_kind = RegKind::Cosine;
  cfg.lambda = 1.0;
  double brute = 0.0;
  for (std::size_t j = 0; j < 4; ++j)
    for (std::size_t i = 0; i < 10; ++i) brute += cosine(in.pool.embeddings.row(i), in.dict.e.row(j));
  brute = -brute / 40.0;
  CHECK(std::abs(loss(in.dict, in.head, in.images, in.labels, in.g, cfg).reg - brute) < 1e-12);

  cfg.reg_kind = RegKind::CrossEntropyOnly;
  CHECK(loss(in.dict, in.head, in.images, in.labels, in.g, cfg).reg == 0.0);
}

TEST_CASE("bias gradient at a zero head") {
  const Dictionary dict{Matrix{{1, 0}}};
  const Head zero{Matrix(2, 1), Vector(2, 0.0)};
  const std::vector<int> label0{0};
  const GaussianSummary id = gaussian_from_moments({0, 0}, Matrix::identity(2));
  const Gradients g = grad(dict, zero, Matrix{{1, 0}}, label0, id, TrainConfig{});
  CHECK(g.d_b[0] == doctest::Approx(-0.5));
  CHECK(g.d_b[1] == doctest::Approx(0.5));
}

TEST_CASE("gradients match central differences") {
  for (RegKind kind : {RegKind::Mahalanobis, RegKind::Cosine, RegKind::CrossEntropyOnly}) {
    TrainConfig cfg;
    cfg.reg_kind = kind;
    cfg.lambda = 0.3;
    CAPTURE(reg_kind_name(kind));
    CHECK(worst_gradient_error(random_instance(0, 4, 2, 6, 3, 5), cfg) < 1e-4);
  }
}

TEST_CASE("gradient property over 20 seeds") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng shape(seed + 100);
    const std::size_t d = 4 + shape.below(13), k = 2 + shape.below(7), n = k + shape.below(33 - k);
    const std::size_t kc = 2 + shape.below(4), m = 3 + shape.below(10);
    TrainConfig cfg;
    cfg.reg_kind = static_cast<RegKind>(seed % 3);
    cfg.lambda = 0.5;
    CAPTURE(seed);
    CHECK(worst_gradient_error(random_instance(seed, d, k, n, kc, m), cfg) < 1e-4);
  }
}

TEST_CASE("lambda = 0 leaves only the cross-entropy path") {
  Instance in = random_instance(5, 6, 3, 9, 3, 8);
  TrainConfig mah;
  mah.lambda = 0.0;
  TrainConfig ce = mah;
  ce.reg_kind = RegKind::CrossEntropyOnly;
  const Gradients a = grad(in.dict, in.head, in.images, in.labels, in.g, mah);
  const Gradients b = grad(in.dict, in.head, in.images, in.labels, in.g, ce);
  CHECK(a.d_e == b.d_e);
  CHECK(a.d_w == b.d_w);
}

TEST_CASE("a small Adam step decreases the loss") {
  int decreased = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Instance in = random_instance(seed, 8, 3, 12, 3, 20);
    TrainConfig cfg;
    const double before = loss(in.dict, in.head, in.images, in.labels, in.g, cfg).total;
    const Gradients g = grad(in.dict, in.head, in.images, in.labels, in.g, cfg);
    Adam adam({1e-4, 0.9, 0.999, 1e-8}, {in.dict.e.data().size(), in.head.w.data().size(), in.head.b.size()});
    adam.step({in.dict.e.data(), in.head.w.data(), in.head.b}, {g.d_e.data(), g.d_w.data(), g.d_b});
    if (loss(in.dict, in.head, in.images, in.labels, in.g, cfg).total < before) ++decreased;
  }
  CHECK(decreased >= 19);
}

TEST_CASE("init_dictionary") {
  const AttributePool pool = gen_random_pool(10, 6, 1, false);
  TrainConfig cfg;
  cfg.k = 4;
  cfg.init_jitter = 0.0;
  const Dictionary d = init_dictionary(pool, cfg);
  std::set<std::size_t> rows;
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (std::equal(d.e.row(j).begin(), d.e.row(j).end(), pool.embeddings.row(i).begin())) rows.insert(i);
  }
  CHECK(rows.size() == 4);

  cfg.init_jitter = 0.01;
  CHECK(init_dictionary(pool, cfg).e == init_dictionary(pool, cfg).e);

  cfg.k = 11;
  CHECK_THROWS_AS(init_dictionary(pool, cfg), Error);

  AttributePool axes;
  axes.embeddings = Matrix{{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  axes.names = {"a", "b", "c", "d"};
  TrainConfig gauss;
  gauss.init_mode = InitMode::Gaussian;
  gauss.k = 10000;
  const Dictionary s = init_dictionary(axes, gauss);
  double m0 = 0, m1 = 0;
  for (std::size_t j = 0; j < s.k(); ++j) {
    m0 += s.e(j, 0) / 10000.0;
    m1 += s.e(j, 1) / 10000.0;
  }
  CHECK(std::abs(m0) < 0.05);
  CHECK(std::abs(m1) < 0.05);
}

TEST_CASE("split_train_val") {
  const TrainValSplit s = split_train_val(100, 0.1, 3);
  CHECK(s.val.size() == 10);
  CHECK(s.train.size() == 90);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.val.begin(), s.val.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 100; ++i) CHECK(all[i] == i);
  CHECK(split_train_val(100, 0.1, 3).val == s.val);
}

TEST_CASE("config checks and serialization") {
  TrainConfig cfg;
  cfg.val_fraction = 0.5;
  CHECK_THROWS_AS(cfg.check(), Error);
  cfg = TrainConfig{};
  cfg.lambda = -1;
  CHECK_THROWS_AS(cfg.check(), Error);

  TrainConfig custom;
  custom.k = 5;
  custom.lambda = 0.1;
  custom.reg_kind = RegKind::Cosine;
  custom.init_mode = InitMode::Gaussian;
  custom.seed = 77;
  const TrainConfig back = TrainConfig::from_json(custom.to_json());
  CHECK(back.to_json() == custom.to_json());
  CHECK(parse_reg_kind("ce") == RegKind::CrossEntropyOnly);
  CHECK_THROWS_AS(parse_reg_kind("l2"), Error);
  CHECK(std::string(init_mode_name(parse_init_mode("gaussian"))) == "gaussian");
}

TEST_CASE("training with lr = 0 keeps the initial parameters") {
  const PlantedTask t = small_task();
  TrainConfig cfg;
  cfg.k = 3;
  cfg.lr = 0.0;
  cfg.max_epochs = 1;
  const TrainedDictionary r = train(t.train, t.pool, cfg);
  CHECK(r.dict.e == init_dictionary(t.pool, cfg).e);
  CHECK(r.head.w == Matrix(4, 3));
  CHECK(r.head.b == Vector(4, 0.0));
}

TEST_CASE("training is deterministic per seed") {
  const PlantedTask t = small_task();
  TrainConfig cfg;
  cfg.k = 3;
  cfg.max_epochs = 200;
  const TrainedDictionary a = train(t.train, t.pool, cfg);
  const TrainedDictionary b = train(t.train, t.pool, cfg);
  CHECK(a.dict.e == b.dict.e);
  REQUIRE(a.report.curve.size() == b.report.curve.size());
  for (std::size_t i = 0; i < a.report.curve.size(); ++i) {
    CHECK(a.report.curve[i].val_loss == b.report.curve[i].val_loss);
    CHECK(a.report.curve[i].train_loss == b.report.curve[i].train_loss);
  }
  CHECK(a.report.best_epoch == b.report.best_epoch);
  CHECK(!a.report.curve.empty());
}

TEST_CASE("planted task trains to high validation accuracy") {
  const PlantedTask t = gen_planted_task(PlantedTaskConfig{});
  TrainConfig cfg;
  cfg.k = 8;
  cfg.lambda = 0.01;
  const TrainedDictionary r = train(t.train, t.pool, cfg);
  CHECK(r.report.best_val_accuracy >= 0.90);
  CHECK((r.report.stop_reason == "patience" || r.report.stop_reason == "max_epochs"));
}

TEST_CASE("divergence is reported") {
  const PlantedTask t = small_task();
  TrainConfig cfg;
  cfg.k = 3;
  cfg.lr = 1e300;
  try {
    train(t.train, t.pool, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.code() == ErrorCode::DivergenceDetected);
    CHECK(!e.report().curve.empty());
  }
}

TEST_CASE("greedy_select examples") {
  AttributePool pool;
  pool.embeddings = Matrix{{1, 0}, {0, 1}, {0.6, 0.8}};
  pool.names = {"a", "b", "c"};
  const SelectionResult s = greedy_select(Dictionary{Matrix{{0.9, 0.1}, {0.8, 0.2}}}, pool);
  CHECK(s.indices == std::vector<std::size_t>{0, 2});
  CHECK(s.names == std::vector<std::string>{"a", "c"});
  CHECK(cosine(Vector{0.8, 0.2}, Vector{0, 1}) == doctest::Approx(0.2425).epsilon(1e-3));
  CHECK(cosine(Vector{0.8, 0.2}, Vector{0.6, 0.8}) == doctest::Approx(0.7761).epsilon(1e-3));

  const SelectionResult all = greedy_select(Dictionary{Matrix{{1, 1}, {1, 1}, {1, 1}}}, pool);
  std::vector<std::size_t> sorted = all.indices;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<std::size_t>{0, 1, 2});

  AttributePool scaled = pool;
  for (std::size_t r = 0; r < 3; ++r)
    for (double& x : scaled.embeddings.row(r)) x *= 3.0 + r;
  CHECK(greedy_select(Dictionary{Matrix{{0.9, 0.1}, {0.8, 0.2}}}, scaled).indices == s.indices);

  CHECK_THROWS_AS(greedy_select(Dictionary{Matrix(4, 2, 1.0)}, pool), Error);
}

TEST_CASE("greedy_select ties go to the lowest index") {
  AttributePool pool;
  pool.embeddings = Matrix{{0, 1}, {1, 0}, {1, 0}, {1, 0}};
  pool.names = {"a", "b", "c", "d"};
  const SelectionResult s = greedy_select(Dictionary{Matrix{{1, 0}, {1, 0}}}, pool);
  CHECK(s.indices == std::vector<std::size_t>{1, 2});
}

TEST_CASE("greedy_select is invariant to pool order") {
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    AttributePool pool;
    pool.embeddings = l2_normalize_rows(testing::random_matrix(10, 4, rng));
    for (int i = 0; i < 10; ++i) pool.names.push_back("a" + std::to_string(i));
    const Dictionary dict{testing::random_matrix(3, 4, rng)};
    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    AttributePool shuffled;
    shuffled.embeddings = select_rows(pool.embeddings, perm);
    for (auto p : perm) shuffled.names.push_back(pool.names[p]);
    CHECK(greedy_select(dict, pool).names == greedy_select(dict, shuffled).names);
  }
}

TEST_CASE("greedy_select equals brute force on small instances") {
  Rng rng(17);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 3 + rng.below(8), k = 1 + rng.below(3);
    AttributePool pool;
    pool.embeddings = testing::random_matrix(n, 3, rng);
    for (std::size_t i = 0; i < n; ++i) pool.names.push_back(std::to_string(i));
    const Dictionary dict{testing::random_matrix(k, 3, rng)};
    std::vector<std::size_t> expected;
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t best = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (std::find(expected.begin(), expected.end(), i) != expected.end()) continue;
        if (best == n || cosine(pool.embeddings.row(i), dict.e.row(j)) > cosine(pool.embeddings.row(best), dict.e.row(j)))
          best = i;
      }
      expected.push_back(best);
    }
    CHECK(greedy_select(dict, pool).indices == expected);
  }
}

TEST_CASE("select_learned carries its head and metrics") {
  const PlantedTask t = small_task(2);
  TrainConfig cfg;
  cfg.k = 4;
  cfg.max_epochs = 300;
  const SelectionResult s = select_learned(t.train, t.pool, cfg);
  CHECK(s.method == "learned");
  CHECK(s.k() == 4);
  REQUIRE(s.head.has_value());
  CHECK(s.head->w.rows() == 4);
  CHECK(s.head->w.cols() == 4);
  CHECK(s.metrics.contains("snapped_val_accuracy"));
  CHECK(s.metrics.contains("best_epoch"));
  CHECK(s.config.at("seed") == 0);
  CHECK_NOTHROW(check_selection(s, t.pool));
}

TEST_CASE("lambda grid keeps the best snapped validation accuracy") {
  const PlantedTask t = small_task(3);
  TrainConfig cfg;
  cfg.k = 4;
  cfg.max_epochs = 200;
  const double grid[] = {0.1, 0.0};
  const SelectionResult s = select_learned_grid(t.train, t.pool, cfg, grid);
  const auto& rows = s.metrics.at("lambda_grid");
  REQUIRE(rows.size() == 2);
  const double best = std::max(rows[0].at("snapped_val_accuracy").get<double>(),
                               rows[1].at("snapped_val_accuracy").get<double>());
  CHECK(s.metrics.at("snapped_val_accuracy").get<double>() == best);
}

TEST_CASE("mean Mahalanobis distance shrinks as lambda grows") {
  const PlantedTask t = small_task(1);
  const GaussianSummary g = fit_gaussian(t.pool.embeddings);
  std::vector<double> means;
  for (double lambda : {0.0, 0.001, 0.01, 0.1, 1.0}) {
    TrainConfig cfg;
    cfg.k = 4;
    cfg.lambda = lambda;
    cfg.max_epochs = 400;
    const TrainedDictionary r = train(t.train, t.pool, cfg);
    double mean = 0.0;
    for (std::size_t j = 0; j < r.dict.k(); ++j) mean += mahalanobis(g, r.dict.e.row(j)) / r.dict.k();
    means.push_back(mean);
  }
  CAPTURE(means[0]);
  CAPTURE(means[4]);
  for (std::size_t i = 1; i < means.size(); ++i) CHECK(means[i] <= means[i - 1] * 1.02);
  CHECK(means.back() < means.front());
}
