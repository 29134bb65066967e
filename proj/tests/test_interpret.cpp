#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "attrsel/error.hpp"
#include "attrsel/interpret.hpp"
#include "attrsel/probe.hpp"
#include "attrsel/synthetic.hpp"
#include "support.hpp"

using namespace attrsel;

namespace {

ProbeModel model_of(Matrix w, Vector b) {
  ProbeModel m;
  m.w = std::move(w);
  m.b = std::move(b);
  for (std::size_t j = 0; j < m.w.cols(); ++j) {
    m.selection.indices.push_back(j);
    m.selection.names.push_back("attr_" + std::to_string(j));
  }
  return m;
}

}  // namespace

TEST_CASE("importance scores") {
  const ProbeModel m = model_of(Matrix{{2, -1}, {0, 3}}, Vector{0.25, -0.5});
  const ImportanceVector is = importance_scores(m, Vector{0.5, 0.5}, 0);
  CHECK(is.values == Vector{1.0, -0.5});
  CHECK(is.attribute_names == std::vector<std::string>{"attr_0", "attr_1"});
  CHECK(importance_scores(m, Vector{0, 0}, 1).values == Vector{0, 0});

  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const Vector row{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Vector logits = m.logits(row);
    for (std::size_t c = 0; c < 2; ++c) {
      const Vector v = importance_scores(m, row, c).values;
      double sum = 0.0;
      for (double x : v) sum += x;
      CHECK(std::abs(sum + m.b[c] - logits[c]) <= 1e-12);
    }
  }

  try {
    importance_scores(m, Vector{0, 0}, 2);
    FAIL("expected BadClass");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadClass);
  }
  CHECK_THROWS_AS(importance_scores(m, Vector{0, 0, 0}, 0), Error);
}

TEST_CASE("class importance") {
  const ProbeModel m = model_of(Matrix{{1, -3, 2}, {0, 1, 0}}, Vector{0, 0});
  const ScoreMatrix s{Matrix{{0.5, 0.1, 0.2}, {0.3, 0.3, 0.3}, {0.2, 0.4, 0.1}}, {"attr_0", "attr_1", "attr_2"}};
  const std::vector<int> labels{0, 1, 1};

  // A single-sample class reproduces that sample's importance vector.
  const auto single = class_importance(m, s, labels, 0, 3);
  const Vector expected = importance_scores(m, s.scores.row(0), 0).values;
  REQUIRE(single.size() == 3);
  for (const auto& r : single) CHECK(r.mean_importance == doctest::Approx(expected[r.position]).epsilon(1e-12));
  CHECK(single[0].position == 0);
  CHECK(single[1].position == 2);
  CHECK(single[2].position == 1);
  CHECK(single[2].mean_importance < 0);

  // Ties go to the lower position; the full ranking is a permutation.
  const auto tied = class_importance(m, s, labels, 1, 3);
  CHECK(tied[0].position == 1);
  CHECK(tied[1].position == 0);
  CHECK(tied[2].position == 2);
  CHECK(class_importance(m, s, labels, 1, 1).size() == 1);

  try {
    class_importance(m, s, std::vector<int>{0, 0, 0}, 1, 3);
    FAIL("expected EmptyClass");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyClass);
  }
}

TEST_CASE("planted prototypes show up among the top attributes") {
  const PlantedTask t = gen_planted_task(PlantedTaskConfig{});
  const SelectionResult s = make_selection("planted", t.planted_indices, t.pool, 0);
  const ProbeModel m = probe_selection(t.train, t.test, t.pool, s, nullptr, TrainConfig{});
  const ScoreMatrix scores = semantic_project(t.test, t.pool, s.indices);
  for (std::size_t c = 0; c < t.train.class_count(); ++c) {
    CAPTURE(c);
    const auto top = class_importance(m, scores, t.test.labels, c, 3);
    bool hit = false;
    for (const auto& r : top) {
      const std::size_t pool_index = s.indices[r.position];
      const auto& own = t.class_attributes[c];
      hit = hit || std::find(own.begin(), own.end(), pool_index) != own.end();
    }
    CHECK(hit);
    const auto full = class_importance(m, scores, t.test.labels, c, s.k());
    std::vector<std::size_t> positions;
    for (const auto& r : full) positions.push_back(r.position);
    std::sort(positions.begin(), positions.end());
    for (std::size_t j = 0; j < positions.size(); ++j) CHECK(positions[j] == j);
  }
}

TEST_CASE("intervention") {
  const ProbeModel m = model_of(Matrix{{1, 0}, {0, 1}}, Vector{0, 0});
  const Intervention flip = intervene(m, Vector{0.49, 0.50}, 0, 0.03);
  CHECK(flip.old_pred == 1);
  CHECK(flip.new_pred == 0);
  CHECK(flip.logit_delta == Vector{0.03, 0.0});

  const Intervention none = intervene(m, Vector{0.49, 0.50}, 1, 0.0);
  CHECK(none.old_pred == none.new_pred);
  CHECK(none.logit_delta == Vector{0, 0});

  try {
    intervene(m, Vector{0.49, 0.50}, 2, 0.03);
    FAIL("expected BadIndex");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadIndex);
  }
}

TEST_CASE("intervention is linear and flips exactly at the margin") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t classes = 2 + rng.below(3), k = 2 + rng.below(4);
    const ProbeModel m = model_of(testing::random_matrix(classes, k, rng), Vector(classes, 0.0));
    Vector row(k);
    for (double& x : row) x = rng.uniform(-1, 1);
    const std::size_t j = rng.below(k);
    const double delta = rng.uniform(-0.5, 0.5);

    const Intervention once = intervene(m, row, j, delta);
    for (std::size_t c = 0; c < classes; ++c) CHECK(once.logit_delta[c] == delta * m.w(c, j));

    Vector half = row;
    half[j] += delta / 2;
    const Intervention second = intervene(m, half, j, delta / 2);
    for (std::size_t c = 0; c < classes; ++c)
      CHECK(second.new_logits[c] == doctest::Approx(once.new_logits[c]).epsilon(1e-12));

    Vector shifted = row;
    shifted[j] += delta;
    CHECK(once.new_pred == m.predict(shifted));
    CHECK(once.old_pred == m.predict(row));
  }
}
