#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "attrsel/rng.hpp"

using attrsel::Rng;

TEST_CASE("same seed, same stream") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differs = differs || x != c.next();
  }
  CHECK(differs);
}

TEST_CASE("derived streams are reproducible and distinct") {
  const Rng root(7);
  Rng a = root.derive(1), b = root.derive(1), c = root.derive(2);
  const auto x = a.next();
  CHECK(x == b.next());
  CHECK(x != c.next());
  CHECK(Rng(7).derive(1).next() == x);
}

TEST_CASE("uniform and below stay in range") {
  Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(r.below(7) < 7);
  }
  CHECK(r.below(1) == 0);
}

TEST_CASE("below is unbiased") {
  Rng r(3);
  std::vector<int> counts(5, 0);
  const int n = 50000;
  for (int i = 0; i < n; ++i) ++counts[r.below(5)];
  const double p = 0.2, sd = std::sqrt(n * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - n * p) < 4 * sd);
}

TEST_CASE("normal has unit moments") {
  Rng r(5);
  const int n = 40000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.03);
  CHECK(std::abs(s2 / n - 1.0) < 0.03);
}

TEST_CASE("shuffle is a permutation and sampling is distinct") {
  Rng r(9);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);

  const auto picks = r.sample_without_replacement(30, 12);
  CHECK(picks.size() == 12);
  CHECK(std::set<std::size_t>(picks.begin(), picks.end()).size() == 12);
  for (auto p : picks) CHECK(p < 30);
}
