#include "topicflow/rng.h"

#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"

using namespace topicflow;

TEST_CASE("equal seeds give identical streams") {
  Rng a(123), b(123);
  for (int i = 0; i < 200; ++i) {
    CHECK(a.uniform() == b.uniform());
  }
  for (int i = 0; i < 200; ++i) {
    CHECK(a.normal() == b.normal());
  }
  for (int i = 0; i < 200; ++i) {
    CHECK(a.uniform_int(97) == b.uniform_int(97));
  }
  Rng c(124);
  int diffs = 0;
  Rng a2(123);
  for (int i = 0; i < 50; ++i) {
    if (a2.uniform() != c.uniform()) ++diffs;
  }
  CHECK(diffs > 40);
}

TEST_CASE("derived streams depend on the tag, not on parent consumption") {
  Rng parent(77);
  Rng fresh_child = parent.derive("noise");
  // Burn through the parent, then derive again with the same tag.
  for (int i = 0; i < 1000; ++i) parent.uniform();
  Rng late_child = parent.derive("noise");
  for (int i = 0; i < 100; ++i) {
    CHECK(fresh_child.uniform() == late_child.uniform());
  }

  Rng other = parent.derive("shuffle");
  int diffs = 0;
  Rng again = parent.derive("noise");
  for (int i = 0; i < 50; ++i) {
    if (again.uniform() != other.uniform()) ++diffs;
  }
  CHECK(diffs > 40);

  // Two levels of derivation are stable too.
  Rng gc1 = Rng(77).derive("noise").derive("inner");
  Rng gc2 = parent.derive("noise").derive("inner");
  CHECK(gc1.uniform() == gc2.uniform());
}

TEST_CASE("uniform draws stay inside the half-open interval") {
  Rng rng(5);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);

  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-2.0, 3.0);
    CHECK(v >= -2.0);
    CHECK(v < 3.0);
  }
}

TEST_CASE("uniform integers cover the range without bias toward any value") {
  Rng rng(11);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const uint64_t k = rng.uniform_int(7);
    REQUIRE(k < 7);
    ++counts[static_cast<size_t>(k)];
  }
  for (int c : counts) {
    // Each bucket expects 10000; allow five sigma (~470).
    CHECK(c > 9500);
    CHECK(c < 10500);
  }
  CHECK(rng.uniform_int(1) == 0);
}

TEST_CASE("normal draws match the first two moments") {
  Rng rng(13);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);

  double shifted = 0.0;
  for (int i = 0; i < 20000; ++i) shifted += rng.normal(3.0, 0.5);
  CHECK(std::abs(shifted / 20000 - 3.0) < 0.02);
}
