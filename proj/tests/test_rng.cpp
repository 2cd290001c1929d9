#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <set>
#include <vector>

#include "panelite/rng.hpp"

using panelite::SplitRng;

TEST_CASE("same seed reproduces the stream") {
  SplitRng a(42), b(42);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("split is independent of draw position") {
  SplitRng fresh(7);
  SplitRng consumed(7);
  for (int i = 0; i < 57; ++i) consumed.next_u64();
  SplitRng child_a = fresh.split(3);
  SplitRng child_b = consumed.split(3);
  for (int i = 0; i < 20; ++i) {
    REQUIRE(child_a.next_u64() == child_b.next_u64());
  }
}

TEST_CASE("distinct streams differ") {
  SplitRng root(7);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t s = 0; s < 64; ++s) {
    firsts.insert(root.split(s).next_u64());
  }
  REQUIRE(firsts.size() == 64);
}

TEST_CASE("unit draws stay in [0, 1)") {
  SplitRng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("normal draws have roughly standard moments") {
  SplitRng rng(11);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.next_normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.01);
  REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("bounded draws cover the range without spill") {
  SplitRng rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = rng.next_below(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  REQUIRE(seen.size() == 7);
}
