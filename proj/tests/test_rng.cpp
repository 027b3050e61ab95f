#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "emotrans/rng.hpp"

using namespace emotrans;

TEST_CASE("fnv1a matches reference vectors") {
  REQUIRE(fnv1a("") == 0xcbf29ce484222325ull);
  REQUIRE(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  REQUIRE(fnv1a("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("splitmix64 matches reference sequence") {
  Rng r1(1);
  REQUIRE(r1.next_u64() == 0x910a2dec89025cc1ull);
  REQUIRE(r1.next_u64() == 0xbeeb8da1658eec67ull);
  REQUIRE(r1.next_u64() == 0xf893a2eefb32555eull);

  Rng r42(42);
  REQUIRE(r42.next_u64() == 0xbdd732262feb6e95ull);
  REQUIRE(r42.next_u64() == 0x28efe333b266f103ull);
  REQUIRE(r42.next_u64() == 0x47526757130f9f52ull);
}

TEST_CASE("mix_seed matches reference value") {
  REQUIRE(mix_seed(7, 9) == 0x69c3a27688795369ull);
}

TEST_CASE("uniform matches reference value and bounds") {
  Rng r(2024);
  double u = r.uniform();
  REQUIRE(u == Catch::Approx(0.6227655366461097).margin(1e-15));
  for (int i = 0; i < 1000; ++i) {
    double v = r.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
  }
}

TEST_CASE("uniform range stays inside bounds") {
  Rng r(7);
  for (int i = 0; i < 1000; ++i) {
    double v = r.uniform(-2.5, 4.0);
    REQUIRE(v >= -2.5);
    REQUIRE(v < 4.0);
  }
}

TEST_CASE("same seed replays identically") {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("substreams with different names diverge") {
  Rng a = Rng::substream(5, "train", 0);
  Rng b = Rng::substream(5, "eval", 0);
  Rng c = Rng::substream(5, "train", 1);
  REQUIRE(a.next_u64() != b.next_u64());
  Rng a2 = Rng::substream(5, "train", 0);
  REQUIRE(a2.next_u64() != c.next_u64());
}

TEST_CASE("normal has plausible first and second moments") {
  Rng r(31337);
  const int n = 20000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = r.normal();
    sum += x;
    sum2 += x * x;
  }
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  REQUIRE(std::abs(mean) < 0.03);
  REQUIRE(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("uniform_index covers the domain") {
  Rng r(11);
  bool seen[5] = {false, false, false, false, false};
  for (int i = 0; i < 200; ++i) seen[r.uniform_index(5)] = true;
  for (bool s : seen) REQUIRE(s);
}

TEST_CASE("bernoulli extremes") {
  Rng r(3);
  for (int i = 0; i < 50; ++i) {
    REQUIRE_FALSE(r.bernoulli(0.0));
    REQUIRE(r.bernoulli(1.0));
  }
}
