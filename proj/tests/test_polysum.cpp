#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "fsketch/fsketch.hpp"
#include "fsketch/rng.hpp"
#include "support/oracles.hpp"

using namespace fsketch;

namespace {

PolySumParams desk(double p, double eps = 0.25) {
  PolySumParams pp;
  pp.p = p;
  pp.epsilon = eps;
  return pp;
}

}  // namespace

TEST_CASE("copies default follows ceil(C / eps^2)") {
  std::vector<double> x(10, 1.0);
  PolySumSketch s(x, desk(1.0, 0.5), 1);
  CHECK(s.params().copies == 64);
}

TEST_CASE("all-nonnegative x leaves the negative sub-sketch empty") {
  std::vector<double> x = {0.5, 0.0, 2.0, 1.0};
  PolySumSketch s(x, desk(1.0), 2);
  CHECK(s.negative_side_empty());
  s.update(0, 3.0);
  CHECK(s.query() >= 0.0);
}

TEST_CASE("zero weight coordinates touch no cells") {
  std::vector<double> x = {0.0, 1.0};
  PolySumSketch s(x, desk(1.0), 3);
  s.update(0, 5.0);
  CHECK(s.update_cell_touches() == 0);
  s.update(1, 5.0);
  CHECK(s.update_cell_touches() == s.params().copies * s.params().cs_rows);
}

TEST_CASE("insert-delete pairs cancel exactly") {
  std::vector<double> x(16, 1.0);
  PolySumSketch a(x, desk(0.5), 7);
  PolySumSketch b(x, desk(0.5), 7);
  a.update(3, 2.5);
  a.update(3, -2.5);
  CHECK(a.query() == b.query());
}

TEST_CASE("empty stream estimates zero") {
  std::vector<double> x(16, 1.0);
  PolySumSketch s(x, desk(1.0), 5);
  CHECK(s.query() == 0.0);
}

TEST_CASE("single heavy coordinate at p=1 estimates about its value") {
  const std::uint64_t n = 64;
  std::vector<double> x(n, 1.0);
  int hits = 0;
  for (int seed = 0; seed < 30; ++seed) {
    PolySumSketch s(x, desk(1.0, 0.25), 900 + seed);
    s.update(5, 7.0);
    double z = s.query();
    if (std::fabs(z - 7.0) <= 0.25 * 7.0) ++hits;
  }
  CHECK(hits >= 27);
}

TEST_CASE("p=0.5 estimates track the brute-force sum") {
  const std::uint64_t n = 300;
  const double p = 0.5, eps = 0.25;
  int hits = 0;
  const int trials = 20;
  for (int seed = 0; seed < trials; ++seed) {
    rng::SplitMix64 g(seed * 17 + 3);
    std::vector<double> x(n);
    for (auto& v : x) v = (g.next() & 1) ? 1.0 : -1.0;
    PolySumSketch s(x, desk(p, eps), 7000 + seed);
    oracles::DenseVectorAccumulator ref(n);
    for (int u = 0; u < 2000; ++u) {
      std::uint64_t c = g.next() % n;
      double d = (g.next() & 1) ? 1.0 : -1.0;
      s.update(c, d);
      ref.update(c, double_to_fp(d, 40));
    }
    double truth = oracles::exact_signed_pow_inner(x, ref, 40, p);
    double budget = oracles::exact_pow_inner(x, ref, 40, p);
    if (std::fabs(s.query() - truth) <= 0.3 * budget + 1e-9) ++hits;
  }
  CHECK(hits >= trials * 9 / 10);
}

TEST_CASE("p=1 signed weights estimate the signed inner product") {
  const std::uint64_t n = 200;
  int hits = 0;
  for (int seed = 0; seed < 20; ++seed) {
    rng::SplitMix64 g(seed + 41);
    std::vector<double> x(n);
    for (auto& v : x) v = (g.next() & 1) ? 1.0 : -1.0;
    PolySumSketch s(x, desk(1.0, 0.25), 100 + seed);
    oracles::DenseVectorAccumulator ref(n);
    for (int u = 0; u < 1500; ++u) {
      std::uint64_t c = g.next() % n;
      double d = (g.next() & 1) ? 1.0 : -1.0;
      s.update(c, d);
      ref.update(c, double_to_fp(d, 40));
    }
    double truth = oracles::exact_signed_pow_inner(x, ref, 40, 1.0);
    double budget = oracles::exact_pow_inner(x, ref, 40, 1.0);
    if (std::fabs(s.query() - truth) <= 0.3 * budget + 1e-9) ++hits;
  }
  CHECK(hits >= 18);
}

TEST_CASE("permutation of updates leaves the query bit-identical") {
  const std::uint64_t n = 50;
  std::vector<double> x(n, 1.0);
  std::vector<std::pair<std::uint64_t, double>> updates;
  rng::SplitMix64 g(8);
  for (int u = 0; u < 300; ++u)
    updates.emplace_back(g.next() % n, (g.next() & 1) ? 1.0 : -1.0);
  PolySumSketch a(x, desk(0.5), 21);
  for (auto [c, d] : updates) a.update(c, d);
  double za = a.query();
  for (int rep = 0; rep < 5; ++rep) {
    rng::shuffle(updates.data(), updates.size(), g);
    PolySumSketch b(x, desk(0.5), 21);
    for (auto [c, d] : updates) b.update(c, d);
    CHECK(b.query() == za);
  }
}

TEST_CASE("serialization round-trips the estimate") {
  std::vector<double> x = {1.0, -2.0, 0.0, 3.0};
  PolySumSketch s(x, desk(1.0), 4);
  s.update(0, 2.0);
  s.update(1, -1.0);
  s.update(3, 4.0);
  std::stringstream buf;
  s.save(buf);
  PolySumSketch t = PolySumSketch::load(buf);
  CHECK(t.query() == s.query());
}

TEST_CASE("out-of-range p is rejected") {
  std::vector<double> x(4, 1.0);
  CHECK_THROWS_AS(PolySumSketch(x, desk(2.5), 1), ConfigError);
  CHECK_THROWS_AS(PolySumSketch(x, desk(0.0), 1), ConfigError);
}
