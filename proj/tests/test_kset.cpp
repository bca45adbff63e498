#include <doctest.h>

#include <sstream>
#include <vector>

#include "fsketch/kset.hpp"
#include "fsketch/rng.hpp"
#include "support/oracles.hpp"

using namespace fsketch;

namespace {

KSet fresh(std::uint64_t universe, std::uint32_t k, std::uint64_t seed,
           double delta = 0.01) {
  return KSet(universe, k, delta, seed);
}

}  // namespace

TEST_CASE("insert then delete returns to the empty state") {
  KSet a = fresh(100, 8, 1);
  KSet b = fresh(100, 8, 1);
  a.update(3, +1);
  a.update(3, -1);
  CHECK(a.state_equal(b));
  auto q = a.query();
  CHECK(q.ok);
  CHECK(q.items.empty());
}

TEST_CASE("permuting a fixed update sequence leaves the state unchanged") {
  std::vector<std::pair<std::uint64_t, std::int64_t>> updates = {
      {5, 2}, {17, -3}, {5, 1}, {99, 7}, {42, -1}, {17, 3}};
  KSet a = fresh(100, 8, 9);
  for (auto [c, d] : updates) a.update(c, d);
  rng::SplitMix64 g(4);
  for (int rep = 0; rep < 10; ++rep) {
    rng::shuffle(updates.data(), updates.size(), g);
    KSet b = fresh(100, 8, 9);
    for (auto [c, d] : updates) b.update(c, d);
    CHECK(a.state_equal(b));
  }
}

TEST_CASE("five distinct coordinates are recovered exactly") {
  KSet s = fresh(1000, 8, 5);
  oracles::DenseVectorAccumulator ref(1000);
  for (auto [c, d] : std::vector<std::pair<std::uint64_t, std::int64_t>>{
           {10, 4}, {20, -2}, {30, 1}, {700, 11}, {999, -8}}) {
    s.update(c, d);
    ref.update(c, d);
  }
  auto q = s.query();
  REQUIRE(q.ok);
  CHECK(q.items == ref.support());
}

TEST_CASE("empty sketch returns the empty vector") {
  auto q = fresh(50, 4, 2).query();
  CHECK(q.ok);
  CHECK(q.items.empty());
}

TEST_CASE("support exactly k is recovered across seeds") {
  const std::uint32_t k = 16;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    KSet s(10000, k, 0.01, seed);
    oracles::DenseVectorAccumulator ref(10000);
    rng::SplitMix64 g(seed * 7 + 3);
    while (ref.support_size() < k) {
      std::uint64_t c = g.next() % 10000;
      std::int64_t d = static_cast<std::int64_t>(g.next() % 9) - 4;
      if (d == 0) d = 5;
      s.update(c, d);
      ref.update(c, d);
    }
    auto q = s.query();
    REQUIRE(q.ok);
    CHECK(q.items == ref.support());
  }
}

TEST_CASE("support far above k fails nearly always") {
  const std::uint32_t k = 16;
  int fails = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    KSet s(10000, k, 0.01, 5000 + t);
    rng::SplitMix64 g(t);
    for (std::uint32_t i = 0; i < 4 * k; ++i)
      s.update((g.next() % 9000) + i, 1 + static_cast<std::int64_t>(g.next() % 3));
    if (!s.query().ok) ++fails;
  }
  CHECK(fails >= trials * 99 / 100);
}

TEST_CASE("state is linear: concatenation equals cell-wise merge") {
  rng::SplitMix64 g(77);
  for (int rep = 0; rep < 50; ++rep) {
    KSet joint = fresh(500, 8, rep);
    KSet part1 = fresh(500, 8, rep);
    KSet part2 = fresh(500, 8, rep);
    for (int u = 0; u < 40; ++u) {
      std::uint64_t c = g.next() % 500;
      std::int64_t d = static_cast<std::int64_t>(g.next() % 7) - 3;
      joint.update(c, d);
      (u % 2 ? part1 : part2).update(c, d);
    }
    part1.merge(part2);
    CHECK(joint.state_equal(part1));
  }
}

TEST_CASE("random sparse streams recover exactly with rare failures") {
  // final support <= k by construction: persistent coords plus cancelling churn
  const std::uint32_t k = 24;
  int fails = 0;
  for (int t = 0; t < 1000; ++t) {
    KSet s(4096, k, 0.01, 100000 + t);
    oracles::DenseVectorAccumulator ref(4096);
    rng::SplitMix64 g(t * 13 + 1);
    int target = 1 + static_cast<int>(g.next() % k);
    for (int u = 0; u < target; ++u) {
      std::uint64_t c = g.next() % 4096;
      std::int64_t d = static_cast<std::int64_t>(g.next() % 9) - 4;
      if (d == 0) d = 1;
      s.update(c, d);
      ref.update(c, d);
    }
    for (int u = 0; u < 2 * target; ++u) {
      std::uint64_t c = g.next() % 4096;
      std::int64_t d = (g.next() & 1) ? 2 : -5;
      s.update(c, d);
      ref.update(c, d);
      s.update(c, -d);
      ref.update(c, -d);
    }
    auto q = s.query();
    if (!q.ok) {
      ++fails;
      continue;
    }
    CHECK(q.items == ref.support());
  }
  CHECK(fails <= 10);
}

TEST_CASE("cell count stays within the stated budget") {
  for (std::uint32_t k : {4u, 16u, 64u, 256u}) {
    KSet s(100000, k, 0.01, 3);
    CHECK(s.cell_count() <= KSet::cell_bound(k, 0.01));
  }
}

TEST_CASE("coordinates outside the universe are rejected") {
  KSet s = fresh(100, 4, 1);
  CHECK_THROWS_AS(s.update(100, 1), DomainError);
}

TEST_CASE("serialization round-trips the state") {
  KSet s = fresh(300, 8, 21);
  s.update(5, 9);
  s.update(250, -4);
  std::stringstream buf;
  s.save(buf);
  KSet t = KSet::load(buf);
  CHECK(s.state_equal(t));
  auto q = t.query();
  REQUIRE(q.ok);
  CHECK(q.items.size() == 2);
}
