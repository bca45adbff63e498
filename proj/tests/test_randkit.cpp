#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fsketch/randkit.hpp"

using namespace fsketch;

TEST_CASE("degree-1 polynomial is the constant coefficient") {
  HashFamily f = HashFamily::make(42, 1, 1000);
  std::uint64_t c = f.coefficients()[0];
  for (std::uint64_t key : {0ull, 1ull, 37ull, 999ull}) CHECK(f.eval(key) == c);
}

TEST_CASE("hash evaluation is deterministic") {
  HashFamily a = HashFamily::make(7, 5, 1 << 20);
  HashFamily b = HashFamily::make(7, 5, 1 << 20);
  for (std::uint64_t key = 0; key < 200; ++key) CHECK(a.eval(key) == b.eval(key));
}

TEST_CASE("degree-2 evaluation matches a direct Horner oracle") {
  HashFamily f = HashFamily::make(11, 2, 101, /*prime_override=*/101);
  const auto& c = f.coefficients();
  for (std::uint64_t key = 0; key < 101; ++key) {
    std::uint64_t expect = (c[1] * key + c[0]) % 101;
    CHECK(f.eval(key) == expect);
  }
}

TEST_CASE("out-of-universe keys are rejected") {
  HashFamily f = HashFamily::make(3, 2, 100);
  CHECK_THROWS_AS(f.eval(100), DomainError);
}

TEST_CASE("subsample at prob 1 accepts everything") {
  HashFamily f = HashFamily::make(5, 8, 100000);
  for (std::uint64_t key = 0; key < 1000; ++key)
    CHECK(subsample_decision(f, key, 1.0));
}

TEST_CASE("subsample acceptance rate tracks the probability") {
  HashFamily f = HashFamily::make(123, 12, 100000);
  int accepted = 0;
  for (std::uint64_t key = 0; key < 100000; ++key)
    if (subsample_decision(f, key, 0.5)) ++accepted;
  double rate = accepted / 1e5;
  CHECK(rate == doctest::Approx(0.5).epsilon(0.02));

  // repeat query at the same level gives the same answer
  for (std::uint64_t key = 0; key < 100; ++key)
    CHECK(subsample_decision(f, key, 0.5) == subsample_decision(f, key, 0.5));
}

TEST_CASE("nonpositive probability is rejected") {
  HashFamily f = HashFamily::make(3, 2, 100);
  CHECK_THROWS_AS(f.accept_threshold(0.0), ConfigError);
}

TEST_CASE("p-inverse draws satisfy the defining tail") {
  // p=1: Pr[z >= 2] = 1/2 exactly by the CDF
  PInverseSampler s(99, 1.0);
  int ge2 = 0, ge10 = 0;
  const int trials = 1000000;
  for (int t = 0; t < trials; ++t) {
    double z = s.draw(t, 0);
    if (z >= 2.0) ++ge2;
    if (z >= 10.0) ++ge10;
  }
  CHECK(ge2 / static_cast<double>(trials) == doctest::Approx(0.5).epsilon(0.01));
  CHECK(ge10 / static_cast<double>(trials) == doctest::Approx(0.1).epsilon(0.03));
  CHECK(s.draw(3, 4) == s.draw(3, 4));
  CHECK(s.draw(0, 0) >= 1.0);
}

TEST_CASE("p-inverse empirical CDF is close for several p") {
  const int trials = 1000000;
  for (double p : {0.5, 1.0, 2.0}) {
    PInverseSampler s(7, p);
    std::vector<double> z(trials);
    for (int t = 0; t < trials; ++t) z[t] = s.draw(t, 1);
    std::sort(z.begin(), z.end());
    // Kolmogorov-Smirnov distance against F(x) = 1 - x^-p
    double ks = 0.0;
    for (int t = 0; t < trials; t += 97) {
      double fx = 1.0 - std::pow(z[t], -p);
      double emp = (t + 1) / static_cast<double>(trials);
      ks = std::max(ks, std::fabs(fx - emp));
    }
    CHECK(ks < 0.01);
  }
}

TEST_CASE("low-degree tuples are jointly uniform over seeds") {
  // chi-square over (Z_5)^d for d-tuples of distinct keys, many seeds
  const std::uint64_t prime = 5;
  for (std::uint32_t d = 2; d <= 4; ++d) {
    const int seeds = 40000;
    std::vector<int> buckets(static_cast<std::size_t>(std::pow(prime, d)), 0);
    std::vector<std::uint64_t> keys = {0, 1, 3, 4};
    for (int s = 0; s < seeds; ++s) {
      HashFamily f = HashFamily::make(1000 + s, d, prime, prime);
      std::size_t idx = 0;
      for (std::uint32_t t = 0; t < d; ++t) idx = idx * prime + f.eval(keys[t]);
      ++buckets[idx];
    }
    double expect = seeds / static_cast<double>(buckets.size());
    double chi2 = 0.0;
    for (int b : buckets) chi2 += (b - expect) * (b - expect) / expect;
    // dof = 5^d - 1; allow a generous 5-sigma band
    double dof = static_cast<double>(buckets.size() - 1);
    CHECK(chi2 < dof + 5.0 * std::sqrt(2.0 * dof));
  }
}

TEST_CASE("prime search lands on primes at least the floor") {
  CHECK(next_prime_at_least(100) == 101);
  CHECK(is_prime_u64(next_prime_at_least(1ull << 31)));
  CHECK(next_prime_at_least(1ull << 31) >= (1ull << 31));
}
