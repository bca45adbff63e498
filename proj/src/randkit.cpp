#include "fsketch/randkit.hpp"

#include <cmath>

namespace fsketch {

namespace {

std::uint64_t mulmod_u64(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(a) * b) % m);
}

std::uint64_t powmod_u64(std::uint64_t a, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  a %= m;
  while (e) {
    if (e & 1) r = mulmod_u64(r, a, m);
    a = mulmod_u64(a, a, m);
    e >>= 1;
  }
  return r;
}

}  // namespace

bool is_prime_u64(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull,
                          23ull, 29ull, 31ull, 37ull}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  // deterministic Miller-Rabin base set for 64-bit integers
  for (std::uint64_t a : {2ull, 3ull, 5ull, 7ull, 11ull, 13ull, 17ull, 19ull,
                          23ull, 29ull, 31ull, 37ull}) {
    std::uint64_t x = powmod_u64(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool witness = true;
    for (int r = 1; r < s; ++r) {
      x = mulmod_u64(x, x, n);
      if (x == n - 1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

std::uint64_t next_prime_at_least(std::uint64_t n) {
  if (n <= 2) return 2;
  if ((n & 1) == 0) ++n;
  while (!is_prime_u64(n)) n += 2;
  return n;
}

HashFamily HashFamily::make(std::uint64_t seed, std::uint32_t degree,
                            std::uint64_t universe, std::uint64_t prime_override) {
  if (degree == 0) throw ConfigError("hash family degree must be positive");
  if (universe == 0) throw ConfigError("hash family universe must be positive");
  HashFamily f;
  f.seed_ = seed;
  f.degree_ = degree;
  f.universe_ = universe;
  if (prime_override != 0) {
    if (!is_prime_u64(prime_override))
      throw ConfigError("prime_override is not prime");
    if (prime_override < universe)
      throw ConfigError("prime modulus must be >= universe");
    f.prime_ = prime_override;
  } else {
    std::uint64_t floor = universe > (1ull << 31) ? universe : (1ull << 31);
    f.prime_ = next_prime_at_least(floor);
  }
  f.coeff_.resize(degree);
  for (std::uint32_t i = 0; i < degree; ++i)
    f.coeff_[i] = rng::mix64(seed, 0x68617368ull, i) % f.prime_;
  return f;
}

std::uint64_t HashFamily::eval(std::uint64_t key) const {
  if (key >= universe_)
    throw DomainError("hash key outside universe");
  // Horner's rule over the prime field
  std::uint64_t x = key % prime_;
  std::uint64_t acc = coeff_[degree_ - 1];
  for (std::uint32_t i = degree_ - 1; i-- > 0;) {
    acc = mulmod_u64(acc, x, prime_);
    acc += coeff_[i];
    if (acc >= prime_) acc -= prime_;
  }
  return acc;
}

std::uint64_t HashFamily::accept_threshold(double prob) const {
  if (prob >= 1.0) return prime_;
  if (prob <= 0.0) throw ConfigError("subsampling probability must be positive");
  double t = prob * static_cast<double>(prime_);
  std::uint64_t thr = static_cast<std::uint64_t>(std::llround(t));
  return thr < prime_ ? thr : prime_;
}

std::uint64_t hash_eval(const HashFamily& family, std::uint64_t key) {
  return family.eval(key);
}

bool subsample_decision(const HashFamily& family, std::uint64_t key, double prob) {
  if (prob >= 1.0) return true;
  return family.eval(key) < family.accept_threshold(prob);
}

PInverseSampler::PInverseSampler(std::uint64_t seed, double p) : seed_(seed), p_(p) {
  if (!(p > 0.0) || p > 2.0)
    throw ConfigError("p-inverse sampler requires p in (0, 2]");
  inv_p_ = 1.0 / p;
}

double PInverseSampler::draw(std::uint64_t i, std::uint64_t j) const {
  double u = rng::u01_open(rng::mix64(seed_, i, j));
  return std::pow(u, -inv_p_);
}

}  // namespace fsketch
