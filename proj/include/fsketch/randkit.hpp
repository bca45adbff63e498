#pragma once

#include <cstdint>
#include <vector>

#include "fsketch/common.hpp"
#include "fsketch/rng.hpp"

namespace fsketch {

bool is_prime_u64(std::uint64_t n);
std::uint64_t next_prime_at_least(std::uint64_t n);

/// k-wise independent hash family realized as a degree-(d-1) polynomial over a
/// prime field. Evaluation is a pure function of (seed, degree, key); the same
/// seed reproduces the same hash sequence on every platform.
class HashFamily {
 public:
  /// prime_override = 0 picks the smallest prime >= max(universe, 2^31).
  /// Small primes are allowed for statistical tests (universe must fit).
  static HashFamily make(std::uint64_t seed, std::uint32_t degree,
                         std::uint64_t universe, std::uint64_t prime_override = 0);

  std::uint64_t eval(std::uint64_t key) const;  // in [0, prime)

  std::uint64_t seed() const { return seed_; }
  std::uint32_t degree() const { return degree_; }
  std::uint64_t prime() const { return prime_; }
  std::uint64_t universe() const { return universe_; }
  const std::vector<std::uint64_t>& coefficients() const { return coeff_; }

  /// Threshold for subsampling with probability `prob`: accept key iff
  /// eval(key) < threshold. Exposed so callers can precompute per level.
  std::uint64_t accept_threshold(double prob) const;

 private:
  std::uint64_t seed_ = 0;
  std::uint32_t degree_ = 1;
  std::uint64_t prime_ = 0;
  std::uint64_t universe_ = 0;
  std::vector<std::uint64_t> coeff_;  // degree entries, coeff_[0] = constant term
};

std::uint64_t hash_eval(const HashFamily& family, std::uint64_t key);

/// Pr[true] = min(prob, 1) over the seed; deterministic per (family, key).
bool subsample_decision(const HashFamily& family, std::uint64_t key, double prob);

/// Draws z >= 1 with Pr[z < x] = 1 - 1/x^p via the continuous inversion
/// z = u^(-1/p). z(i,j) is a pure function of (seed, i, j); the implicit
/// n-by-k table is never materialized.
class PInverseSampler {
 public:
  PInverseSampler(std::uint64_t seed, double p);
  double draw(std::uint64_t i, std::uint64_t j) const;
  double p() const { return p_; }

 private:
  std::uint64_t seed_;
  double p_;
  double inv_p_;
};

}  // namespace fsketch
