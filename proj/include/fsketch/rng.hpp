#pragma once

#include <cstdint>
#include <cmath>

namespace fsketch::rng {

// splitmix64 finalizer. All randomness in the library is derived from seeds
// through this mixer so results are identical across platforms and runs.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ (b + 0x9e3779b97f4a7c15ull));
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(a, b) ^ (c + 0xd1b54a32d192ed03ull));
}

struct SplitMix64 {
  std::uint64_t state = 0;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
};

// uniform in [0,1)
inline double u01(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// uniform in (0,1]
inline double u01_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

inline double next_u01(SplitMix64& g) { return u01(g.next()); }

// Box-Muller without caching; two uniforms per draw keeps replay trivial.
inline double next_normal(SplitMix64& g) {
  double u1 = u01_open(g.next());
  double u2 = u01(g.next());
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

inline std::uint64_t next_below(SplitMix64& g, std::uint64_t n) {
  // multiply-shift range reduction, deterministic and unbiased enough for
  // shuffles at desk scale
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(g.next()) * n) >> 64);
}

template <typename T>
void shuffle(T* data, std::size_t n, SplitMix64& g) {
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(next_below(g, i));
    T tmp = data[i - 1];
    data[i - 1] = data[j];
    data[j] = tmp;
  }
}

}  // namespace fsketch::rng
