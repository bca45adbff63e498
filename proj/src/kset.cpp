#include "fsketch/kset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "fsketch/rng.hpp"

namespace fsketch {

namespace {

constexpr std::uint64_t kFpPrime = (1ull << 61) - 1;

std::uint64_t mod_fp(unsigned __int128 v) {
  return static_cast<std::uint64_t>(v % kFpPrime);
}

// fp_sum contribution of `delta` copies of fingerprint g, delta signed
std::uint64_t fp_term(std::uint64_t g, std::int64_t delta) {
  unsigned __int128 mag =
      static_cast<unsigned __int128>(g) *
      static_cast<unsigned __int128>(delta < 0 ? -(unsigned long long)delta
                                               : (unsigned long long)delta);
  std::uint64_t m = mod_fp(mag);
  return delta < 0 ? (kFpPrime - m) % kFpPrime : m;
}

std::uint32_t auto_rows(std::uint32_t capacity, double fail_prob) {
  double kd = static_cast<double>(capacity) / std::max(fail_prob, 1e-12);
  double r = std::ceil(std::log2(std::max(kd, 2.0)) / 3.0);
  if (r < 3.0) r = 3.0;
  if (r > 8.0) r = 8.0;
  return static_cast<std::uint32_t>(r);
}

}  // namespace

KSet::KSet(std::uint64_t universe, std::uint32_t capacity, double fail_prob,
           std::uint64_t seed, KSetConfig cfg)
    : universe_(universe), capacity_(capacity), seed_(seed) {
  if (universe == 0) throw ConfigError("KSet universe must be positive");
  if (capacity == 0) throw ConfigError("KSet capacity must be positive");
  if (!(fail_prob > 0.0 && fail_prob < 1.0))
    throw ConfigError("KSet fail probability must lie in (0,1)");
  rows_ = cfg.rows ? cfg.rows : auto_rows(capacity, fail_prob);
  buckets_ = static_cast<std::uint64_t>(
      std::ceil(cfg.bucket_factor * static_cast<double>(capacity)));
  if (buckets_ < 2) buckets_ = 2;
  cells_.assign(static_cast<std::size_t>(rows_) * buckets_, Cell{});
}

std::uint64_t KSet::cell_bound(std::uint32_t capacity, double fail_prob) {
  double kd = static_cast<double>(capacity) / std::max(fail_prob, 1e-12);
  return static_cast<std::uint64_t>(
      std::ceil(4.0 * capacity * std::max(std::log2(kd), 1.0)) + 16);
}

std::uint64_t KSet::bucket_of(std::uint32_t row, std::uint64_t coord) const {
  std::uint64_t h = rng::mix64(seed_, row + 1, coord);
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(h) * buckets_) >> 64);
}

std::uint64_t KSet::fingerprint(std::uint64_t coord) const {
  std::uint64_t g = rng::mix64(seed_ ^ 0x66696e6765727072ull, coord) % kFpPrime;
  return g ? g : 1;
}

void KSet::update(std::uint64_t coord, std::int64_t delta) {
  if (coord >= universe_) throw DomainError("KSet coordinate outside universe");
  if (delta == 0) return;
  std::uint64_t g = fingerprint(coord);
  std::int64_t weighted = checked_mul(static_cast<std::int64_t>(coord), delta);
  std::uint64_t fpt = fp_term(g, delta);
  for (std::uint32_t r = 0; r < rows_; ++r) {
    Cell& c = cells_[r * buckets_ + bucket_of(r, coord)];
    c.count = checked_add(c.count, delta);
    c.index_sum = checked_add(c.index_sum, weighted);
    c.fp_sum = (c.fp_sum + fpt) % kFpPrime;
  }
}

KSet::Query KSet::query() const {
  std::vector<Cell> work = cells_;
  std::vector<std::pair<std::uint64_t, std::int64_t>> out;

  auto subtract = [&](std::uint64_t coord, std::int64_t value) {
    std::uint64_t g = fingerprint(coord);
    std::int64_t weighted = static_cast<std::int64_t>(coord) * value;
    std::uint64_t fpt = fp_term(g, -value);
    for (std::uint32_t r = 0; r < rows_; ++r) {
      Cell& c = work[r * buckets_ + bucket_of(r, coord)];
      c.count -= value;
      c.index_sum -= weighted;
      c.fp_sum = (c.fp_sum + fpt) % kFpPrime;
    }
  };

  // peel 1-sparse cells until fixpoint
  bool progressed = true;
  std::uint64_t guard = cells_.size() * 4 + 16;
  while (progressed && guard--) {
    progressed = false;
    for (std::size_t idx = 0; idx < work.size(); ++idx) {
      const Cell& c = work[idx];
      if (c.count == 0) continue;
      if (c.index_sum % c.count != 0) continue;
      std::int64_t coord_s = c.index_sum / c.count;
      if (coord_s < 0 || static_cast<std::uint64_t>(coord_s) >= universe_)
        continue;
      std::uint64_t coord = static_cast<std::uint64_t>(coord_s);
      if (c.fp_sum != fp_term(fingerprint(coord), c.count)) continue;
      std::int64_t value = c.count;
      out.emplace_back(coord, value);
      subtract(coord, value);
      progressed = true;
    }
  }

  for (const Cell& c : work) {
    if (c.count != 0 || c.index_sum != 0 || c.fp_sum != 0)
      return Query{};  // residual mass: Fail
  }
  if (out.size() > capacity_) return Query{};  // support exceeded the budget

  std::sort(out.begin(), out.end());
  // duplicates can only appear through fingerprint collisions; reject them
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].first == out[i - 1].first) return Query{};
  Query q;
  q.ok = true;
  q.items = std::move(out);
  return q;
}

void KSet::merge(const KSet& other) {
  if (other.seed_ != seed_ || other.rows_ != rows_ || other.buckets_ != buckets_ ||
      other.universe_ != universe_)
    throw DomainError("KSet merge requires identically configured sketches");
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    cells_[i].count = checked_add(cells_[i].count, other.cells_[i].count);
    cells_[i].index_sum = checked_add(cells_[i].index_sum, other.cells_[i].index_sum);
    cells_[i].fp_sum = (cells_[i].fp_sum + other.cells_[i].fp_sum) % kFpPrime;
  }
}

void KSet::save(std::ostream& out) const {
  auto put_u64 = [&](std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  };
  put_u64(universe_);
  put_u64(capacity_);
  put_u64(rows_);
  put_u64(buckets_);
  put_u64(seed_);
  out.write(reinterpret_cast<const char*>(cells_.data()),
            static_cast<std::streamsize>(cells_.size() * sizeof(Cell)));
}

KSet KSet::load(std::istream& in) {
  auto get_u64 = [&]() {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  std::uint64_t universe = get_u64();
  std::uint64_t capacity = get_u64();
  std::uint64_t rows = get_u64();
  std::uint64_t buckets = get_u64();
  std::uint64_t seed = get_u64();
  KSetConfig cfg;
  cfg.rows = static_cast<std::uint32_t>(rows);
  cfg.bucket_factor =
      static_cast<double>(buckets) / static_cast<double>(capacity);
  KSet k(universe, static_cast<std::uint32_t>(capacity), 0.01, seed, cfg);
  k.buckets_ = buckets;
  k.cells_.assign(static_cast<std::size_t>(rows) * buckets, Cell{});
  in.read(reinterpret_cast<char*>(k.cells_.data()),
          static_cast<std::streamsize>(k.cells_.size() * sizeof(Cell)));
  if (!in) throw FormatError("truncated KSet blob", 0);
  return k;
}

bool KSet::state_equal(const KSet& other) const {
  if (other.cells_.size() != cells_.size()) return false;
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (cells_[i].count != other.cells_[i].count) return false;
    if (cells_[i].index_sum != other.cells_[i].index_sum) return false;
    if (cells_[i].fp_sum != other.cells_[i].fp_sum) return false;
  }
  return true;
}

}  // namespace fsketch
