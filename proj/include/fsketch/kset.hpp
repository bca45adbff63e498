#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "fsketch/common.hpp"

namespace fsketch {

struct KSetConfig {
  std::uint32_t rows = 0;        // 0 = auto from (capacity, fail_prob)
  double bucket_factor = 2.0;    // buckets per row = ceil(factor * capacity)
};

/// Exact sparse-vector recovery under a turnstile stream. Every cell is a
/// linear function of the underlying vector, so update order never matters.
/// query() returns the vector exactly when its support fits the capacity
/// budget, and Fail otherwise (failure probability <= delta over seeds).
///
/// Cells hold (count, index_sum, fingerprint_sum); decoding peels 1-sparse
/// cells across rows until the structure drains or stalls.
class KSet {
 public:
  KSet(std::uint64_t universe, std::uint32_t capacity, double fail_prob,
       std::uint64_t seed, KSetConfig cfg = {});

  void update(std::uint64_t coord, std::int64_t delta);

  struct Query {
    bool ok = false;
    // (coord, value) sorted by coord; empty vector with ok=true means v = 0
    std::vector<std::pair<std::uint64_t, std::int64_t>> items;
  };
  Query query() const;

  /// Cell-wise combination; state(U1 || U2) == merge of the two halves.
  void merge(const KSet& other);

  bool state_equal(const KSet& other) const;

  std::uint64_t universe() const { return universe_; }
  std::uint32_t capacity() const { return capacity_; }
  std::uint32_t rows() const { return rows_; }
  std::uint64_t buckets_per_row() const { return buckets_; }
  std::uint64_t cell_count() const { return cells_.size(); }
  std::size_t byte_size() const { return cells_.size() * sizeof(Cell); }

  /// Cell-count budget the construction must stay under, O(k log(k/delta)).
  static std::uint64_t cell_bound(std::uint32_t capacity, double fail_prob);

  void save(std::ostream& out) const;
  static KSet load(std::istream& in);

 private:
  struct Cell {
    std::int64_t count = 0;
    std::int64_t index_sum = 0;
    std::uint64_t fp_sum = 0;  // mod fingerprint prime
  };

  std::uint64_t bucket_of(std::uint32_t row, std::uint64_t coord) const;
  std::uint64_t fingerprint(std::uint64_t coord) const;

  std::uint64_t universe_;
  std::uint32_t capacity_;
  std::uint32_t rows_;
  std::uint64_t buckets_;
  std::uint64_t seed_;
  std::vector<Cell> cells_;  // rows_ x buckets_, row-major
};

}  // namespace fsketch
