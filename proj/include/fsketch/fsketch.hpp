#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "fsketch/common.hpp"
#include "fsketch/kset.hpp"
#include "fsketch/randkit.hpp"
#include "fsketch/transform.hpp"

namespace fsketch {

/// Per-level recovery backend.
///  - kset:   blind sparse recovery, (count, index_sum, fingerprint) cells.
///  - counts: plain count cells; decoding recomputes the subsample membership
///    from the level hash and peels with known support. One word per cell,
///    used by the space-constrained pipeline profiles.
enum class LevelBackend { kset, counts };

struct LogSumParams {
  std::uint64_t universe = 0;
  double epsilon = 0.25;
  double delta = 0.1;
  int power_c = 1;

  // 0 = auto: eps^-2 * log2(universe/delta)^gamma_log_exp
  double gamma = 0.0;
  int gamma_log_exp = 1;
  // 0 = auto: ceil(log2 universe) + 2
  std::uint32_t levels = 0;
  // 0 = auto: C * eps^-2 * log2^2(universe/delta), capped at the universe
  std::uint32_t kset_capacity = 0;
  double capacity_const = 8.0;

  std::uint32_t kset_rows = 0;  // 0 = auto
  double kset_bucket_factor = 2.0;
  std::uint32_t hash_degree = 0;  // 0 = auto: ceil(log2 universe)
  bool collapse_saturated_levels = false;  // keep one p=1 level instead of many
  LevelBackend backend = LevelBackend::kset;
  std::uint32_t fp_scale_log2 = 40;

  LogSumParams resolved() const;  // fills in the auto fields

  /// Space-constrained profile used by the pipelines: a single sampled level
  /// sized to `bytes_per_sketch` of cell payload.
  static LogSumParams budgeted(std::uint64_t universe, double bytes_per_sketch,
                               LevelBackend backend, std::uint32_t fp_scale_log2,
                               double epsilon, double delta);
};

/// Decoded subsample of one stream vector: the densest level whose recovery
/// structure succeeded, the level's inclusion probability, and the recovered
/// (coordinate, fixed-point value) pairs.
struct DecodedSample {
  bool ok = false;
  int level = -1;
  double prob = 0.0;
  std::vector<std::pair<std::uint64_t, std::int64_t>> items;
};

/// Level-sampling machinery shared by LogSum and the matrix-product sketch:
/// Theta(log n) geometric subsampling levels, each backed by a linear
/// recovery structure. The update guard is supplied by the caller.
class LevelSketch {
 public:
  LevelSketch(const LogSumParams& params, std::uint64_t seed);

  void update_fp(std::uint64_t coord, std::int64_t delta_fp);

  /// Smallest (densest) non-failing level. `membership_guard` must mirror the
  /// guard applied at update time (counts backend re-derives the support).
  DecodedSample decode(
      const std::function<bool(std::uint64_t)>& membership_guard = nullptr) const;

  std::uint32_t level_count() const { return static_cast<std::uint32_t>(levels_.size()); }
  double level_prob(std::uint32_t j) const { return levels_[j].prob; }
  /// Exact decode of a single level (test hook); Fail -> nullopt.
  std::optional<std::vector<std::pair<std::uint64_t, std::int64_t>>> level_query(
      std::uint32_t j,
      const std::function<bool(std::uint64_t)>& membership_guard = nullptr) const;
  bool level_member(std::uint32_t j, std::uint64_t coord) const;

  const LogSumParams& params() const { return params_; }
  std::uint64_t update_cell_touches() const { return touches_; }
  std::size_t payload_bytes() const;

  void save(std::ostream& out) const;
  static LevelSketch load(std::istream& in);

  bool state_equal(const LevelSketch& other) const;

 private:
  struct Level {
    double prob = 1.0;
    std::uint64_t accept_thr = 0;
    HashFamily hash;
    // exactly one of the two stores is active, per params().backend
    std::optional<KSet> kset;
    std::vector<std::int64_t> counts;
    std::uint32_t counts_rows = 0;
    std::uint64_t counts_buckets = 0;
    std::uint64_t counts_seed = 0;
    std::uint32_t counts_capacity = 0;
  };

  LevelSketch() = default;
  std::optional<std::vector<std::pair<std::uint64_t, std::int64_t>>> decode_level(
      const Level& lv, const std::function<bool(std::uint64_t)>& guard) const;

  LogSumParams params_;
  std::uint64_t seed_ = 0;
  std::vector<Level> levels_;
  mutable std::uint64_t touches_ = 0;
};

/// Single-pass sketch of <x, f(y)> for f(y) = log^c(|y|+1), with x fixed and
/// y arriving as a turnstile stream.
class LogSumSketch {
 public:
  LogSumSketch(std::vector<double> x, LogSumParams params, std::uint64_t seed);

  void update(std::uint64_t coord, double delta);
  void update_fp(std::uint64_t coord, std::int64_t delta_fp);

  /// (1/p_j) * sum_{i in S_j} x_i log^c(|v_i|+1) at the densest non-failing
  /// level; throws EstimationUnavailable when every level fails.
  double query() const;

  const LevelSketch& levels() const { return core_; }
  const std::vector<double>& x() const { return x_; }
  std::uint64_t update_count() const { return updates_; }

  void save(std::ostream& out) const;
  static LogSumSketch load(std::istream& in);

 private:
  LogSumSketch(LevelSketch core, std::vector<double> x);
  std::vector<double> x_;
  LevelSketch core_;
  std::uint64_t updates_ = 0;
};

struct PolySumParams {
  std::uint64_t universe = 0;
  double p = 1.0;
  double epsilon = 0.25;
  std::uint32_t copies = 0;      // 0 = auto: ceil(16 / eps^2)
  double copies_const = 16.0;
  std::uint32_t cs_rows = 0;     // 0 = auto: max(5, ceil(log2 universe)/2)
  std::uint64_t cs_cols = 0;     // 0 = auto: ceil(C' * eps^-2 * log2^2 universe)
  double cols_const = 4.0;
  std::uint32_t fp_scale_log2 = 20;
  double z_clamp = 1.7179869184e10;  // 2^34, guards the fixed-point encoding

  PolySumParams resolved() const;
};

/// Single-pass sketch of <x, |y|^p> for p in (0,2]: x is split into positive
/// and negative parts, each logical coordinate (i,j) of an implicit n-by-k
/// table carries |x_i|^(1/p) z(i,j) y_i inside a count-sketch, and the query
/// reads the (k/2)-th largest decoded magnitude z and returns z^p / 2.
class PolySumSketch {
 public:
  PolySumSketch(std::vector<double> x, PolySumParams params, std::uint64_t seed);

  void update(std::uint64_t coord, double delta);
  /// Stream values arrive in the file's fixed-point scale; the count-sketch
  /// re-encodes internally, so the caller's scale is needed here.
  void update_fp(std::uint64_t coord, std::int64_t delta_fp,
                 std::uint32_t stream_scale_log2);

  double query() const;

  const PolySumParams& params() const { return params_; }
  std::uint64_t update_cell_touches() const { return touches_; }
  bool negative_side_empty() const { return neg_.support.empty(); }
  std::size_t payload_bytes() const;

  void save(std::ostream& out) const;
  static PolySumSketch load(std::istream& in);

 private:
  struct Side {
    std::vector<double> weight;           // |x_i| on this side, full length
    std::vector<std::uint64_t> support;   // coords with weight > 0
    std::vector<__int128> cells;          // cs_rows x cs_cols
    PInverseSampler sampler{0, 1.0};
    std::uint64_t seed = 0;
    bool allocated = false;
  };

  PolySumSketch() : pos_(), neg_() {}
  void side_update(Side& s, std::uint64_t coord, double delta);
  double side_query(const Side& s) const;

  PolySumParams params_;
  std::uint64_t seed_ = 0;
  Side pos_, neg_;
  mutable std::uint64_t touches_ = 0;
};

}  // namespace fsketch
