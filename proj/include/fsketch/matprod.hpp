#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fsketch/fsketch.hpp"
#include "fsketch/streams.hpp"
#include "fsketch/transform.hpp"

namespace fsketch {

/// How the n x k grid of vector sketches shares state within a row of A.
///  - per_cell:   hash seeds are shared across the k cells of a row, every
///    cell keeps its own recovery structure (the default contract).
///  - shared_row: one recovery structure per row serves all k estimates; the
///    space-constrained profile the multi-pass pipelines run on.
enum class CellSharing { per_cell, shared_row };

struct MatProdParams {
  CellSharing sharing = CellSharing::per_cell;
  bool allow_general_b = false;   // accept real-valued B (generalized path)
  bool square_transform = false;  // estimate with f^2 (row-norm specialization)
  LevelBackend backend = LevelBackend::kset;
  double bytes_per_row_sketch = 0.0;  // > 0 selects the budgeted profile

  // level overrides, 0 = theory defaults
  std::uint32_t levels = 0;
  std::uint32_t kset_capacity = 0;
  double gamma = 0.0;
  std::uint32_t kset_rows = 0;
  double kset_bucket_factor = 2.0;
  bool collapse_saturated_levels = true;
  std::uint32_t fp_scale_log2 = 40;

  PolySumParams poly;  // sizing knobs for poly-transform cells
};

/// Estimate from one decoded level sample: (1/p) sum_i w(i) f(v_i).
template <typename WeightFn>
double sample_estimate(const DecodedSample& d, WeightFn&& weight,
                       const Transform& f, bool squared,
                       std::uint32_t fp_scale_log2) {
  double sum = 0.0;
  for (const auto& [coord, v] : d.items) {
    double w = weight(coord);
    if (w == 0.0) continue;
    double y = fp_to_double(v, fp_scale_log2);
    sum += w * (squared ? f.squared(y) : f(y));
  }
  return sum / d.prob;
}

/// Streaming sketch of Z = f(A) B for a fixed B: one f-inner-product sketch
/// per entry of Z, row-sharded over the update stream.
class MatrixProductSketch {
 public:
  MatrixProductSketch(std::uint64_t n_rows, Eigen::MatrixXd b, Transform f,
                      double epsilon, double delta, std::uint64_t seed,
                      MatProdParams params = {});

  void update(std::uint64_t i, std::uint64_t j, double delta);
  void update_fp(std::uint64_t i, std::uint64_t j, std::int64_t delta_fp);

  /// Apply a whole stream; with transposed=true event (r,c,v) lands on
  /// structure row c at coordinate r. threads=1 is the serial reference,
  /// threads=0 uses the OpenMP default; final state is identical either way.
  void ingest(const std::vector<streams::UpdateEvent>& events, bool transposed,
              int threads = 0);

  struct QueryResult {
    Eigen::MatrixXd z;                // n_rows x k, failed cells are 0
    std::vector<std::uint8_t> mask;   // row-major, 1 = cell failed
    std::uint64_t failed_cells = 0;
  };
  QueryResult query() const;

  /// Shared-row profile only: the decoded sample row i's estimates derive from.
  DecodedSample decode_row(std::uint64_t i) const;

  std::uint64_t n_rows() const { return n_rows_; }
  std::uint64_t universe() const { return universe_; }
  Eigen::Index k() const { return b_.cols(); }
  const Eigen::MatrixXd& b() const { return b_; }
  const Transform& transform() const { return f_; }
  std::uint32_t fp_scale() const { return fp_scale_; }
  bool squared() const { return square_; }

  std::size_t payload_bytes() const;
  std::uint64_t update_count() const { return updates_; }

  bool state_equal(const MatrixProductSketch& other) const;

 private:
  struct PerCellRow {
    struct LevelMeta {
      double prob;
      std::uint64_t accept_thr;
      HashFamily hash;
    };
    std::vector<LevelMeta> levels;
    std::vector<KSet> cells;  // k * levels, cell-major
  };

  LogSumParams level_params(double delta_per_sketch) const;
  void update_log_cell_row(std::uint64_t i, std::uint64_t j, std::int64_t delta_fp);

  std::uint64_t n_rows_;
  std::uint64_t universe_;
  Eigen::MatrixXd b_;
  Transform f_;
  double epsilon_;
  double delta_;
  std::uint64_t seed_;
  MatProdParams params_;
  bool square_;
  std::uint32_t fp_scale_;
  bool poly_cells_;

  std::vector<std::uint8_t> row_guard_;  // universe-indexed, 1 = some B row nonzero
  bool guard_all_ = true;

  std::vector<LevelSketch> shared_rows_;      // shared_row profile
  std::vector<PerCellRow> per_cell_rows_;     // per_cell log profile
  std::vector<PolySumSketch> poly_grid_;      // per_cell poly profile, row-major
  std::uint64_t updates_ = 0;
};

/// Remark-style row-norm sketch: k=1, B = all-ones, estimates with f^2; the
/// query returns (1 +- eps) ||f(A)_{i,*}||_2^2 per row.
class RowNormSketch {
 public:
  RowNormSketch(std::uint64_t n_rows, std::uint64_t n_cols, Transform f,
                double epsilon, double delta, std::uint64_t seed,
                MatProdParams params = {});

  void update(std::uint64_t i, std::uint64_t j, double delta);
  void update_fp(std::uint64_t i, std::uint64_t j, std::int64_t delta_fp);
  void ingest(const std::vector<streams::UpdateEvent>& events, bool transposed,
              int threads = 0);

  struct QueryResult {
    Eigen::VectorXd norms_sq;
    std::vector<std::uint8_t> mask;
  };
  QueryResult query() const;

  const MatrixProductSketch& inner() const { return inner_; }

 private:
  MatrixProductSketch inner_;
};

}  // namespace fsketch
