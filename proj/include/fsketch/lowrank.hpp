#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fsketch/densela.hpp"
#include "fsketch/fsketch.hpp"
#include "fsketch/streams.hpp"
#include "fsketch/transform.hpp"

namespace fsketch::lowrank {

enum class AdaptiveVariant { thresholded_eta, experimental_qi };

struct LowRankConfig {
  int k = 10;
  double epsilon = 0.25;
  double delta = 0.1;

  // sampling sizes; 0 = auto (c_s k log2 k, c_1 k log2^2 k, c_2 k / eps)
  int s = 0;
  int d1 = 0;
  int d2 = 0;
  double c_s = 1.0, c_1 = 1.0, c_2 = 1.0, c_eta = 1.0;
  int budget_gamma = 0;  // > 0 forces s = d1 = d2 = gamma (sweep protocol)

  AdaptiveVariant variant = AdaptiveVariant::experimental_qi;
  la::TransformKind transform = la::TransformKind::countsketch;
  std::uint64_t seed = 1;

  // total sketch-cell budget across one pass; 0 = theory-default level sizing
  double sketch_bytes_target = 0.0;
  LevelBackend backend = LevelBackend::counts;
  // columns extracted exactly also answer their own sketch queries exactly
  bool hybrid_exact_columns = true;
  bool oracle_mode = false;   // dense products replace every sketch (ablation)
  bool keep_factors = false;  // retain Q_p / Q_y in the result
  int threads = 0;
};

struct ResolvedDims {
  int s = 0, d1 = 0, d2 = 0;
  double eta = 0.0;
};
ResolvedDims resolve_dims(const LowRankConfig& cfg, std::uint64_t n_rows,
                          std::uint64_t n_cols);

struct StageDiag {
  std::string stage;
  std::size_t sketch_payload_bytes = 0;
  std::size_t workspace_bytes = 0;
  std::uint64_t masked_columns = 0;
  bool uniform_fallback = false;
  Eigen::VectorXd scores;  // stage-dependent diagnostics (test hook)
};

struct ColumnSet {
  std::vector<Eigen::Index> indices;  // sorted, unique
  Eigen::MatrixXd cols;               // f-transformed, n_rows x indices.size()
};

/// Step 1: generalized leverage-score sampling. One sketch pass estimates
/// R f(A) for R = [S+; S-], one extraction pass pulls the sampled columns.
ColumnSet stage1_leverage(const streams::ReplayableStream& stream,
                          const LowRankConfig& cfg, const Transform& f,
                          StageDiag* diag = nullptr,
                          const Eigen::MatrixXd* dense_m = nullptr);

/// Step 2: adaptive sampling by estimated residual distance to span(P);
/// one sketch pass (row norms + projections share it) and one extraction pass.
ColumnSet stage2_adaptive(const streams::ReplayableStream& stream,
                          const LowRankConfig& cfg, const Transform& f,
                          const ColumnSet& p, StageDiag* diag = nullptr,
                          const Eigen::MatrixXd* dense_m = nullptr);

/// Step 3: project onto span(Y) via one sketch pass and take the top-k
/// singular directions there.
Eigen::MatrixXd stage3_solve(const streams::ReplayableStream& stream,
                             const LowRankConfig& cfg, const Transform& f,
                             const ColumnSet& y, StageDiag* diag = nullptr,
                             bool* rank_padded = nullptr,
                             const Eigen::MatrixXd* dense_m = nullptr);

struct LowRankResult {
  Eigen::MatrixXd l;  // n_rows x k, orthonormal
  int pass_count = 0;
  std::vector<StageDiag> stages;
  std::size_t peak_sketch_bytes = 0;
  std::size_t expected_sketch_bytes = 0;
  bool rank_deficient_padded = false;
  std::vector<Eigen::Index> p_columns, y_columns;
  Eigen::MatrixXd q_p, q_y;  // populated when cfg.keep_factors
};

LowRankResult lowrank_run(const streams::ReplayableStream& stream,
                          const LowRankConfig& cfg, const Transform& f);

/// Sketch-cell bytes one pass of the pipeline will allocate under cfg.
std::size_t expected_sketch_bytes(const LowRankConfig& cfg,
                                  std::uint64_t n_rows, std::uint64_t n_cols);

}  // namespace fsketch::lowrank
