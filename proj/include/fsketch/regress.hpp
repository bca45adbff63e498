#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "fsketch/densela.hpp"
#include "fsketch/fsketch.hpp"
#include "fsketch/streams.hpp"
#include "fsketch/transform.hpp"

namespace fsketch::regress {

struct RegressionConfig {
  int d = 0;               // feature count, must match the stream's columns
  double epsilon = 0.25;
  int s = 0;               // sketch rows; 0 = ceil(s_const d^2 / eps^2), capped to [d, n]
  double s_const = 4.0;
  la::TransformKind transform = la::TransformKind::gaussian;
  std::uint64_t seed = 1;
  double sketch_bytes_target = 0.0;  // 0 = theory-default level sizing
  LevelBackend backend = LevelBackend::kset;
  int threads = 0;
};

struct RegressionResult {
  Eigen::VectorXd x;
  bool rank_deficient = false;
  int pass_count = 0;
  std::size_t sketch_payload_bytes = 0;
  Eigen::MatrixXd sa;  // sketched S f(A), s x d
  Eigen::VectorXd sb;  // S b, computed exactly
};

/// Sketch-and-solve least squares on the transformed design matrix: one pass
/// builds SA ~= S f(A), then x = argmin || SA x - S b ||_2 (minimum-norm
/// solution when SA is rank deficient).
RegressionResult regress_solve(const streams::ReplayableStream& stream,
                               const Eigen::VectorXd& b,
                               const RegressionConfig& cfg,
                               const Transform& f = Transform::log1p_c(1));

}  // namespace fsketch::regress
