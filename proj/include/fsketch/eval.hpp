#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fsketch/streams.hpp"
#include "fsketch/transform.hpp"

namespace fsketch::eval {

/// Dense reference: accumulated M = f(A), its top-k factor U, and the
/// optimal residual, all computed without sketches.
struct DenseEval {
  Eigen::MatrixXd m;
  Eigen::MatrixXd u;          // n x k
  double opt_residual_sq = 0;  // ||M - U U^T M||_F^2
  double m_fro_sq = 0;
};

DenseEval dense_eval(const streams::StreamMeta& meta,
                     const std::vector<streams::UpdateEvent>& events,
                     const Transform& f, int k, int threads = 0);

/// ||M - L L^T M||_F^2 for an orthonormal L, via the Pythagorean identity.
double residual_sq(const Eigen::MatrixXd& m, const Eigen::MatrixXd& l);

/// ||M - LL^T M||_F / ||M - UU^T M||_F; validated to be >= 1 - 1e-9.
double error_ratio(const DenseEval& ref, const Eigen::MatrixXd& l);

/// ||M||_{1,2} = sqrt(sum_j ||M_{*,j}||_1^2); dominates the Frobenius norm.
double norm_12(const Eigen::MatrixXd& m);

/// Uniform-column baseline: extract num_cols columns of A in one pass and
/// take the top-k left singular vectors of the transformed submatrix.
Eigen::MatrixXd uniform_baseline(const streams::ReplayableStream& stream,
                                 const Transform& f, int k, int num_cols,
                                 std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV contract (schema v1): fixed header and row formatting so runs with the
// same seed are byte-identical.

struct EvalRecord {
  std::string dataset;
  std::uint64_t n = 0;
  int k = 0;
  double budget = 0.0;  // sketch bytes / dense bytes requested (0 if unset)
  int gamma = 0;        // sweep knob (0 if unset)
  std::string variant;
  std::string seed;     // numeric or "avg"
  double space_ratio = 0.0;
  double error_ratio = 0.0;
  double baseline_error_ratio = 0.0;  // 0 when not computed
  std::int64_t wall_ms = 0;
};

std::string csv_header();
std::string csv_row(const EvalRecord& r);

}  // namespace fsketch::eval
