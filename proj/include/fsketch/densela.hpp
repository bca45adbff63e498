#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "fsketch/common.hpp"

namespace fsketch::la {

enum class TransformKind { countsketch, gaussian, countsketch_then_gaussian, srht };

/// Oblivious sketching transform, applied without materializing the full
/// operator where the structure allows it.
struct SketchTransform {
  TransformKind kind = TransformKind::countsketch;
  Eigen::Index rows = 0;  // s
  Eigen::Index cols = 0;  // n
  std::uint64_t seed = 0;

  static SketchTransform make(TransformKind kind, Eigen::Index rows,
                              Eigen::Index cols, std::uint64_t seed);

  /// T * M for M with rows() == cols.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const;

  /// Dense realization (small transforms only; used for weight vectors).
  Eigen::MatrixXd materialize() const;

  // countsketch internals: column j maps to row bucket(j) with sign(j)
  Eigen::Index bucket(Eigen::Index j) const;
  double sign(Eigen::Index j) const;
};

/// [max(S,0); max(-S,0)] stacked, so S = top - bottom exactly.
Eigen::MatrixXd split_pos_neg(const Eigen::MatrixXd& s);

/// Orthonormal basis of span(Y) with rank revealed by column-pivoted QR.
Eigen::MatrixXd qr_basis(const Eigen::MatrixXd& y, double tol = 1e-10);

/// Top-k left singular vectors and singular values.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> topk_svd(const Eigen::MatrixXd& m, int k);

/// Leverage scores over the columns of E: with thin SVD E = U S V^T,
/// score(i) = ||row i of V||^2; scores sum to the numerical rank.
Eigen::VectorXd leverage_scores(const Eigen::MatrixXd& e, double tol = 1e-10);

struct LeverageSample {
  std::vector<Eigen::Index> indices;   // s draws, i.i.d. with replacement
  Eigen::VectorXd rescale;             // 1 / sqrt(q_i * s) per draw
};
LeverageSample leverage_sample(const Eigen::VectorXd& q, int s, std::uint64_t seed);

/// Count of singular values above tol * sigma_max.
int rank_of(const Eigen::MatrixXd& m, double tol);

}  // namespace fsketch::la
