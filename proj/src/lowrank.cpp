#include "fsketch/lowrank.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fsketch/ingest.hpp"
#include "fsketch/rng.hpp"

namespace fsketch::lowrank {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using streams::ReplayableStream;
using streams::UpdateEvent;

void require_replayable(const ReplayableStream& stream) {
  if (!stream.replayable())
    throw ConfigError("low-rank pipeline requires a replayable stream");
}

LogSumParams bank_params(const LowRankConfig& cfg, std::uint64_t n_rows,
                         std::uint64_t n_cols) {
  if (cfg.sketch_bytes_target > 0.0) {
    double per_col = cfg.sketch_bytes_target / static_cast<double>(n_cols);
    return LogSumParams::budgeted(n_rows, per_col, cfg.backend, 40, cfg.epsilon,
                                  cfg.delta);
  }
  LogSumParams p;
  p.universe = n_rows;
  p.epsilon = cfg.epsilon;
  p.delta = cfg.delta;
  p.backend = cfg.backend;
  p.collapse_saturated_levels = true;
  return p.resolved();
}

/// One LevelSketch per column of the hidden matrix; the pipeline's sketch
/// passes all run on this bank with the stream fed transposed.
class ColumnBank {
 public:
  ColumnBank(std::uint64_t n_cols, const LogSumParams& params,
             std::uint64_t seed) {
    banks_.reserve(n_cols);
    for (std::uint64_t c = 0; c < n_cols; ++c)
      banks_.emplace_back(params, rng::mix64(seed, 0x636f6cull, c));
  }

  void ingest_events(const ReplayableStream& stream, int threads) {
    std::vector<LevelSketch>& banks = banks_;
    sharded_ingest(stream.events(), /*transposed=*/true, threads,
                   [&banks](std::uint64_t idx, std::uint64_t coord,
                            std::int64_t value) {
                     banks[idx].update_fp(coord, value);
                   });
  }

  DecodedSample decode(std::uint64_t c) const { return banks_[c].decode(); }

  std::size_t payload_bytes() const {
    std::size_t b = 0;
    for (const LevelSketch& s : banks_) b += s.payload_bytes();
    return b;
  }

 private:
  std::vector<LevelSketch> banks_;
};

/// Exact fixed-point accumulation of the selected columns, one pass.
MatrixXd extract_columns(const ReplayableStream& stream, const Transform& f,
                         const std::vector<Index>& indices, int threads) {
  const auto& meta = stream.meta();
  const Index nr = static_cast<Index>(meta.n_rows);
  std::vector<Index> slot(meta.n_cols, -1);
  for (std::size_t t = 0; t < indices.size(); ++t) slot[indices[t]] = t;

  std::vector<std::int64_t> acc(indices.size() * static_cast<std::size_t>(nr), 0);
  stream.for_each([&](const UpdateEvent& e) {
    Index s = slot[e.col];
    if (s < 0) return;
    acc[static_cast<std::size_t>(s) * nr + e.row] += e.value_fp;
  });
  (void)threads;

  MatrixXd out(nr, static_cast<Index>(indices.size()));
  for (std::size_t t = 0; t < indices.size(); ++t)
    for (Index r = 0; r < nr; ++r)
      out(r, static_cast<Index>(t)) =
          f(fp_to_double(acc[t * static_cast<std::size_t>(nr) + r],
                         meta.fp_scale_log2));
  return out;
}

std::vector<Index> dedupe_sorted(std::vector<Index> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

/// Sign-split sketching operator R = [S+; S-] kept in an applyable form.
struct SplitOperator {
  la::SketchTransform s;
  bool countsketch = false;
  MatrixXd dense;  // 2s x n when not countsketch

  Index out_rows() const { return 2 * s.rows; }

  // accumulate w * R(:, l) into acc
  void accumulate(VectorXd& acc, Index l, double w) const {
    if (countsketch) {
      Index b = s.bucket(l);
      if (s.sign(l) > 0)
        acc(b) += w;
      else
        acc(s.rows + b) += w;
    } else {
      acc += w * dense.col(l);
    }
  }

  MatrixXd apply(const MatrixXd& m) const {
    if (countsketch) {
      MatrixXd out = MatrixXd::Zero(2 * s.rows, m.cols());
      for (Index l = 0; l < s.cols; ++l) {
        Index b = s.bucket(l);
        if (s.sign(l) > 0)
          out.row(b) += m.row(l);
        else
          out.row(s.rows + b) += m.row(l);
      }
      return out;
    }
    return dense * m;
  }
};

SplitOperator make_split_operator(const LowRankConfig& cfg, int s_rows,
                                  std::uint64_t n_rows, std::uint64_t salt) {
  SplitOperator op;
  op.s = la::SketchTransform::make(cfg.transform, s_rows,
                                   static_cast<Index>(n_rows),
                                   rng::mix64(cfg.seed, salt));
  op.countsketch = cfg.transform == la::TransformKind::countsketch;
  if (!op.countsketch) op.dense = la::split_pos_neg(op.s.materialize());
  return op;
}

}  // namespace

ResolvedDims resolve_dims(const LowRankConfig& cfg, std::uint64_t n_rows,
                          std::uint64_t n_cols) {
  if (cfg.k < 1) throw ConfigError("low-rank k must be positive");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0))
    throw ConfigError("low-rank epsilon must lie in (0,1)");
  ResolvedDims d;
  double logk = std::max(1.0, std::ceil(std::log2(static_cast<double>(
                                  std::max(cfg.k, 2)))));
  if (cfg.budget_gamma > 0) {
    d.s = d.d1 = d.d2 = cfg.budget_gamma;
  } else {
    d.s = cfg.s > 0 ? cfg.s
                    : static_cast<int>(std::max<double>(cfg.k + 2,
                                                        cfg.c_s * cfg.k * logk));
    d.d1 = cfg.d1 > 0 ? cfg.d1
                      : static_cast<int>(std::max<double>(
                            cfg.k + 2, cfg.c_1 * cfg.k * logk * logk));
    d.d2 = cfg.d2 > 0 ? cfg.d2
                      : static_cast<int>(std::max<double>(
                            2.0, std::ceil(cfg.c_2 * cfg.k / cfg.epsilon)));
  }
  d.s = std::min<int>(d.s, static_cast<int>(n_rows));
  d.d1 = std::min<int>(d.d1, static_cast<int>(n_cols));
  d.d2 = std::min<int>(d.d2, static_cast<int>(n_cols));
  d.eta = cfg.c_eta * (cfg.epsilon * std::sqrt(static_cast<double>(d.d1)) +
                       cfg.epsilon * cfg.epsilon * d.d1);
  return d;
}

std::size_t expected_sketch_bytes(const LowRankConfig& cfg, std::uint64_t n_rows,
                                  std::uint64_t n_cols) {
  LogSumParams p = bank_params(cfg, n_rows, n_cols);
  LevelSketch probe(p, 0);
  return probe.payload_bytes() * n_cols;
}

ColumnSet stage1_leverage(const ReplayableStream& stream, const LowRankConfig& cfg,
                          const Transform& f, StageDiag* diag,
                          const MatrixXd* dense_m) {
  require_replayable(stream);
  const auto& meta = stream.meta();
  ResolvedDims dims = resolve_dims(cfg, meta.n_rows, meta.n_cols);
  const Index n = static_cast<Index>(meta.n_cols);

  StageDiag local;
  local.stage = "stage1_leverage";
  SplitOperator r_op = make_split_operator(cfg, dims.s, meta.n_rows, 0x5231ull);

  MatrixXd e_tilde = MatrixXd::Zero(r_op.out_rows(), n);
  if (cfg.oracle_mode) {
    if (!dense_m) throw ConfigError("oracle mode requires the dense matrix");
    e_tilde = r_op.apply(*dense_m);
  } else {
    LogSumParams lp = bank_params(cfg, meta.n_rows, meta.n_cols);
    ColumnBank bank(meta.n_cols, lp, rng::mix64(cfg.seed, 0x7331ull));
    stream.note_pass();
    bank.ingest_events(stream, cfg.threads);
    local.sketch_payload_bytes = bank.payload_bytes();
    const std::uint32_t scale = lp.fp_scale_log2;
    for (Index i = 0; i < n; ++i) {
      DecodedSample d = bank.decode(i);
      if (!d.ok) {
        ++local.masked_columns;
        continue;
      }
      VectorXd col = VectorXd::Zero(r_op.out_rows());
      for (const auto& [coord, v] : d.items)
        r_op.accumulate(col, static_cast<Index>(coord),
                        f(fp_to_double(v, scale)) / d.prob);
      e_tilde.col(i) = col;
    }
    if (local.masked_columns > meta.n_cols * 9 / 10)
      throw PipelineError("stage1: sketch failed on nearly every column");
  }
  local.workspace_bytes = static_cast<std::size_t>(e_tilde.size()) * sizeof(double);

  VectorXd scores = la::leverage_scores(e_tilde);
  if (!(scores.sum() > 0.0)) {
    local.uniform_fallback = true;
    scores = VectorXd::Ones(n);
  }
  local.scores = scores;

  la::LeverageSample draw =
      la::leverage_sample(scores, dims.d1, rng::mix64(cfg.seed, 0x6431ull));
  ColumnSet p;
  p.indices = dedupe_sorted(draw.indices);
  p.cols = extract_columns(stream, f, p.indices, cfg.threads);
  local.workspace_bytes += static_cast<std::size_t>(p.cols.size()) * sizeof(double);
  if (diag) *diag = std::move(local);
  return p;
}

ColumnSet stage2_adaptive(const ReplayableStream& stream, const LowRankConfig& cfg,
                          const Transform& f, const ColumnSet& p, StageDiag* diag,
                          const MatrixXd* dense_m) {
  require_replayable(stream);
  if (p.indices.empty()) throw ConfigError("stage2 requires a nonempty P");
  const auto& meta = stream.meta();
  ResolvedDims dims = resolve_dims(cfg, meta.n_rows, meta.n_cols);
  const Index n = static_cast<Index>(meta.n_cols);

  StageDiag local;
  local.stage = "stage2_adaptive";

  MatrixXd q_p = la::qr_basis(p.cols);
  std::vector<char> in_p(meta.n_cols, 0);
  for (std::size_t t = 0; t < p.indices.size(); ++t) in_p[p.indices[t]] = 1;

  VectorXd z_norms = VectorXd::Zero(n);
  VectorXd resid = VectorXd::Zero(n);

  auto exact_scores = [&](Index i, const VectorXd& col) {
    double z = col.squaredNorm();
    double proj = (q_p.transpose() * col).squaredNorm();
    z_norms(i) = z;
    resid(i) = std::max(0.0, z - proj);
  };

  if (cfg.oracle_mode) {
    if (!dense_m) throw ConfigError("oracle mode requires the dense matrix");
    for (Index i = 0; i < n; ++i) exact_scores(i, dense_m->col(i));
  } else {
    LogSumParams lp = bank_params(cfg, meta.n_rows, meta.n_cols);
    ColumnBank bank(meta.n_cols, lp, rng::mix64(cfg.seed, 0x7332ull));
    stream.note_pass();
    bank.ingest_events(stream, cfg.threads);
    local.sketch_payload_bytes = bank.payload_bytes();
    const std::uint32_t scale = lp.fp_scale_log2;

    for (Index i = 0; i < n; ++i) {
      if (cfg.hybrid_exact_columns && in_p[i]) {
        auto it = std::lower_bound(p.indices.begin(), p.indices.end(), i);
        exact_scores(i, p.cols.col(it - p.indices.begin()));
        continue;
      }
      DecodedSample d = bank.decode(i);
      if (!d.ok) {
        ++local.masked_columns;
        continue;  // masked: z = 0, resid = 0, floor terms may still pick it
      }
      double z = 0.0;
      VectorXd gamma = VectorXd::Zero(q_p.cols());
      for (const auto& [coord, v] : d.items) {
        double fv = f(fp_to_double(v, scale));
        z += fv * fv;
        gamma += fv * q_p.row(static_cast<Index>(coord)).transpose();
      }
      z /= d.prob;
      gamma /= d.prob;
      z_norms(i) = z;
      resid(i) = std::max(0.0, z - gamma.squaredNorm());
    }
  }
  local.workspace_bytes =
      static_cast<std::size_t>(q_p.size() + 2 * n) * sizeof(double);

  VectorXd sampling(n);
  if (cfg.variant == AdaptiveVariant::experimental_qi) {
    double qsum = resid.sum();
    double floor = qsum / static_cast<double>(n);
    for (Index i = 0; i < n; ++i) sampling(i) = resid(i) + floor;
  } else {
    for (Index i = 0; i < n; ++i)
      sampling(i) = std::max(resid(i), dims.eta * z_norms(i));
  }
  if (!(sampling.sum() > 0.0)) {
    local.uniform_fallback = true;
    sampling = VectorXd::Ones(n);
  }
  local.scores = sampling;

  la::LeverageSample draw =
      la::leverage_sample(sampling, dims.d2, rng::mix64(cfg.seed, 0x6432ull));
  std::vector<Index> fresh;
  for (Index i : draw.indices)
    if (!in_p[i]) fresh.push_back(i);
  fresh = dedupe_sorted(fresh);

  ColumnSet y;
  y.indices.reserve(p.indices.size() + fresh.size());
  y.indices = p.indices;
  y.indices.insert(y.indices.end(), fresh.begin(), fresh.end());
  y.indices = dedupe_sorted(y.indices);

  MatrixXd fresh_cols = extract_columns(stream, f, fresh, cfg.threads);
  y.cols.resize(p.cols.rows(), static_cast<Index>(y.indices.size()));
  for (std::size_t t = 0; t < y.indices.size(); ++t) {
    Index idx = y.indices[t];
    auto pit = std::lower_bound(p.indices.begin(), p.indices.end(), idx);
    if (pit != p.indices.end() && *pit == idx) {
      y.cols.col(static_cast<Index>(t)) = p.cols.col(pit - p.indices.begin());
    } else {
      auto fit = std::lower_bound(fresh.begin(), fresh.end(), idx);
      y.cols.col(static_cast<Index>(t)) = fresh_cols.col(fit - fresh.begin());
    }
  }
  local.workspace_bytes += static_cast<std::size_t>(y.cols.size()) * sizeof(double);
  if (diag) *diag = std::move(local);
  return y;
}

Eigen::MatrixXd stage3_solve(const ReplayableStream& stream,
                             const LowRankConfig& cfg, const Transform& f,
                             const ColumnSet& y, StageDiag* diag,
                             bool* rank_padded, const MatrixXd* dense_m) {
  require_replayable(stream);
  if (y.indices.empty()) throw ConfigError("stage3 requires a nonempty Y");
  const auto& meta = stream.meta();
  const Index n = static_cast<Index>(meta.n_cols);
  const Index nr = static_cast<Index>(meta.n_rows);

  StageDiag local;
  local.stage = "stage3_solve";

  MatrixXd q_y = la::qr_basis(y.cols);
  const Index dd = q_y.cols();
  std::vector<Index> slot(meta.n_cols, -1);
  for (std::size_t t = 0; t < y.indices.size(); ++t) slot[y.indices[t]] = t;

  MatrixXd pi = MatrixXd::Zero(dd, n);
  if (cfg.oracle_mode) {
    if (!dense_m) throw ConfigError("oracle mode requires the dense matrix");
    pi = q_y.transpose() * (*dense_m);
  } else {
    LogSumParams lp = bank_params(cfg, meta.n_rows, meta.n_cols);
    ColumnBank bank(meta.n_cols, lp, rng::mix64(cfg.seed, 0x7333ull));
    stream.note_pass();
    bank.ingest_events(stream, cfg.threads);
    local.sketch_payload_bytes = bank.payload_bytes();
    const std::uint32_t scale = lp.fp_scale_log2;

    for (Index i = 0; i < n; ++i) {
      if (cfg.hybrid_exact_columns && slot[i] >= 0) {
        pi.col(i) = q_y.transpose() * y.cols.col(slot[i]);
        continue;
      }
      DecodedSample d = bank.decode(i);
      if (!d.ok) {
        ++local.masked_columns;
        continue;
      }
      VectorXd col = VectorXd::Zero(dd);
      for (const auto& [coord, v] : d.items)
        col += f(fp_to_double(v, scale)) *
               q_y.row(static_cast<Index>(coord)).transpose();
      pi.col(i) = col / d.prob;
    }
  }
  local.workspace_bytes =
      static_cast<std::size_t>(pi.size() + q_y.size()) * sizeof(double);

  const int k_eff = std::min<int>(cfg.k, static_cast<int>(std::min(dd, n)));
  auto [w, sigma] = la::topk_svd(pi, k_eff);
  MatrixXd l = la::qr_basis(q_y * w);

  bool padded = false;
  if (l.cols() < cfg.k) {
    // pad with directions orthogonal to the current factor
    padded = true;
    MatrixXd full(nr, cfg.k);
    full.leftCols(l.cols()) = l;
    Index have = l.cols();
    for (Index cand = 0; cand < nr && have < cfg.k; ++cand) {
      VectorXd v = VectorXd::Zero(nr);
      v(cand) = 1.0;
      v -= full.leftCols(have) * (full.leftCols(have).transpose() * v);
      double nrm = v.norm();
      if (nrm > 1e-8) {
        full.col(have++) = v / nrm;
      }
    }
    if (have < cfg.k) throw PipelineError("stage3: cannot complete the factor");
    l = full;
  }
  if (rank_padded) *rank_padded = padded;
  if (diag) *diag = std::move(local);
  return l;
}

LowRankResult lowrank_run(const ReplayableStream& stream, const LowRankConfig& cfg,
                          const Transform& f) {
  require_replayable(stream);
  const auto& meta = stream.meta();
  if (cfg.k > static_cast<int>(std::min(meta.n_rows, meta.n_cols)))
    throw ConfigError("k exceeds matrix dimensions");

  int passes_before = stream.passes();
  LowRankResult out;

  MatrixXd dense;
  const MatrixXd* dense_ptr = nullptr;
  if (cfg.oracle_mode) {
    stream.note_pass();
    MatrixXd a = streams::accumulate_dense(meta, stream.events(), cfg.threads);
    dense = a.unaryExpr([&f](double v) { return f(v); });
    dense_ptr = &dense;
  }

  StageDiag d1, d2, d3;
  ColumnSet p = stage1_leverage(stream, cfg, f, &d1, dense_ptr);
  ColumnSet y = stage2_adaptive(stream, cfg, f, p, &d2, dense_ptr);
  bool padded = false;
  out.l = stage3_solve(stream, cfg, f, y, &d3, &padded, dense_ptr);
  out.rank_deficient_padded = padded;

  out.pass_count = stream.passes() - passes_before;
  out.stages = {d1, d2, d3};
  out.peak_sketch_bytes = std::max({d1.sketch_payload_bytes,
                                    d2.sketch_payload_bytes,
                                    d3.sketch_payload_bytes});
  out.expected_sketch_bytes = cfg.oracle_mode
                                  ? 0
                                  : expected_sketch_bytes(cfg, meta.n_rows,
                                                          meta.n_cols);
  out.p_columns = p.indices;
  out.y_columns = y.indices;
  if (cfg.keep_factors) {
    out.q_p = la::qr_basis(p.cols);
    out.q_y = la::qr_basis(y.cols);
  }
  return out;
}

}  // namespace fsketch::lowrank
