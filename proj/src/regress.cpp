#include "fsketch/regress.hpp"

#include <cmath>

#include "fsketch/ingest.hpp"
#include "fsketch/rng.hpp"

namespace fsketch::regress {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

RegressionResult regress_solve(const streams::ReplayableStream& stream,
                               const VectorXd& b, const RegressionConfig& cfg,
                               const Transform& f) {
  if (!stream.replayable())
    throw ConfigError("regression requires a replayable stream");
  const auto& meta = stream.meta();
  const Index n = static_cast<Index>(meta.n_rows);
  const Index d = static_cast<Index>(meta.n_cols);
  if (cfg.d != 0 && cfg.d != d)
    throw ConfigError("configured d does not match the stream");
  if (d > n) throw ConfigError("regression requires n >= d");
  if (b.size() != n) throw ConfigError("b length must equal the stream rows");

  int s = cfg.s;
  if (s <= 0) {
    double want = cfg.s_const * static_cast<double>(d) * d /
                  (cfg.epsilon * cfg.epsilon);
    s = static_cast<int>(std::ceil(want));
  }
  s = std::max<int>(s, static_cast<int>(d));
  s = std::min<int>(s, static_cast<int>(n));

  la::SketchTransform st = la::SketchTransform::make(
      cfg.transform, s, n, rng::mix64(cfg.seed, 0x726567ull));
  MatrixXd s_mat = st.materialize();  // s x n

  LogSumParams lp;
  if (cfg.sketch_bytes_target > 0.0) {
    lp = LogSumParams::budgeted(meta.n_rows,
                                cfg.sketch_bytes_target / static_cast<double>(d),
                                cfg.backend, meta.fp_scale_log2, cfg.epsilon, 0.1);
  } else {
    lp.universe = meta.n_rows;
    lp.epsilon = cfg.epsilon;
    lp.delta = 0.1;
    lp.backend = cfg.backend;
    lp.collapse_saturated_levels = true;
    lp.fp_scale_log2 = meta.fp_scale_log2;
    lp = lp.resolved();
  }

  std::vector<LevelSketch> columns;
  columns.reserve(d);
  for (Index c = 0; c < d; ++c)
    columns.emplace_back(lp, rng::mix64(cfg.seed, 0x7263ull,
                                        static_cast<std::uint64_t>(c)));

  int passes_before = stream.passes();
  stream.note_pass();
  sharded_ingest(stream.events(), /*transposed=*/true, cfg.threads,
                 [&columns](std::uint64_t idx, std::uint64_t coord,
                            std::int64_t value) {
                   columns[idx].update_fp(coord, value);
                 });

  RegressionResult out;
  out.sa = MatrixXd::Zero(s, d);
  for (Index c = 0; c < d; ++c) {
    DecodedSample dec = columns[c].decode();
    if (!dec.ok)
      throw PipelineError("regression sketch failed on a design column");
    VectorXd col = VectorXd::Zero(s);
    for (const auto& [coord, v] : dec.items)
      col += (f(fp_to_double(v, lp.fp_scale_log2)) / dec.prob) *
             s_mat.col(static_cast<Index>(coord));
    out.sa.col(c) = col;
    out.sketch_payload_bytes += columns[c].payload_bytes();
  }
  out.sb = s_mat * b;

  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(out.sa);
  cod.setThreshold(1e-10);
  out.x = cod.solve(out.sb);
  out.rank_deficient = cod.rank() < d;
  out.pass_count = stream.passes() - passes_before;
  return out;
}

}  // namespace fsketch::regress
