#include "fsketch/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fsketch/rng.hpp"

namespace fsketch::eval {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

DenseEval dense_eval(const streams::StreamMeta& meta,
                     const std::vector<streams::UpdateEvent>& events,
                     const Transform& f, int k, int threads) {
  DenseEval out;
  MatrixXd a = streams::accumulate_dense(meta, events, threads);
  out.m = a.unaryExpr([&f](double v) { return f(v); });
  out.m_fro_sq = out.m.squaredNorm();

  // top-k left singular vectors via the (symmetric) Gram of the rows
  MatrixXd gram = out.m * out.m.transpose();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  const Index n = out.m.rows();
  out.u.resize(n, k);
  for (int j = 0; j < k; ++j) out.u.col(j) = eig.eigenvectors().col(n - 1 - j);
  out.opt_residual_sq = residual_sq(out.m, out.u);
  return out;
}

double residual_sq(const MatrixXd& m, const MatrixXd& l) {
  double total = m.squaredNorm();
  double captured = (l.transpose() * m).squaredNorm();
  return std::max(0.0, total - captured);
}

double error_ratio(const DenseEval& ref, const MatrixXd& l) {
  double num = residual_sq(ref.m, l);
  double den = ref.opt_residual_sq;
  if (den <= 0.0) {
    // optimum is exact; any extra residual beyond noise counts as > 1
    return num <= 1e-18 ? 1.0 : std::numeric_limits<double>::infinity();
  }
  double r = std::sqrt(num / den);
  if (r < 1.0 - 1e-9)
    throw PipelineError("error ratio below 1: optimal factor is not optimal");
  return r;
}

double norm_12(const MatrixXd& m) {
  double acc = 0.0;
  for (Index j = 0; j < m.cols(); ++j) {
    double l1 = m.col(j).cwiseAbs().sum();
    acc += l1 * l1;
  }
  return std::sqrt(acc);
}

MatrixXd uniform_baseline(const streams::ReplayableStream& stream,
                          const Transform& f, int k, int num_cols,
                          std::uint64_t seed) {
  const auto& meta = stream.meta();
  const Index n = static_cast<Index>(meta.n_cols);
  const Index nr = static_cast<Index>(meta.n_rows);
  if (num_cols < 1 || num_cols > n)
    throw DomainError("baseline column count outside [1, n]");

  // uniform subset without replacement: seeded partial Fisher-Yates
  std::vector<Index> all(n);
  for (Index i = 0; i < n; ++i) all[i] = i;
  rng::SplitMix64 g(rng::mix64(seed, 0x756e69ull));
  for (int t = 0; t < num_cols; ++t) {
    std::uint64_t j = t + rng::next_below(g, static_cast<std::uint64_t>(n - t));
    std::swap(all[t], all[j]);
  }
  std::vector<Index> chosen(all.begin(), all.begin() + num_cols);
  std::sort(chosen.begin(), chosen.end());

  std::vector<Index> slot(n, -1);
  for (int t = 0; t < num_cols; ++t) slot[chosen[t]] = t;
  std::vector<std::int64_t> acc(static_cast<std::size_t>(num_cols) * nr, 0);
  stream.for_each([&](const streams::UpdateEvent& e) {
    Index s = slot[e.col];
    if (s < 0) return;
    acc[static_cast<std::size_t>(s) * nr + e.row] += e.value_fp;
  });

  MatrixXd t_cols(nr, num_cols);
  for (int t = 0; t < num_cols; ++t)
    for (Index r = 0; r < nr; ++r)
      t_cols(r, t) = f(fp_to_double(acc[static_cast<std::size_t>(t) * nr + r],
                                    meta.fp_scale_log2));

  Eigen::BDCSVD<MatrixXd> svd(t_cols, Eigen::ComputeThinU);
  int k_eff = std::min<int>(k, static_cast<int>(svd.matrixU().cols()));
  return svd.matrixU().leftCols(k_eff);
}

std::string csv_header() {
  return "dataset,n,k,budget,gamma,variant,seed,space_ratio,error_ratio,"
         "baseline_error_ratio,wall_ms";
}

std::string csv_row(const EvalRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s,%llu,%d,%.6f,%d,%s,%s,%.6f,%.6f,%.6f,%lld",
                r.dataset.c_str(), static_cast<unsigned long long>(r.n), r.k,
                r.budget, r.gamma, r.variant.c_str(), r.seed.c_str(),
                r.space_ratio, r.error_ratio, r.baseline_error_ratio,
                static_cast<long long>(r.wall_ms));
  return buf;
}

}  // namespace fsketch::eval
