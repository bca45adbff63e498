#include "fsketch/densela.hpp"

#include <algorithm>
#include <cmath>

#include "fsketch/rng.hpp"

namespace fsketch::la {

SketchTransform SketchTransform::make(TransformKind kind, Eigen::Index rows,
                                      Eigen::Index cols, std::uint64_t seed) {
  if (rows < 1 || cols < 1)
    throw ConfigError("sketch transform needs positive dimensions");
  return SketchTransform{kind, rows, cols, seed};
}

Eigen::Index SketchTransform::bucket(Eigen::Index j) const {
  std::uint64_t h = rng::mix64(seed, 0x6275ull, static_cast<std::uint64_t>(j));
  return static_cast<Eigen::Index>(
      (static_cast<unsigned __int128>(h) * static_cast<std::uint64_t>(rows)) >> 64);
}

double SketchTransform::sign(Eigen::Index j) const {
  return (rng::mix64(seed, 0x7369ull, static_cast<std::uint64_t>(j)) >> 63) ? 1.0
                                                                            : -1.0;
}

namespace {

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                std::uint64_t seed) {
  Eigen::MatrixXd g(rows, cols);
  const double inv = 1.0 / std::sqrt(static_cast<double>(rows));
  for (Eigen::Index c = 0; c < cols; ++c) {
    rng::SplitMix64 r(rng::mix64(seed, 0x6761ull, static_cast<std::uint64_t>(c)));
    for (Eigen::Index i = 0; i < rows; ++i) g(i, c) = rng::next_normal(r) * inv;
  }
  return g;
}

Eigen::Index next_pow2(Eigen::Index n) {
  Eigen::Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fwht_inplace(Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  for (Eigen::Index len = 1; len < n; len <<= 1) {
    for (Eigen::Index i = 0; i < n; i += len << 1) {
      for (Eigen::Index j = i; j < i + len; ++j) {
        Eigen::VectorXd a = m.row(j);
        Eigen::VectorXd b = m.row(j + len);
        m.row(j) = a + b;
        m.row(j + len) = a - b;
      }
    }
  }
}

}  // namespace

Eigen::MatrixXd SketchTransform::apply(const Eigen::MatrixXd& m) const {
  if (m.rows() != cols)
    throw DomainError("transform/input dimension mismatch");
  switch (kind) {
    case TransformKind::countsketch: {
      Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, m.cols());
      for (Eigen::Index j = 0; j < cols; ++j)
        out.row(bucket(j)) += sign(j) * m.row(j);
      return out;
    }
    case TransformKind::gaussian:
      return gaussian_matrix(rows, cols, seed) * m;
    case TransformKind::countsketch_then_gaussian: {
      Eigen::Index t = std::min(cols, rows * 4);
      SketchTransform cs{TransformKind::countsketch, t, cols, rng::mix64(seed, 1)};
      Eigen::MatrixXd mid = cs.apply(m);
      SketchTransform g{TransformKind::gaussian, rows, t, rng::mix64(seed, 2)};
      return g.apply(mid);
    }
    case TransformKind::srht: {
      Eigen::Index p = next_pow2(cols);
      Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(p, m.cols());
      for (Eigen::Index j = 0; j < cols; ++j) padded.row(j) = sign(j) * m.row(j);
      fwht_inplace(padded);
      padded *= 1.0 / std::sqrt(static_cast<double>(p));
      Eigen::MatrixXd out(rows, m.cols());
      const double scale = std::sqrt(static_cast<double>(p) / rows);
      for (Eigen::Index r = 0; r < rows; ++r) {
        std::uint64_t h = rng::mix64(seed, 0x726full, static_cast<std::uint64_t>(r));
        Eigen::Index pick = static_cast<Eigen::Index>(
            (static_cast<unsigned __int128>(h) * static_cast<std::uint64_t>(p)) >> 64);
        out.row(r) = scale * padded.row(pick);
      }
      return out;
    }
  }
  throw ConfigError("unknown transform kind");
}

Eigen::MatrixXd SketchTransform::materialize() const {
  if (kind == TransformKind::countsketch) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) s(bucket(j), j) = sign(j);
    return s;
  }
  return apply(Eigen::MatrixXd::Identity(cols, cols));
}

Eigen::MatrixXd split_pos_neg(const Eigen::MatrixXd& s) {
  Eigen::MatrixXd r(2 * s.rows(), s.cols());
  r.topRows(s.rows()) = s.cwiseMax(0.0);
  r.bottomRows(s.rows()) = (-s).cwiseMax(0.0);
  return r;
}

Eigen::MatrixXd qr_basis(const Eigen::MatrixXd& y, double tol) {
  if (y.cols() > y.rows())
    throw DomainError("qr_basis expects a tall matrix");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(y);
  qr.setThreshold(tol);
  Eigen::Index r = qr.rank();
  if (r == 0) return Eigen::MatrixXd(y.rows(), 0);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), r);
  return q;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> topk_svd(const Eigen::MatrixXd& m,
                                                     int k) {
  if (k < 1 || k > std::min(m.rows(), m.cols()))
    throw DomainError("topk_svd rank outside matrix dimensions");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
  return {svd.matrixU().leftCols(k), svd.singularValues().head(k)};
}

Eigen::VectorXd leverage_scores(const Eigen::MatrixXd& e, double tol) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(e, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * smax && sv(i) > 0.0) ++rank;
  Eigen::VectorXd scores = Eigen::VectorXd::Zero(e.cols());
  if (rank == 0) return scores;
  Eigen::MatrixXd v = svd.matrixV().leftCols(rank);
  for (Eigen::Index i = 0; i < v.rows(); ++i) scores(i) = v.row(i).squaredNorm();
  return scores;
}

LeverageSample leverage_sample(const Eigen::VectorXd& q, int s, std::uint64_t seed) {
  if (s < 1) throw DomainError("sample size must be positive");
  double total = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (q(i) < 0.0) throw DomainError("sampling weights must be nonnegative");
    total += q(i);
  }
  if (!(total > 0.0)) throw DomainError("sampling distribution is all-zero");

  Eigen::VectorXd cdf(q.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    acc += q(i) / total;
    cdf(i) = acc;
  }
  cdf(q.size() - 1) = 1.0;

  LeverageSample out;
  out.indices.resize(s);
  out.rescale.resize(s);
  rng::SplitMix64 g(rng::mix64(seed, 0x6c657661ull));
  for (int t = 0; t < s; ++t) {
    double u = rng::next_u01(g);
    // first index with cdf >= u
    Eigen::Index lo = 0, hi = q.size() - 1;
    while (lo < hi) {
      Eigen::Index mid = (lo + hi) / 2;
      if (cdf(mid) >= u)
        hi = mid;
      else
        lo = mid + 1;
    }
    out.indices[t] = lo;
    out.rescale(t) = 1.0 / std::sqrt((q(lo) / total) * static_cast<double>(s));
  }
  return out;
}

int rank_of(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  const Eigen::VectorXd& sv = svd.singularValues();
  double smax = sv.size() ? sv(0) : 0.0;
  if (!(smax > 0.0)) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > tol * smax) ++r;
  return r;
}

}  // namespace fsketch::la
