#include <doctest.h>

#include <cmath>
#include <vector>

#include "fsketch/matprod.hpp"
#include "fsketch/rng.hpp"
#include "support/oracles.hpp"

using namespace fsketch;
using streams::UpdateEvent;

namespace {

Eigen::MatrixXd random_sign_matrix(Eigen::Index rows, Eigen::Index cols,
                                   std::uint64_t seed, double zero_frac = 0.2) {
  Eigen::MatrixXd b(rows, cols);
  rng::SplitMix64 g(seed);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) {
      double u = rng::next_u01(g);
      b(i, j) = u < zero_frac ? 0.0 : (u < (1.0 + zero_frac) / 2 ? 1.0 : -1.0);
    }
  return b;
}

std::vector<UpdateEvent> random_stream(std::uint64_t n_rows, std::uint64_t n_cols,
                                       int count, std::uint64_t seed,
                                       std::uint32_t fp_scale = 40) {
  std::vector<UpdateEvent> ev;
  rng::SplitMix64 g(seed);
  for (int u = 0; u < count; ++u)
    ev.push_back(UpdateEvent{static_cast<std::uint32_t>(g.next() % n_rows),
                             static_cast<std::uint32_t>(g.next() % n_cols),
                             double_to_fp((g.next() & 1) ? 1.0 : -1.0, fp_scale)});
  return ev;
}

Eigen::MatrixXd dense_product(const std::vector<UpdateEvent>& ev,
                              std::uint64_t n_rows, std::uint64_t n_cols,
                              const Eigen::MatrixXd& b, const Transform& f,
                              std::uint32_t fp_scale = 40) {
  streams::StreamMeta meta;
  meta.n_rows = n_rows;
  meta.n_cols = n_cols;
  meta.fp_scale_log2 = fp_scale;
  Eigen::MatrixXd a = oracles::accumulate(meta, ev);
  Eigen::MatrixXd m = a.unaryExpr([&f](double v) { return f(v); });
  return m * b;
}

}  // namespace

TEST_CASE("cell count is n rows by k columns") {
  Eigen::MatrixXd b = random_sign_matrix(20, 3, 1);
  MatrixProductSketch s(200, b, Transform::log1p_c(1), 0.5, 0.1, 1);
  auto q = s.query();
  CHECK(q.z.rows() == 200);
  CHECK(q.z.cols() == 3);
  CHECK(q.mask.size() == 600);
}

TEST_CASE("zero column of B yields an identically zero output column") {
  Eigen::MatrixXd b = random_sign_matrix(16, 2, 5);
  b.col(1).setZero();
  MatrixProductSketch s(16, b, Transform::log1p_c(1), 0.5, 0.1, 2);
  auto ev = random_stream(16, 16, 300, 9);
  s.ingest(ev, false, 1);
  auto q = s.query();
  CHECK(q.z.col(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("update to a coordinate with zero B row leaves cells untouched") {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(8, 2);
  b(1, 0) = 1.0;  // only coordinate 1 matters
  MatrixProductSketch s1(8, b, Transform::log1p_c(1), 0.5, 0.1, 3);
  MatrixProductSketch s2(8, b, Transform::log1p_c(1), 0.5, 0.1, 3);
  s1.update(0, 5, 1.0);  // B row 5 is zero: no cell should change
  CHECK(s1.state_equal(s2));
  s1.update(0, 1, 1.0);
  CHECK(!s1.state_equal(s2));
}

TEST_CASE("cancelling updates restore all cells") {
  Eigen::MatrixXd b = random_sign_matrix(32, 3, 7);
  MatrixProductSketch s1(32, b, Transform::log1p_c(1), 0.5, 0.1, 11);
  MatrixProductSketch s2(32, b, Transform::log1p_c(1), 0.5, 0.1, 11);
  s1.update(4, 9, 1.0);
  s1.update(4, 9, -1.0);
  CHECK(s1.state_equal(s2));
}

TEST_CASE("empty stream queries to the zero matrix") {
  Eigen::MatrixXd b = random_sign_matrix(10, 2, 3);
  MatrixProductSketch s(10, b, Transform::log1p_c(1), 0.5, 0.1, 4);
  auto q = s.query();
  CHECK(q.z.cwiseAbs().maxCoeff() == 0.0);
  CHECK(q.failed_cells == 0);
}

TEST_CASE("estimates meet the per-entry additive bound against the oracle") {
  const std::uint64_t n = 60;
  const double eps = 0.25;
  Eigen::MatrixXd b = random_sign_matrix(n, 3, 21);
  MatrixProductSketch s(n, b, Transform::log1p_c(1), eps, 0.1, 31);
  auto ev = random_stream(n, n, 4000, 17);
  s.ingest(ev, false, 1);
  auto q = s.query();
  Eigen::MatrixXd z = dense_product(ev, n, n, b, Transform::log1p_c(1));

  streams::StreamMeta meta;
  meta.n_rows = meta.n_cols = n;
  meta.fp_scale_log2 = 40;
  Eigen::MatrixXd a = oracles::accumulate(meta, ev);
  int ok = 0, total = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    double budget = 0.0;
    for (std::uint64_t j = 0; j < n; ++j) budget += std::log1p(std::fabs(a(i, j)));
    for (int c = 0; c < 3; ++c) {
      ++total;
      if (std::fabs(q.z(i, c) - z(i, c)) <= eps * budget + 1e-9) ++ok;
    }
  }
  CHECK(ok >= total * 95 / 100);
}

TEST_CASE("column queries are independent of the other columns of B") {
  const std::uint64_t n = 24;
  Eigen::MatrixXd b1 = random_sign_matrix(n, 3, 2);
  Eigen::MatrixXd b2 = b1;
  b2.col(2) = -b1.col(2);  // perturb only another column
  MatrixProductSketch s1(n, b1, Transform::log1p_c(1), 0.5, 0.1, 77);
  MatrixProductSketch s2(n, b2, Transform::log1p_c(1), 0.5, 0.1, 77);
  auto ev = random_stream(n, n, 500, 3);
  s1.ingest(ev, false, 1);
  s2.ingest(ev, false, 1);
  auto q1 = s1.query();
  auto q2 = s2.query();
  CHECK(q1.z.col(0) == q2.z.col(0));
  CHECK(q1.z.col(1) == q2.z.col(1));
}

TEST_CASE("real-valued B requires the generalized path") {
  Eigen::MatrixXd b(4, 1);
  b << 0.5, 1.0, -2.0, 0.0;
  CHECK_THROWS_AS(
      MatrixProductSketch(4, b, Transform::log1p_c(1), 0.5, 0.1, 1),
      ConfigError);
  MatProdParams params;
  params.allow_general_b = true;
  MatrixProductSketch s(4, b, Transform::log1p_c(1), 0.5, 0.1, 1, params);
  s.update(0, 2, 1.0);
  auto q = s.query();
  CHECK(q.z(0, 0) == doctest::Approx(-2.0 * std::log(2.0)));
}

TEST_CASE("poly transform cells estimate |y|^p products") {
  const std::uint64_t n = 40;
  Eigen::MatrixXd b = random_sign_matrix(n, 2, 5, 0.0);
  MatrixProductSketch s(n, b, Transform::pow(1.0), 0.25, 0.1, 13);
  auto ev = random_stream(n, n, 1500, 29);
  s.ingest(ev, false, 1);
  auto q = s.query();
  streams::StreamMeta meta;
  meta.n_rows = meta.n_cols = n;
  meta.fp_scale_log2 = 40;
  Eigen::MatrixXd a = oracles::accumulate(meta, ev);
  int ok = 0, total = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    double truth0 = 0.0, budget = 0.0;
    for (std::uint64_t j = 0; j < n; ++j) {
      truth0 += b(j, 0) * std::fabs(a(i, j));
      budget += std::fabs(a(i, j));
    }
    ++total;
    if (std::fabs(q.z(i, 0) - truth0) <= 0.35 * budget + 1e-9) ++ok;
  }
  CHECK(ok >= total * 9 / 10);
}

TEST_CASE("row-norm sketch: zero row, single entry, and dense rows") {
  const std::uint64_t n = 50;
  Transform f = Transform::log1p_c(1);
  RowNormSketch s(n, n, f, 0.25, 0.1, 9);
  // row 3 gets a single unit entry; row 0 stays empty
  s.update(3, 7, 1.0);
  auto ev = random_stream(n, n, 2500, 8);
  for (const auto& e : ev)
    if (e.row != 0 && e.row != 3) s.update_fp(e.row, e.col, e.value_fp);
  auto q = s.query();
  CHECK(q.norms_sq(0) == 0.0);
  double l2 = std::log(2.0);
  CHECK(q.norms_sq(3) == doctest::Approx(l2 * l2).epsilon(0.25));

  streams::StreamMeta meta;
  meta.n_rows = meta.n_cols = n;
  meta.fp_scale_log2 = 40;
  std::vector<UpdateEvent> kept;
  for (const auto& e : ev)
    if (e.row != 0 && e.row != 3) kept.push_back(e);
  Eigen::MatrixXd a = oracles::accumulate(meta, kept);
  int ok = 0;
  for (std::uint64_t i = 4; i < n; ++i) {
    double truth = 0.0;
    for (std::uint64_t j = 0; j < n; ++j) {
      double v = std::log1p(std::fabs(a(i, j)));
      truth += v * v;
    }
    if (truth == 0.0 || std::fabs(q.norms_sq(i) - truth) <= 0.25 * truth) ++ok;
  }
  CHECK(ok >= static_cast<int>(n - 4) * 95 / 100);
}

TEST_CASE("shared-row profile answers match the same decoded sample") {
  const std::uint64_t n = 80;
  Eigen::MatrixXd b = random_sign_matrix(n, 4, 3, 0.0);
  MatProdParams params;
  params.sharing = CellSharing::shared_row;
  params.backend = LevelBackend::counts;
  params.bytes_per_row_sketch = 2048;
  MatrixProductSketch s(n, b, Transform::log1p_c(1), 0.25, 0.1, 5, params);
  auto ev = random_stream(n, n, 3000, 11);
  s.ingest(ev, false, 1);
  auto q = s.query();
  for (std::uint64_t i = 0; i < n; ++i) {
    DecodedSample d = s.decode_row(i);
    if (!d.ok) continue;
    for (int c = 0; c < 4; ++c) {
      double expect = sample_estimate(
          d, [&](std::uint64_t l) { return b(static_cast<Eigen::Index>(l), c); },
          Transform::log1p_c(1), false, 40);
      CHECK(q.z(i, c) == expect);
    }
  }
}

TEST_CASE("payload accounting is positive and scales with the grid") {
  Eigen::MatrixXd b3 = random_sign_matrix(30, 3, 1);
  Eigen::MatrixXd b1 = b3.leftCols(1);
  MatrixProductSketch s3(30, b3, Transform::log1p_c(1), 0.5, 0.1, 1);
  MatrixProductSketch s1(30, b1, Transform::log1p_c(1), 0.5, 0.1, 1);
  CHECK(s3.payload_bytes() > s1.payload_bytes());
}

TEST_CASE("out-of-range updates are rejected") {
  Eigen::MatrixXd b = random_sign_matrix(8, 1, 1);
  MatrixProductSketch s(8, b, Transform::log1p_c(1), 0.5, 0.1, 1);
  CHECK_THROWS_AS(s.update(8, 0, 1.0), DomainError);
  CHECK_THROWS_AS(s.update(0, 8, 1.0), DomainError);
}
