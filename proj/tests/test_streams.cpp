#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "fsketch/densela.hpp"
#include "fsketch/streams.hpp"
#include "support/oracles.hpp"

using namespace fsketch;
using namespace fsketch::streams;

namespace {

std::string temp_path(const char* tag) {
  return std::string("/tmp/fsketch_test_") + tag + ".bin";
}

}  // namespace

TEST_CASE("logdata columns of the pre-transform matrix have norm 4/i") {
  GenOptions opts;
  opts.keep_dense = true;
  Generated g = gen_logdata(40, 11, opts);
  for (int j = 0; j < 40; ++j)
    CHECK(g.dense_pre.col(j).norm() == doctest::Approx(4.0 / (j + 1)).epsilon(1e-12));
}

TEST_CASE("logdata stream has exactly 5 n^2 events and accumulates to A") {
  GenOptions opts;
  opts.keep_dense = true;
  Generated g = gen_logdata(30, 5, opts);
  CHECK(g.events.size() == 5u * 30 * 30);
  Eigen::MatrixXd acc = oracles::accumulate(g.meta, g.events);
  CHECK((acc - g.dense_a).cwiseAbs().maxCoeff() <= 1e-9);
  // A_ij = exp(G_ij) - 1 up to fixed-point quantization
  Eigen::MatrixXd expect = g.dense_pre.unaryExpr([](double v) { return std::expm1(v); });
  CHECK((acc - expect).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("sqdata accumulates to nonnegative squares") {
  GenOptions opts;
  opts.keep_dense = true;
  Generated g = gen_sqdata(25, 9, opts);
  CHECK(g.events.size() == 5u * 25 * 25);
  Eigen::MatrixXd acc = oracles::accumulate(g.meta, g.events);
  CHECK(acc.minCoeff() >= 0.0);
  CHECK((acc - g.dense_a).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("generators are deterministic per seed") {
  Generated a = gen_logdata(20, 3);
  Generated b = gen_logdata(20, 3);
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].row == b.events[i].row);
    CHECK(a.events[i].col == b.events[i].col);
    CHECK(a.events[i].value_fp == b.events[i].value_fp);
  }
}

TEST_CASE("stream files round-trip and replay deterministically") {
  Generated g = gen_logdata(12, 8);
  std::string path = temp_path("roundtrip");
  write_stream_file(path, g.meta, g.events);

  StreamMeta meta = read_stream_header(path);
  CHECK(meta.n_rows == 12);
  CHECK(meta.m == g.events.size());

  ReplayStats s1 = replay(path, nullptr);
  ReplayStats s2 = replay(path, nullptr);
  CHECK(s1.count == g.events.size());
  CHECK(s1.checksum == s2.checksum);

  auto [meta2, events2] = load_stream_file(path);
  REQUIRE(events2.size() == g.events.size());
  CHECK(events2[5].value_fp == g.events[5].value_fp);
  std::remove(path.c_str());
}

TEST_CASE("empty body with m=0 replays zero events") {
  StreamMeta meta;
  meta.n_rows = meta.n_cols = 4;
  std::string path = temp_path("empty");
  write_stream_file(path, meta, {});
  ReplayStats s = replay(path, nullptr);
  CHECK(s.count == 0);
  std::remove(path.c_str());
}

TEST_CASE("header/body length mismatch raises a format error") {
  Generated g = gen_logdata(8, 2);
  std::string path = temp_path("truncated");
  write_stream_file(path, g.meta, g.events);
  // chop the tail off the body
  {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string buf = ss.str();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size() - 7));
  }
  CHECK_THROWS_AS(replay(path, nullptr), FormatError);
  std::remove(path.c_str());
}

TEST_CASE("vandermonde fixture matches the determinant product formula") {
  auto [a, la] = gen_vandermonde_fixture(3, {2.0, 3.0, 5.0});
  CHECK(a.determinant() == doctest::Approx(6.0).epsilon(1e-12));
  for (int i = 0; i < 3; ++i) CHECK(a(i, 0) == 1.0);
  CHECK(la::rank_of(la, 1e-8) == 1);
  CHECK_THROWS_AS(gen_vandermonde_fixture(2, {3.0, 3.0}), DomainError);
  CHECK_THROWS_AS(gen_vandermonde_fixture(2, {-1.0, 2.0}), DomainError);
}

TEST_CASE("block fixture has the rank pair from the construction") {
  auto [a, la] = gen_block_fixture(4);
  CHECK(la::rank_of(a, 1e-8) == 2);
  CHECK(la::rank_of(la, 1e-8) == 4);
  // each block is singular and off-diagonal blocks vanish
  CHECK(a.block(0, 0, 2, 2).determinant() == doctest::Approx(0.0));
  CHECK(a.block(0, 2, 2, 2).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(gen_block_fixture(5), DomainError);
}

TEST_CASE("co-occurrence of a two-token line emits both directions") {
  std::istringstream text("a b\n");
  CoocOptions opts;
  opts.vocab_n = 4;
  CoocResult r = ingest_cooccurrence(text, opts);
  REQUIRE(r.events.size() == 2);
  double v0 = fp_to_double(r.events[0].value_fp, r.meta.fp_scale_log2);
  CHECK(v0 == doctest::Approx(1.0));
  CHECK(r.events[0].row != r.events[0].col);
  CHECK(r.events[1].row == r.events[0].col);
  CHECK(r.total_tokens == 2);
}

TEST_CASE("inverse-distance weighting emits 1/t") {
  std::istringstream text("a x x b\n");
  CoocOptions opts;
  opts.vocab_n = 10;
  opts.weighting = CoocWeighting::inverse_distance;
  CoocResult r = ingest_cooccurrence(text, opts);
  // locate the (a,b) pair at distance 3
  bool found = false;
  for (const auto& e : r.events) {
    double w = fp_to_double(e.value_fp, r.meta.fp_scale_log2);
    if (std::fabs(w - 1.0 / 3.0) < 1e-5) found = true;
  }
  CHECK(found);
}

TEST_CASE("out-of-vocabulary tokens produce no updates") {
  std::istringstream text("rare1 rare2 common common common\n");
  CoocOptions opts;
  opts.vocab_n = 1;  // only "common" survives
  CoocResult r = ingest_cooccurrence(text, opts);
  for (const auto& e : r.events) {
    CHECK(e.row == 0);
    CHECK(e.col == 0);
  }
  CHECK(r.vocab.size() == 1);
  CHECK(r.vocab[0] == "common");
}

TEST_CASE("empty vocabulary is a config error") {
  std::istringstream text("a b\n");
  CoocOptions opts;
  opts.vocab_n = 0;
  CHECK_THROWS_AS(ingest_cooccurrence(text, opts), ConfigError);
}

TEST_CASE("text event format round-trips") {
  Generated g = gen_logdata(6, 4);
  std::string path = temp_path("text");
  write_stream_text(path, g.meta, g.events);
  auto events = read_stream_text(path, g.meta);
  REQUIRE(events.size() == g.events.size());
  for (std::size_t i = 0; i < events.size(); ++i) {
    CHECK(events[i].row == g.events[i].row);
    CHECK(events[i].col == g.events[i].col);
    CHECK(std::llabs(events[i].value_fp - g.events[i].value_fp) <= 1);
  }
  std::remove(path.c_str());
}
