// Throughput comparison between the serial reference ingest and the
// OpenMP-sharded kernels, plus the dense accumulation oracle.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <string>

#include "fsketch/lowrank.hpp"
#include "fsketch/matprod.hpp"
#include "fsketch/streams.hpp"

using namespace fsketch;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void bench_matprod(const streams::Generated& g, int threads) {
  Eigen::MatrixXd b(g.meta.n_rows, 3);
  rng::SplitMix64 r(7);
  for (Eigen::Index i = 0; i < b.size(); ++i)
    b(i) = (r.next() % 3 == 0) ? 0.0 : ((r.next() >> 63) ? 1.0 : -1.0);

  MatProdParams params;
  params.sharing = CellSharing::shared_row;
  params.backend = LevelBackend::counts;
  params.bytes_per_row_sketch = 768.0;
  MatrixProductSketch sketch(g.meta.n_rows, b, Transform::log1p_c(1), 0.25, 0.1,
                             11, params);
  auto t0 = std::chrono::steady_clock::now();
  sketch.ingest(g.events, /*transposed=*/false, threads);
  double dt = seconds_since(t0);
  std::printf("matprod ingest  threads=%-2d  %8.2f Mevents/s\n", threads,
              static_cast<double>(g.events.size()) / dt / 1e6);
}

void bench_accumulate(const streams::Generated& g, int threads) {
  auto t0 = std::chrono::steady_clock::now();
  Eigen::MatrixXd a = streams::accumulate_dense(g.meta, g.events, threads);
  double dt = seconds_since(t0);
  std::printf("dense accumulate threads=%-2d %8.2f Mevents/s (checksum %.3f)\n",
              threads, static_cast<double>(g.events.size()) / dt / 1e6,
              a.squaredNorm());
}

}  // namespace

int main(int argc, char** argv) {
  int n = argc > 1 ? std::atoi(argv[1]) : 600;
  std::printf("generating logdata n=%d ...\n", n);
  streams::GenOptions opts;
  streams::Generated g = streams::gen_logdata(n, 17, opts);
  std::printf("%zu events\n", g.events.size());

  int max_threads = omp_get_max_threads();
  for (int t : {1, 2, max_threads}) {
    if (t < 1 || (t == 2 && max_threads < 2)) continue;
    bench_matprod(g, t);
  }
  for (int t : {1, max_threads}) bench_accumulate(g, t);
  return 0;
}
