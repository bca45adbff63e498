#pragma once

#include <omp.h>

#include <exception>
#include <vector>

#include "fsketch/common.hpp"
#include "fsketch/streams.hpp"

namespace fsketch {

/// Apply a stream to a bank of per-row structures, sharded so each structure
/// has a single writer. threads=1 is the serial reference path; any thread
/// count produces the identical final state because every structure sees its
/// updates in stream order.
template <typename UpdateFn>
void sharded_ingest(const std::vector<streams::UpdateEvent>& events,
                    bool transposed, int threads, UpdateFn&& fn) {
  int nt = threads > 0 ? threads : omp_get_max_threads();
  if (nt <= 1) {
    for (const streams::UpdateEvent& e : events) {
      std::uint64_t idx = transposed ? e.col : e.row;
      std::uint64_t coord = transposed ? e.row : e.col;
      fn(idx, coord, e.value_fp);
    }
    return;
  }
  bool failed = false;
#pragma omp parallel num_threads(nt) reduction(|| : failed)
  {
    int tid = omp_get_thread_num();
    int tn = omp_get_num_threads();
    try {
      for (const streams::UpdateEvent& e : events) {
        std::uint64_t idx = transposed ? e.col : e.row;
        if (static_cast<int>(idx % static_cast<std::uint64_t>(tn)) != tid) continue;
        std::uint64_t coord = transposed ? e.row : e.col;
        fn(idx, coord, e.value_fp);
      }
    } catch (const std::exception&) {
      failed = true;
    }
  }
  if (failed) throw PipelineError("sharded ingest failed");
}

}  // namespace fsketch
