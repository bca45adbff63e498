#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fsketch/common.hpp"

namespace fsketch::streams {

/// One turnstile update (i, j, delta) to the hidden matrix. Values travel as
/// fixed-point integers so downstream linear cells cancel exactly.
struct UpdateEvent {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::int64_t value_fp = 0;
};

enum class ValueEncoding : std::uint32_t {
  unit_sign = 0,    // one byte per value, +1/-1
  fixed_point = 1,  // zigzag varint of the fixed-point value
};

struct StreamMeta {
  std::uint64_t n_rows = 0;
  std::uint64_t n_cols = 0;
  std::uint64_t m = 0;  // declared event count
  std::uint32_t fp_scale_log2 = 40;
  ValueEncoding encoding = ValueEncoding::fixed_point;
};

struct ReplayStats {
  std::uint64_t count = 0;
  std::uint64_t checksum = 0;  // FNV-1a over the event payloads
};

void write_stream_file(const std::string& path, const StreamMeta& meta,
                       const std::vector<UpdateEvent>& events);

StreamMeta read_stream_header(const std::string& path);

/// Delivers events in file order; throws FormatError (with a byte offset) on
/// corrupt headers or truncation, including header/body length mismatch.
ReplayStats replay(const std::string& path,
                   const std::function<void(const UpdateEvent&)>& consumer);

std::pair<StreamMeta, std::vector<UpdateEvent>> load_stream_file(const std::string& path);

// Plain-text interop: one "i j delta" per line, delta as a real number.
void write_stream_text(const std::string& path, const StreamMeta& meta,
                       const std::vector<UpdateEvent>& events);
std::vector<UpdateEvent> read_stream_text(const std::string& path,
                                          const StreamMeta& meta);

/// Replayable in-memory stream with a pass counter, the contract the
/// multi-pass pipelines consume.
class ReplayableStream {
 public:
  ReplayableStream(StreamMeta meta, std::vector<UpdateEvent> events)
      : meta_(meta), events_(std::move(events)) {}

  static ReplayableStream from_file(const std::string& path);

  const StreamMeta& meta() const { return meta_; }
  const std::vector<UpdateEvent>& events() const { return events_; }
  bool replayable() const { return replayable_; }
  void set_replayable(bool v) { replayable_ = v; }  // test hook

  template <typename Fn>
  void for_each(Fn&& fn) const {
    ++passes_;
    for (const UpdateEvent& e : events_) fn(e);
  }
  /// Register a pass made through events() directly (sharded kernels).
  void note_pass() const { ++passes_; }
  int passes() const { return passes_; }
  void reset_passes() { passes_ = 0; }

 private:
  StreamMeta meta_;
  std::vector<UpdateEvent> events_;
  bool replayable_ = true;
  mutable int passes_ = 0;
};

// ---------------------------------------------------------------------------
// Generators

struct GenOptions {
  std::uint32_t fp_scale_log2 = 40;
  int updates_per_entry = 5;
  // A_ij = exp(G_ij) - 1 by default; false switches to the exp(G_ij) variant.
  bool exp_minus_one = true;
  bool keep_dense = false;  // retain the dense matrices for oracle checks
};

struct Generated {
  StreamMeta meta;
  std::vector<UpdateEvent> events;
  Eigen::MatrixXd dense_pre;  // pre-transform Gaussian G (when keep_dense)
  Eigen::MatrixXd dense_a;    // accumulated A (when keep_dense)
};

/// Gaussian G with column i rescaled to norm 4/i, A = exp(G)-1 entrywise,
/// each entry split into `updates_per_entry` equal updates, order shuffled.
Generated gen_logdata(int n, std::uint64_t seed, GenOptions opts = {});

/// Same protocol with A = G^2 entrywise.
Generated gen_sqdata(int n, std::uint64_t seed, GenOptions opts = {});

/// Vandermonde fixture: A_ij = alpha_i^(j-1) and its entrywise log companion.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gen_vandermonde_fixture(
    int n, const std::vector<double>& alphas);

/// Block-diagonal copies of [[1,2],[2,4]] and the entrywise log2 companion
/// (zeros map to zero so the rank statement of the block example holds).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gen_block_fixture(int n);

/// Emit a dense matrix as a stream, each entry split into `parts` updates.
std::vector<UpdateEvent> stream_from_dense(const Eigen::MatrixXd& a,
                                           std::uint32_t fp_scale_log2,
                                           int parts = 1,
                                           std::uint64_t shuffle_seed = 0);

// ---------------------------------------------------------------------------
// Text co-occurrence ingestion (desk-scale mirror of the corpus protocol)

enum class CoocWeighting { unit, inverse_distance };

struct CoocOptions {
  int window = 10;
  int vocab_n = 0;  // required > 0
  CoocWeighting weighting = CoocWeighting::unit;
  std::uint32_t fp_scale_log2 = 20;
};

struct CoocResult {
  StreamMeta meta;
  std::vector<UpdateEvent> events;
  std::vector<std::string> vocab;        // id -> token
  std::vector<std::uint64_t> unigram;    // id -> N_i
  std::uint64_t total_tokens = 0;        // N
};

/// Windows slide within each line; pairs of in-vocab tokens at distance
/// t < window emit (i,j,w) and (j,i,w) with w = 1 or 1/t.
CoocResult ingest_cooccurrence(std::istream& text, const CoocOptions& opts);

void write_cooc_sidecar(const std::string& path, const CoocResult& r);

/// Accumulate a stream into a dense fixed-point matrix, returned as doubles.
Eigen::MatrixXd accumulate_dense(const StreamMeta& meta,
                                 const std::vector<UpdateEvent>& events,
                                 int threads = 0);

}  // namespace fsketch::streams
