#include "fsketch/streams.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "fsketch/rng.hpp"

namespace fsketch::streams {

namespace {

constexpr char kMagic[8] = {'F', 'S', 'K', 'S', 'T', 'R', 'M', '1'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t zigzag_encode(std::int64_t v) {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

std::int64_t zigzag_decode(std::uint64_t v) {
  return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1);
}

void put_varint(std::string& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<char>((v & 0x7f) | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<char>(v));
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;
  std::uint64_t base_offset = 0;

  std::uint64_t offset() const { return base_offset + pos; }

  std::uint64_t varint() {
    std::uint64_t v = 0;
    int shift = 0;
    while (true) {
      if (pos >= buf.size())
        throw FormatError("truncated varint in stream body", offset());
      std::uint8_t b = static_cast<std::uint8_t>(buf[pos++]);
      v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
      if (!(b & 0x80)) return v;
      shift += 7;
      if (shift > 63) throw FormatError("varint overflow in stream body", offset());
    }
  }
};

void fnv_mix(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ull;
  }
}

std::uint64_t event_checksum_step(std::uint64_t h, const UpdateEvent& e) {
  fnv_mix(h, e.row);
  fnv_mix(h, e.col);
  fnv_mix(h, static_cast<std::uint64_t>(e.value_fp));
  return h;
}

struct Header {
  StreamMeta meta;
};

std::string encode_header(const StreamMeta& meta) {
  std::string out(kMagic, 8);
  auto put_u32 = [&](std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); };
  auto put_u64 = [&](std::uint64_t v) { out.append(reinterpret_cast<const char*>(&v), 8); };
  put_u32(kVersion);
  put_u32(static_cast<std::uint32_t>(meta.encoding));
  put_u64(meta.n_rows);
  put_u64(meta.n_cols);
  put_u32(meta.fp_scale_log2);
  put_u32(0);  // reserved
  put_u64(meta.m);
  return out;
}

constexpr std::size_t kHeaderBytes = 8 + 4 + 4 + 8 + 8 + 4 + 4 + 8;

Header decode_header(const std::string& buf) {
  if (buf.size() < kHeaderBytes)
    throw FormatError("stream file shorter than header", buf.size());
  if (std::memcmp(buf.data(), kMagic, 8) != 0)
    throw FormatError("bad stream file magic", 0);
  std::size_t p = 8;
  auto get_u32 = [&]() {
    std::uint32_t v;
    std::memcpy(&v, buf.data() + p, 4);
    p += 4;
    return v;
  };
  auto get_u64 = [&]() {
    std::uint64_t v;
    std::memcpy(&v, buf.data() + p, 8);
    p += 8;
    return v;
  };
  std::uint32_t version = get_u32();
  if (version != kVersion) throw FormatError("unsupported stream file version", 8);
  Header h;
  std::uint32_t enc = get_u32();
  if (enc > 1) throw FormatError("unknown value encoding", 12);
  h.meta.encoding = static_cast<ValueEncoding>(enc);
  h.meta.n_rows = get_u64();
  h.meta.n_cols = get_u64();
  h.meta.fp_scale_log2 = get_u32();
  get_u32();
  h.meta.m = get_u64();
  return h;
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open stream file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace

void write_stream_file(const std::string& path, const StreamMeta& meta,
                       const std::vector<UpdateEvent>& events) {
  StreamMeta m = meta;
  m.m = events.size();
  std::string out = encode_header(m);
  out.reserve(out.size() + events.size() * 6);
  for (const UpdateEvent& e : events) {
    put_varint(out, e.row);
    put_varint(out, e.col);
    if (m.encoding == ValueEncoding::unit_sign) {
      if (e.value_fp != 1 && e.value_fp != -1)
        throw DomainError("unit_sign encoding requires +-1 values");
      out.push_back(e.value_fp == 1 ? 1 : 0);
    } else {
      put_varint(out, zigzag_encode(e.value_fp));
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write stream file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw ConfigError("short write to stream file: " + path);
}

StreamMeta read_stream_header(const std::string& path) {
  return decode_header(read_all(path)).meta;
}

ReplayStats replay(const std::string& path,
                   const std::function<void(const UpdateEvent&)>& consumer) {
  std::string buf = read_all(path);
  Header h = decode_header(buf);
  ByteReader r{buf, kHeaderBytes, 0};
  ReplayStats stats;
  stats.checksum = 0xcbf29ce484222325ull;
  for (std::uint64_t i = 0; i < h.meta.m; ++i) {
    UpdateEvent e;
    std::uint64_t row = r.varint();
    std::uint64_t col = r.varint();
    if (row >= h.meta.n_rows || col >= h.meta.n_cols)
      throw FormatError("event coordinates outside declared shape", r.offset());
    e.row = static_cast<std::uint32_t>(row);
    e.col = static_cast<std::uint32_t>(col);
    if (h.meta.encoding == ValueEncoding::unit_sign) {
      if (r.pos >= buf.size())
        throw FormatError("truncated event body", r.offset());
      e.value_fp = buf[r.pos++] ? 1 : -1;
    } else {
      e.value_fp = zigzag_decode(r.varint());
    }
    stats.checksum = event_checksum_step(stats.checksum, e);
    ++stats.count;
    if (consumer) consumer(e);
  }
  if (r.pos != buf.size())
    throw FormatError("stream body longer than declared length", r.offset());
  return stats;
}

std::pair<StreamMeta, std::vector<UpdateEvent>> load_stream_file(const std::string& path) {
  StreamMeta meta = read_stream_header(path);
  std::vector<UpdateEvent> events;
  events.reserve(meta.m);
  replay(path, [&](const UpdateEvent& e) { events.push_back(e); });
  return {meta, std::move(events)};
}

void write_stream_text(const std::string& path, const StreamMeta& meta,
                       const std::vector<UpdateEvent>& events) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot write text stream: " + path);
  char line[96];
  for (const UpdateEvent& e : events) {
    double v = fp_to_double(e.value_fp, meta.fp_scale_log2);
    std::snprintf(line, sizeof line, "%u %u %.17g\n", e.row, e.col, v);
    f << line;
  }
}

std::vector<UpdateEvent> read_stream_text(const std::string& path,
                                          const StreamMeta& meta) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open text stream: " + path);
  std::vector<UpdateEvent> out;
  std::uint64_t row, col;
  double v;
  while (f >> row >> col >> v) {
    if (row >= meta.n_rows || col >= meta.n_cols)
      throw DomainError("text event outside declared shape");
    out.push_back(UpdateEvent{static_cast<std::uint32_t>(row),
                              static_cast<std::uint32_t>(col),
                              double_to_fp(v, meta.fp_scale_log2)});
  }
  return out;
}

ReplayableStream ReplayableStream::from_file(const std::string& path) {
  auto [meta, events] = load_stream_file(path);
  return ReplayableStream(meta, std::move(events));
}

// ---------------------------------------------------------------------------

namespace {

Generated gen_scaled_gaussian(int n, std::uint64_t seed, GenOptions opts,
                              bool squared) {
  if (n < 2) throw ConfigError("generator requires n >= 2");
  if (opts.updates_per_entry < 1)
    throw ConfigError("updates_per_entry must be positive");
  rng::SplitMix64 g(rng::mix64(seed, squared ? 0x5351ull : 0x4c4full));
  Eigen::MatrixXd pre(n, n);
  for (int j = 0; j < n; ++j) {
    double norm_sq = 0;
    for (int i = 0; i < n; ++i) {
      double v = rng::next_normal(g);
      pre(i, j) = v;
      norm_sq += v * v;
    }
    double target = 4.0 / static_cast<double>(j + 1);
    double scale = target / std::sqrt(norm_sq);
    pre.col(j) *= scale;
  }

  Generated out;
  out.meta.n_rows = static_cast<std::uint64_t>(n);
  out.meta.n_cols = static_cast<std::uint64_t>(n);
  out.meta.fp_scale_log2 = opts.fp_scale_log2;
  out.meta.encoding = ValueEncoding::fixed_point;

  const int parts = opts.updates_per_entry;
  out.events.reserve(static_cast<std::size_t>(n) * n * parts);
  Eigen::MatrixXd a(n, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      double v = squared ? pre(i, j) * pre(i, j)
                         : (opts.exp_minus_one ? std::expm1(pre(i, j))
                                               : std::exp(pre(i, j)));
      std::int64_t total = double_to_fp(v, opts.fp_scale_log2);
      a(i, j) = fp_to_double(total, opts.fp_scale_log2);
      // all `parts` updates are emitted so the stream length is exactly
      // parts * n^2 even when a tiny entry quantizes to zero
      std::int64_t part = total / parts;
      for (int t = 0; t < parts; ++t) {
        std::int64_t d = (t == parts - 1) ? total - part * (parts - 1) : part;
        out.events.push_back(UpdateEvent{static_cast<std::uint32_t>(i),
                                         static_cast<std::uint32_t>(j), d});
      }
    }
  }
  rng::SplitMix64 shuf(rng::mix64(seed, 0x73687566ull));
  rng::shuffle(out.events.data(), out.events.size(), shuf);
  out.meta.m = out.events.size();
  if (opts.keep_dense) {
    out.dense_pre = std::move(pre);
    out.dense_a = std::move(a);
  }
  return out;
}

}  // namespace

Generated gen_logdata(int n, std::uint64_t seed, GenOptions opts) {
  return gen_scaled_gaussian(n, seed, opts, /*squared=*/false);
}

Generated gen_sqdata(int n, std::uint64_t seed, GenOptions opts) {
  return gen_scaled_gaussian(n, seed, opts, /*squared=*/true);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gen_vandermonde_fixture(
    int n, const std::vector<double>& alphas) {
  if (static_cast<int>(alphas.size()) != n)
    throw DomainError("need exactly n alphas");
  for (int i = 0; i < n; ++i) {
    if (!(alphas[i] > 0.0)) throw DomainError("alphas must be positive");
    for (int j = i + 1; j < n; ++j)
      if (alphas[i] == alphas[j]) throw DomainError("alphas must be distinct");
  }
  Eigen::MatrixXd a(n, n), la(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      a(i, j) = std::pow(alphas[i], j);
      la(i, j) = j * std::log(alphas[i]);
    }
  }
  return {a, la};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> gen_block_fixture(int n) {
  if (n < 2 || n % 2 != 0) throw DomainError("block fixture requires even n >= 2");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd la = Eigen::MatrixXd::Zero(n, n);
  for (int b = 0; b < n / 2; ++b) {
    int o = 2 * b;
    a(o, o) = 1;
    a(o, o + 1) = 2;
    a(o + 1, o) = 2;
    a(o + 1, o + 1) = 4;
    // entrywise log2 with the 0 -> 0 convention off the blocks
    la(o, o) = 0;
    la(o, o + 1) = 1;
    la(o + 1, o) = 1;
    la(o + 1, o + 1) = 2;
  }
  return {a, la};
}

std::vector<UpdateEvent> stream_from_dense(const Eigen::MatrixXd& a,
                                           std::uint32_t fp_scale_log2,
                                           int parts, std::uint64_t shuffle_seed) {
  if (parts < 1) throw ConfigError("parts must be positive");
  std::vector<UpdateEvent> events;
  events.reserve(static_cast<std::size_t>(a.size()) * parts);
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      std::int64_t total = double_to_fp(a(i, j), fp_scale_log2);
      std::int64_t part = total / parts;
      for (int t = 0; t < parts; ++t) {
        std::int64_t d = (t == parts - 1) ? total - part * (parts - 1) : part;
        if (d != 0)
          events.push_back(UpdateEvent{static_cast<std::uint32_t>(i),
                                       static_cast<std::uint32_t>(j), d});
      }
    }
  }
  if (shuffle_seed) {
    rng::SplitMix64 g(shuffle_seed);
    rng::shuffle(events.data(), events.size(), g);
  }
  return events;
}

CoocResult ingest_cooccurrence(std::istream& text, const CoocOptions& opts) {
  if (opts.vocab_n <= 0) throw ConfigError("co-occurrence vocabulary is empty");
  if (opts.window < 2) throw ConfigError("window must be at least 2");

  std::vector<std::vector<std::string>> lines;
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;
  std::string line;
  while (std::getline(text, line)) {
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string tok;
    while (ls >> tok) {
      ++counts[tok];
      ++total;
      toks.push_back(std::move(tok));
    }
    if (!toks.empty()) lines.push_back(std::move(toks));
  }

  // top vocab_n by count, ties broken lexicographically for determinism
  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::size_t vn = std::min<std::size_t>(ranked.size(), opts.vocab_n);

  CoocResult r;
  r.total_tokens = total;
  std::map<std::string, std::uint32_t> id;
  for (std::size_t i = 0; i < vn; ++i) {
    id[ranked[i].first] = static_cast<std::uint32_t>(i);
    r.vocab.push_back(ranked[i].first);
    r.unigram.push_back(ranked[i].second);
  }

  r.meta.n_rows = vn;
  r.meta.n_cols = vn;
  r.meta.fp_scale_log2 = opts.fp_scale_log2;
  r.meta.encoding = ValueEncoding::fixed_point;

  for (const auto& toks : lines) {
    for (std::size_t t1 = 0; t1 < toks.size(); ++t1) {
      auto it1 = id.find(toks[t1]);
      if (it1 == id.end()) continue;
      std::size_t limit = std::min(toks.size(), t1 + static_cast<std::size_t>(opts.window));
      for (std::size_t t2 = t1 + 1; t2 < limit; ++t2) {
        auto it2 = id.find(toks[t2]);
        if (it2 == id.end()) continue;
        double w = opts.weighting == CoocWeighting::unit
                       ? 1.0
                       : 1.0 / static_cast<double>(t2 - t1);
        std::int64_t fp = double_to_fp(w, opts.fp_scale_log2);
        r.events.push_back(UpdateEvent{it1->second, it2->second, fp});
        r.events.push_back(UpdateEvent{it2->second, it1->second, fp});
      }
    }
  }
  r.meta.m = r.events.size();
  return r;
}

void write_cooc_sidecar(const std::string& path, const CoocResult& r) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot write sidecar: " + path);
  f << "total " << r.total_tokens << "\n";
  for (std::size_t i = 0; i < r.vocab.size(); ++i)
    f << i << " " << r.vocab[i] << " " << r.unigram[i] << "\n";
}

Eigen::MatrixXd accumulate_dense(const StreamMeta& meta,
                                 const std::vector<UpdateEvent>& events,
                                 int threads) {
  const Eigen::Index rows = static_cast<Eigen::Index>(meta.n_rows);
  const Eigen::Index cols = static_cast<Eigen::Index>(meta.n_cols);
  std::vector<std::int64_t> acc(static_cast<std::size_t>(rows) * cols, 0);
  int nt = threads > 0 ? threads : omp_get_max_threads();
  if (nt <= 1) {
    for (const UpdateEvent& e : events)
      acc[static_cast<std::size_t>(e.col) * rows + e.row] += e.value_fp;
  } else {
    // shard by column so each accumulator has a single writer
#pragma omp parallel num_threads(nt)
    {
      int tid = omp_get_thread_num();
      int tn = omp_get_num_threads();
      for (const UpdateEvent& e : events)
        if (static_cast<int>(e.col % static_cast<std::uint32_t>(tn)) == tid)
          acc[static_cast<std::size_t>(e.col) * rows + e.row] += e.value_fp;
    }
  }
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      out(i, j) = fp_to_double(acc[static_cast<std::size_t>(j) * rows + i],
                               meta.fp_scale_log2);
  return out;
}

}  // namespace fsketch::streams
