#include "fsketch/fsketch.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>

#include "fsketch/rng.hpp"

namespace fsketch {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
void put_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), 8);
}
std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) throw FormatError("truncated sketch blob", 0);
  return v;
}
double get_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  if (!in) throw FormatError("truncated sketch blob", 0);
  return v;
}

constexpr double kCountsOccupancy = 0.55;  // target load of the 3-row peeler

}  // namespace

LogSumParams LogSumParams::resolved() const {
  LogSumParams p = *this;
  if (p.universe == 0) throw ConfigError("LogSum universe must be positive");
  if (!(p.epsilon > 0.0 && p.epsilon < 1.0))
    throw ConfigError("LogSum epsilon must lie in (0,1)");
  if (!(p.delta > 0.0 && p.delta < 1.0))
    throw ConfigError("LogSum delta must lie in (0,1)");
  if (p.power_c < 1) throw ConfigError("LogSum power_c must be >= 1");
  double log_n = std::max(1.0, std::log2(static_cast<double>(p.universe)));
  double log_nd =
      std::max(1.0, std::log2(static_cast<double>(p.universe) / p.delta));
  if (p.levels == 0)
    p.levels = static_cast<std::uint32_t>(std::ceil(log_n)) + 2;
  if (p.gamma <= 0.0)
    p.gamma = std::pow(p.epsilon, -2.0) * std::pow(log_nd, p.gamma_log_exp);
  if (p.kset_capacity == 0) {
    double k = p.capacity_const * std::pow(p.epsilon, -2.0) * log_nd * log_nd;
    // support never exceeds the universe, so larger budgets buy nothing
    k = std::min(k, static_cast<double>(p.universe));
    p.kset_capacity = static_cast<std::uint32_t>(std::max(4.0, std::ceil(k)));
  }
  if (p.hash_degree == 0)
    p.hash_degree = static_cast<std::uint32_t>(std::max(2.0, std::ceil(log_n)));
  return p;
}

LogSumParams LogSumParams::budgeted(std::uint64_t universe, double bytes_per_sketch,
                                    LevelBackend backend, std::uint32_t fp_scale_log2,
                                    double epsilon, double delta) {
  LogSumParams p;
  p.universe = universe;
  p.epsilon = epsilon;
  p.delta = delta;
  p.fp_scale_log2 = fp_scale_log2;
  p.backend = backend;
  p.levels = 1;
  p.collapse_saturated_levels = true;
  p.kset_rows = 3;
  double cell_bytes = backend == LevelBackend::counts ? 8.0 : 24.0;
  double cells = std::max(12.0, bytes_per_sketch / cell_bytes);
  double occupancy;
  if (backend == LevelBackend::counts) {
    double buckets = std::max(4.0, std::floor(cells / 3.0));
    p.kset_capacity = static_cast<std::uint32_t>(buckets);
    p.kset_bucket_factor = 1.0;  // capacity tracks buckets directly
    occupancy = kCountsOccupancy * buckets;
  } else {
    double buckets = std::max(4.0, std::floor(cells / 3.0));
    p.kset_capacity = static_cast<std::uint32_t>(std::max(2.0, buckets / 2.0));
    p.kset_bucket_factor = 2.0;
    occupancy = 0.5 * p.kset_capacity;
  }
  double prob = std::min(1.0, occupancy / static_cast<double>(universe));
  p.gamma = 2.0 * prob;  // level 0 has effective probability gamma/2
  return p;
}

LevelSketch::LevelSketch(const LogSumParams& params, std::uint64_t seed)
    : params_(params.resolved()), seed_(seed) {
  const LogSumParams& p = params_;
  double per_level_fail =
      std::max(1e-9, p.delta / static_cast<double>(p.levels));
  bool saturated_kept = false;
  for (std::uint32_t j = 0; j < p.levels; ++j) {
    double prob = std::min(p.gamma * std::ldexp(1.0, -static_cast<int>(j) - 1), 1.0);
    if (prob >= 1.0 && p.collapse_saturated_levels) {
      if (saturated_kept) continue;
      saturated_kept = true;
    }
    Level lv;
    lv.prob = prob;
    lv.hash = HashFamily::make(rng::mix64(seed, 0x6c76ull, j), p.hash_degree,
                               p.universe);
    lv.accept_thr = prob >= 1.0 ? lv.hash.prime() : lv.hash.accept_threshold(prob);
    if (p.backend == LevelBackend::kset) {
      KSetConfig cfg;
      cfg.rows = p.kset_rows;
      cfg.bucket_factor = p.kset_bucket_factor;
      lv.kset.emplace(p.universe, p.kset_capacity, per_level_fail,
                      rng::mix64(seed, 0x6b73ull, j), cfg);
    } else {
      lv.counts_rows = p.kset_rows ? p.kset_rows : 3;
      lv.counts_buckets = std::max<std::uint64_t>(
          2, static_cast<std::uint64_t>(std::ceil(p.kset_bucket_factor *
                                                  p.kset_capacity)));
      lv.counts_seed = rng::mix64(seed, 0x6374ull, j);
      lv.counts_capacity = p.kset_capacity;
      lv.counts.assign(lv.counts_rows * lv.counts_buckets, 0);
    }
    levels_.push_back(std::move(lv));
  }
}

void LevelSketch::update_fp(std::uint64_t coord, std::int64_t delta_fp) {
  if (coord >= params_.universe)
    throw DomainError("LogSum coordinate outside universe");
  for (Level& lv : levels_) {
    if (lv.prob < 1.0 && lv.hash.eval(coord) >= lv.accept_thr) continue;
    ++touches_;
    if (lv.kset) {
      lv.kset->update(coord, delta_fp);
    } else {
      for (std::uint32_t r = 0; r < lv.counts_rows; ++r) {
        std::uint64_t h = rng::mix64(lv.counts_seed, r + 1, coord);
        std::uint64_t b = static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(h) * lv.counts_buckets) >> 64);
        std::int64_t& cell = lv.counts[r * lv.counts_buckets + b];
        cell = checked_add(cell, delta_fp);
      }
    }
  }
}

bool LevelSketch::level_member(std::uint32_t j, std::uint64_t coord) const {
  const Level& lv = levels_[j];
  return lv.prob >= 1.0 || lv.hash.eval(coord) < lv.accept_thr;
}

std::optional<std::vector<std::pair<std::uint64_t, std::int64_t>>>
LevelSketch::decode_level(const Level& lv,
                          const std::function<bool(std::uint64_t)>& guard) const {
  if (lv.kset) {
    KSet::Query q = lv.kset->query();
    if (!q.ok) return std::nullopt;
    return std::move(q.items);
  }

  // counts backend: membership is recomputable, peel with known support
  std::vector<std::uint64_t> members;
  for (std::uint64_t l = 0; l < params_.universe; ++l) {
    if (guard && !guard(l)) continue;
    if (lv.prob < 1.0 && lv.hash.eval(l) >= lv.accept_thr) continue;
    members.push_back(l);
  }

  const std::uint32_t rows = lv.counts_rows;
  const std::uint64_t buckets = lv.counts_buckets;
  auto bucket_of = [&](std::uint32_t r, std::uint64_t coord) {
    std::uint64_t h = rng::mix64(lv.counts_seed, r + 1, coord);
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(h) * buckets) >> 64);
  };

  std::vector<std::int64_t> val = lv.counts;
  std::vector<std::uint32_t> deg(rows * buckets, 0);
  std::vector<std::uint64_t> idsum(rows * buckets, 0);
  for (std::uint64_t l : members) {
    for (std::uint32_t r = 0; r < rows; ++r) {
      std::uint64_t b = r * buckets + bucket_of(r, l);
      ++deg[b];
      idsum[b] += l;
    }
  }

  std::deque<std::uint64_t> ready;
  for (std::uint64_t b = 0; b < deg.size(); ++b)
    if (deg[b] == 1) ready.push_back(b);

  std::vector<std::pair<std::uint64_t, std::int64_t>> out;
  std::size_t resolved = 0;
  while (!ready.empty()) {
    std::uint64_t b = ready.front();
    ready.pop_front();
    if (deg[b] != 1) continue;
    std::uint64_t l = idsum[b];
    std::int64_t v = val[b];
    ++resolved;
    if (v != 0) out.emplace_back(l, v);
    for (std::uint32_t r = 0; r < rows; ++r) {
      std::uint64_t bb = r * buckets + bucket_of(r, l);
      --deg[bb];
      idsum[bb] -= l;
      val[bb] -= v;
      if (deg[bb] == 1) ready.push_back(bb);
    }
  }
  if (resolved != members.size()) return std::nullopt;  // peeling stalled
  std::sort(out.begin(), out.end());
  return out;
}

DecodedSample LevelSketch::decode(
    const std::function<bool(std::uint64_t)>& membership_guard) const {
  // densest (smallest-index) level that recovers wins
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    auto items = decode_level(levels_[j], membership_guard);
    if (!items) continue;
    DecodedSample d;
    d.ok = true;
    d.level = static_cast<int>(j);
    d.prob = levels_[j].prob;
    d.items = std::move(*items);
    return d;
  }
  return DecodedSample{};
}

std::optional<std::vector<std::pair<std::uint64_t, std::int64_t>>>
LevelSketch::level_query(std::uint32_t j,
                         const std::function<bool(std::uint64_t)>& guard) const {
  return decode_level(levels_[j], guard);
}

std::size_t LevelSketch::payload_bytes() const {
  std::size_t bytes = sizeof(std::uint64_t);  // structure seed
  for (const Level& lv : levels_) {
    bytes += 2 * sizeof(std::uint64_t);  // hash seed + store seed
    if (lv.kset)
      bytes += lv.kset->byte_size();
    else
      bytes += lv.counts.size() * sizeof(std::int64_t);
  }
  return bytes;
}

void LevelSketch::save(std::ostream& out) const {
  put_u64(out, 0x4653434f52453101ull);
  put_u64(out, seed_);
  put_u64(out, params_.universe);
  put_f64(out, params_.epsilon);
  put_f64(out, params_.delta);
  put_u64(out, static_cast<std::uint64_t>(params_.power_c));
  put_f64(out, params_.gamma);
  put_u64(out, params_.levels);
  put_u64(out, params_.kset_capacity);
  put_f64(out, params_.capacity_const);
  put_u64(out, params_.kset_rows);
  put_f64(out, params_.kset_bucket_factor);
  put_u64(out, params_.hash_degree);
  put_u64(out, params_.collapse_saturated_levels ? 1 : 0);
  put_u64(out, params_.backend == LevelBackend::counts ? 1 : 0);
  put_u64(out, params_.fp_scale_log2);
  put_u64(out, levels_.size());
  for (const Level& lv : levels_) {
    put_f64(out, lv.prob);
    put_u64(out, lv.accept_thr);
    put_u64(out, lv.hash.seed());
    put_u64(out, lv.hash.degree());
    put_u64(out, lv.hash.universe());
    put_u64(out, lv.hash.prime());
    if (lv.kset) {
      put_u64(out, 0);
      lv.kset->save(out);
    } else {
      put_u64(out, 1);
      put_u64(out, lv.counts_rows);
      put_u64(out, lv.counts_buckets);
      put_u64(out, lv.counts_seed);
      put_u64(out, lv.counts_capacity);
      out.write(reinterpret_cast<const char*>(lv.counts.data()),
                static_cast<std::streamsize>(lv.counts.size() * 8));
    }
  }
}

LevelSketch LevelSketch::load(std::istream& in) {
  if (get_u64(in) != 0x4653434f52453101ull)
    throw FormatError("bad LevelSketch blob magic", 0);
  LevelSketch s;
  s.seed_ = get_u64(in);
  s.params_.universe = get_u64(in);
  s.params_.epsilon = get_f64(in);
  s.params_.delta = get_f64(in);
  s.params_.power_c = static_cast<int>(get_u64(in));
  s.params_.gamma = get_f64(in);
  s.params_.levels = static_cast<std::uint32_t>(get_u64(in));
  s.params_.kset_capacity = static_cast<std::uint32_t>(get_u64(in));
  s.params_.capacity_const = get_f64(in);
  s.params_.kset_rows = static_cast<std::uint32_t>(get_u64(in));
  s.params_.kset_bucket_factor = get_f64(in);
  s.params_.hash_degree = static_cast<std::uint32_t>(get_u64(in));
  s.params_.collapse_saturated_levels = get_u64(in) != 0;
  s.params_.backend = get_u64(in) ? LevelBackend::counts : LevelBackend::kset;
  s.params_.fp_scale_log2 = static_cast<std::uint32_t>(get_u64(in));
  std::uint64_t nlv = get_u64(in);
  for (std::uint64_t j = 0; j < nlv; ++j) {
    Level lv;
    lv.prob = get_f64(in);
    lv.accept_thr = get_u64(in);
    std::uint64_t hseed = get_u64(in);
    std::uint64_t hdeg = get_u64(in);
    std::uint64_t huni = get_u64(in);
    std::uint64_t hprime = get_u64(in);
    lv.hash = HashFamily::make(hseed, static_cast<std::uint32_t>(hdeg), huni, hprime);
    if (get_u64(in) == 0) {
      lv.kset = KSet::load(in);
    } else {
      lv.counts_rows = static_cast<std::uint32_t>(get_u64(in));
      lv.counts_buckets = get_u64(in);
      lv.counts_seed = get_u64(in);
      lv.counts_capacity = static_cast<std::uint32_t>(get_u64(in));
      lv.counts.resize(lv.counts_rows * lv.counts_buckets);
      in.read(reinterpret_cast<char*>(lv.counts.data()),
              static_cast<std::streamsize>(lv.counts.size() * 8));
      if (!in) throw FormatError("truncated LevelSketch blob", 0);
    }
    s.levels_.push_back(std::move(lv));
  }
  return s;
}

bool LevelSketch::state_equal(const LevelSketch& other) const {
  if (levels_.size() != other.levels_.size()) return false;
  for (std::size_t j = 0; j < levels_.size(); ++j) {
    const Level& a = levels_[j];
    const Level& b = other.levels_[j];
    if (a.kset.has_value() != b.kset.has_value()) return false;
    if (a.kset && !a.kset->state_equal(*b.kset)) return false;
    if (!a.kset && a.counts != b.counts) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

LogSumSketch::LogSumSketch(std::vector<double> x, LogSumParams params,
                           std::uint64_t seed)
    : x_(std::move(x)), core_((params.universe = x_.size(), params), seed) {}

LogSumSketch::LogSumSketch(LevelSketch core, std::vector<double> x)
    : x_(std::move(x)), core_(std::move(core)) {}

void LogSumSketch::update(std::uint64_t coord, double delta) {
  update_fp(coord, double_to_fp(delta, core_.params().fp_scale_log2));
}

void LogSumSketch::update_fp(std::uint64_t coord, std::int64_t delta_fp) {
  if (coord >= x_.size()) throw DomainError("LogSum coordinate outside universe");
  ++updates_;
  if (x_[coord] == 0.0) return;  // update guard: x_a != 0
  core_.update_fp(coord, delta_fp);
}

double LogSumSketch::query() const {
  auto guard = [this](std::uint64_t l) { return x_[l] != 0.0; };
  DecodedSample d = core_.decode(guard);
  if (!d.ok)
    throw EstimationUnavailable("all LogSum levels failed to recover");
  const double c = static_cast<double>(core_.params().power_c);
  const std::uint32_t scale = core_.params().fp_scale_log2;
  double sum = 0.0;
  for (const auto& [coord, v] : d.items) {
    double y = fp_to_double(v, scale);
    double l = std::log1p(std::fabs(y));
    sum += x_[coord] * (c == 1.0 ? l : std::pow(l, c));
  }
  return sum / d.prob;
}

void LogSumSketch::save(std::ostream& out) const {
  put_u64(out, 0x46534c4f4753554dull);  // blob magic, version below
  put_u64(out, 1);
  put_u64(out, x_.size());
  out.write(reinterpret_cast<const char*>(x_.data()),
            static_cast<std::streamsize>(x_.size() * 8));
  put_u64(out, updates_);
  core_.save(out);
}

LogSumSketch LogSumSketch::load(std::istream& in) {
  if (get_u64(in) != 0x46534c4f4753554dull || get_u64(in) != 1)
    throw FormatError("bad LogSum blob header", 0);
  std::uint64_t n = get_u64(in);
  std::vector<double> x(n);
  in.read(reinterpret_cast<char*>(x.data()), static_cast<std::streamsize>(n * 8));
  if (!in) throw FormatError("truncated LogSum blob", 0);
  std::uint64_t updates = get_u64(in);
  LogSumSketch s(LevelSketch::load(in), std::move(x));
  s.updates_ = updates;
  return s;
}

// ---------------------------------------------------------------------------

PolySumParams PolySumParams::resolved() const {
  PolySumParams p = *this;
  if (p.universe == 0) throw ConfigError("PolySum universe must be positive");
  if (!(p.p > 0.0) || p.p > 2.0)
    throw ConfigError("PolySum requires p in (0, 2]");
  if (!(p.epsilon > 0.0 && p.epsilon < 1.0))
    throw ConfigError("PolySum epsilon must lie in (0,1)");
  double log_n = std::max(1.0, std::log2(static_cast<double>(p.universe)));
  if (p.copies == 0)
    p.copies = static_cast<std::uint32_t>(
        std::ceil(p.copies_const / (p.epsilon * p.epsilon)));
  if (p.cs_rows == 0)
    p.cs_rows = static_cast<std::uint32_t>(std::max(5.0, std::ceil(log_n / 2.0)));
  if (p.cs_cols == 0)
    p.cs_cols = static_cast<std::uint64_t>(
        std::ceil(p.cols_const * std::pow(p.epsilon, -2.0) * log_n * log_n));
  return p;
}

PolySumSketch::PolySumSketch(std::vector<double> x, PolySumParams params,
                             std::uint64_t seed)
    : params_((params.universe = x.size(), params.resolved())), seed_(seed) {
  pos_.weight.assign(x.size(), 0.0);
  neg_.weight.assign(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) {
      pos_.weight[i] = x[i];
      pos_.support.push_back(i);
    } else if (x[i] < 0.0) {
      neg_.weight[i] = -x[i];
      neg_.support.push_back(i);
    }
  }
  auto init_side = [&](Side& s, std::uint64_t salt) {
    s.seed = rng::mix64(seed_, salt);
    s.sampler = PInverseSampler(rng::mix64(s.seed, 0x7a69ull), params_.p);
    if (!s.support.empty()) {
      s.cells.assign(static_cast<std::size_t>(params_.cs_rows) * params_.cs_cols,
                     0);
      s.allocated = true;
    }
  };
  init_side(pos_, 0x706f73ull);
  init_side(neg_, 0x6e6567ull);
}

void PolySumSketch::side_update(Side& s, std::uint64_t coord, double delta) {
  if (!s.allocated || s.weight[coord] == 0.0) return;
  const double w = std::pow(s.weight[coord], 1.0 / params_.p);
  for (std::uint32_t j = 0; j < params_.copies; ++j) {
    double z = std::min(s.sampler.draw(coord, j), params_.z_clamp);
    double contrib = w * z * delta;
    double scaled = contrib * std::ldexp(1.0, static_cast<int>(params_.fp_scale_log2));
    if (scaled > 8.9e18) scaled = 8.9e18;
    if (scaled < -8.9e18) scaled = -8.9e18;
    std::int64_t contrib_fp = static_cast<std::int64_t>(std::llround(scaled));
    std::uint64_t key = coord * params_.copies + j;
    for (std::uint32_t r = 0; r < params_.cs_rows; ++r) {
      std::uint64_t h = rng::mix64(s.seed, r + 1, key);
      std::uint64_t b = static_cast<std::uint64_t>(
          (static_cast<unsigned __int128>(h) * params_.cs_cols) >> 64);
      std::int64_t sign = (h >> 63) ? 1 : -1;
      s.cells[r * params_.cs_cols + b] += static_cast<__int128>(sign) * contrib_fp;
      ++touches_;
    }
  }
}

void PolySumSketch::update(std::uint64_t coord, double delta) {
  if (coord >= params_.universe)
    throw DomainError("PolySum coordinate outside universe");
  side_update(pos_, coord, delta);
  side_update(neg_, coord, delta);
}

void PolySumSketch::update_fp(std::uint64_t coord, std::int64_t delta_fp,
                              std::uint32_t stream_scale_log2) {
  update(coord, fp_to_double(delta_fp, stream_scale_log2));
}

double PolySumSketch::side_query(const Side& s) const {
  if (!s.allocated) return 0.0;
  std::vector<double> mags;
  mags.reserve(s.support.size() * params_.copies);
  std::vector<double> row_vals(params_.cs_rows);
  const double inv_scale =
      std::ldexp(1.0, -static_cast<int>(params_.fp_scale_log2));
  for (std::uint64_t coord : s.support) {
    for (std::uint32_t j = 0; j < params_.copies; ++j) {
      std::uint64_t key = coord * params_.copies + j;
      for (std::uint32_t r = 0; r < params_.cs_rows; ++r) {
        std::uint64_t h = rng::mix64(s.seed, r + 1, key);
        std::uint64_t b = static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(h) * params_.cs_cols) >> 64);
        double sign = (h >> 63) ? 1.0 : -1.0;
        row_vals[r] =
            sign * static_cast<double>(s.cells[r * params_.cs_cols + b]) * inv_scale;
      }
      std::sort(row_vals.begin(), row_vals.end());
      double med;
      std::uint32_t nr = params_.cs_rows;
      if (nr % 2 == 1)
        med = row_vals[nr / 2];
      else
        med = 0.5 * (row_vals[nr / 2 - 1] + row_vals[nr / 2]);
      mags.push_back(std::fabs(med));
    }
  }
  if (mags.empty()) return 0.0;
  // the (k/2)-th largest decoded magnitude across all logical coordinates
  std::size_t rank = params_.copies / 2;
  if (rank == 0) rank = 1;
  if (rank > mags.size()) rank = mags.size();
  std::nth_element(mags.begin(), mags.begin() + (rank - 1), mags.end(),
                   std::greater<double>());
  double z = mags[rank - 1];
  return 0.5 * std::pow(z, params_.p);
}

double PolySumSketch::query() const {
  return side_query(pos_) - side_query(neg_);
}

std::size_t PolySumSketch::payload_bytes() const {
  std::size_t b = 2 * sizeof(std::uint64_t);
  if (pos_.allocated) b += pos_.cells.size() * sizeof(__int128);
  if (neg_.allocated) b += neg_.cells.size() * sizeof(__int128);
  return b;
}

void PolySumSketch::save(std::ostream& out) const {
  put_u64(out, 0x4653504f4c59ull);
  put_u64(out, 1);
  put_u64(out, params_.universe);
  put_f64(out, params_.p);
  put_f64(out, params_.epsilon);
  put_u64(out, params_.copies);
  put_u64(out, params_.cs_rows);
  put_u64(out, params_.cs_cols);
  put_u64(out, params_.fp_scale_log2);
  put_f64(out, params_.z_clamp);
  put_u64(out, seed_);
  put_u64(out, touches_);
  auto save_side = [&](const Side& s) {
    put_u64(out, s.allocated ? 1 : 0);
    put_u64(out, s.weight.size());
    out.write(reinterpret_cast<const char*>(s.weight.data()),
              static_cast<std::streamsize>(s.weight.size() * 8));
    if (s.allocated)
      out.write(reinterpret_cast<const char*>(s.cells.data()),
                static_cast<std::streamsize>(s.cells.size() * sizeof(__int128)));
  };
  save_side(pos_);
  save_side(neg_);
}

PolySumSketch PolySumSketch::load(std::istream& in) {
  if (get_u64(in) != 0x4653504f4c59ull || get_u64(in) != 1)
    throw FormatError("bad PolySum blob header", 0);
  PolySumParams p;
  p.universe = get_u64(in);
  p.p = get_f64(in);
  p.epsilon = get_f64(in);
  p.copies = static_cast<std::uint32_t>(get_u64(in));
  p.cs_rows = static_cast<std::uint32_t>(get_u64(in));
  p.cs_cols = get_u64(in);
  p.fp_scale_log2 = static_cast<std::uint32_t>(get_u64(in));
  p.z_clamp = get_f64(in);
  std::uint64_t seed = get_u64(in);
  std::uint64_t touches = get_u64(in);

  std::vector<double> x(p.universe, 0.0);
  PolySumSketch s(x, p, seed);  // rebuild layout, then overwrite payload
  auto load_side = [&](Side& side, std::uint64_t salt) {
    bool allocated = get_u64(in) != 0;
    std::uint64_t n = get_u64(in);
    side.weight.resize(n);
    in.read(reinterpret_cast<char*>(side.weight.data()),
            static_cast<std::streamsize>(n * 8));
    side.support.clear();
    for (std::uint64_t i = 0; i < n; ++i)
      if (side.weight[i] > 0.0) side.support.push_back(i);
    side.seed = rng::mix64(seed, salt);
    side.sampler = PInverseSampler(rng::mix64(side.seed, 0x7a69ull), p.p);
    side.allocated = allocated;
    if (allocated) {
      side.cells.resize(static_cast<std::size_t>(p.cs_rows) * p.cs_cols);
      in.read(reinterpret_cast<char*>(side.cells.data()),
              static_cast<std::streamsize>(side.cells.size() * sizeof(__int128)));
    }
    if (!in) throw FormatError("truncated PolySum blob", 0);
  };
  load_side(s.pos_, 0x706f73ull);
  load_side(s.neg_, 0x6e6567ull);
  s.touches_ = touches;
  return s;
}

}  // namespace fsketch
