#include "fsketch/matprod.hpp"

#include <omp.h>

#include <cmath>

#include "fsketch/rng.hpp"

namespace fsketch {

LogSumParams MatrixProductSketch::level_params(double delta_per_sketch) const {
  if (params_.bytes_per_row_sketch > 0.0) {
    LogSumParams p = LogSumParams::budgeted(universe_, params_.bytes_per_row_sketch,
                                            params_.backend, fp_scale_,
                                            epsilon_, delta_per_sketch);
    if (params_.levels) p.levels = params_.levels;
    if (params_.gamma > 0) p.gamma = params_.gamma;
    return p;
  }
  LogSumParams p;
  p.universe = universe_;
  p.epsilon = epsilon_;
  p.delta = delta_per_sketch;
  p.backend = params_.backend;
  p.levels = params_.levels;
  p.kset_capacity = params_.kset_capacity;
  p.gamma = params_.gamma;
  p.kset_rows = params_.kset_rows;
  p.kset_bucket_factor = params_.kset_bucket_factor;
  p.collapse_saturated_levels = params_.collapse_saturated_levels;
  p.fp_scale_log2 = fp_scale_;
  return p.resolved();
}

MatrixProductSketch::MatrixProductSketch(std::uint64_t n_rows, Eigen::MatrixXd b,
                                         Transform f, double epsilon, double delta,
                                         std::uint64_t seed, MatProdParams params)
    : n_rows_(n_rows),
      universe_(static_cast<std::uint64_t>(b.rows())),
      b_(std::move(b)),
      f_(f),
      epsilon_(epsilon),
      delta_(delta),
      seed_(seed),
      params_(params),
      square_(params.square_transform),
      fp_scale_(params.fp_scale_log2) {
  if (n_rows_ == 0 || universe_ == 0)
    throw ConfigError("matrix product sketch requires nonempty dimensions");
  if (b_.cols() < 1) throw ConfigError("B must have at least one column");

  bool sign_only = true;
  for (Eigen::Index c = 0; c < b_.cols() && sign_only; ++c)
    for (Eigen::Index r = 0; r < b_.rows(); ++r) {
      double v = b_(r, c);
      if (v != 0.0 && v != 1.0 && v != -1.0) {
        sign_only = false;
        break;
      }
    }
  if (!sign_only && !params_.allow_general_b)
    throw ConfigError(
        "B has entries outside {-1,0,1}; enable the generalized path to accept");

  row_guard_.assign(universe_, 0);
  for (Eigen::Index r = 0; r < b_.rows(); ++r) {
    bool nz = false;
    for (Eigen::Index c = 0; c < b_.cols(); ++c)
      if (b_(r, c) != 0.0) {
        nz = true;
        break;
      }
    row_guard_[static_cast<std::size_t>(r)] = nz ? 1 : 0;
    if (!nz) guard_all_ = false;
  }

  poly_cells_ = f_.kind == Transform::Kind::pow_p &&
                params_.sharing == CellSharing::per_cell;

  const double per_sketch_delta = std::max(
      1e-9, delta_ / (static_cast<double>(n_rows_) * static_cast<double>(b_.cols())));

  if (params_.sharing == CellSharing::shared_row) {
    LogSumParams lp = level_params(per_sketch_delta);
    shared_rows_.reserve(n_rows_);
    for (std::uint64_t i = 0; i < n_rows_; ++i)
      shared_rows_.emplace_back(lp, rng::mix64(seed_, 0x726f77ull, i));
  } else if (poly_cells_) {
    PolySumParams pp = params_.poly;
    pp.universe = universe_;
    // the row-norm specialization estimates with f^2 = |x|^(2p)
    pp.p = square_ ? 2.0 * f_.param : f_.param;
    if (pp.p > 2.0)
      throw ConfigError("row-norm sketch for |x|^p cells requires p <= 1");
    pp.epsilon = epsilon_;
    poly_grid_.reserve(n_rows_ * static_cast<std::uint64_t>(b_.cols()));
    for (std::uint64_t i = 0; i < n_rows_; ++i)
      for (Eigen::Index c = 0; c < b_.cols(); ++c) {
        std::vector<double> x(universe_);
        for (std::uint64_t r = 0; r < universe_; ++r)
          x[r] = b_(static_cast<Eigen::Index>(r), c);
        poly_grid_.emplace_back(std::move(x), pp,
                                rng::mix64(seed_, i, static_cast<std::uint64_t>(c)));
      }
  } else {
    LogSumParams lp = level_params(per_sketch_delta);
    double per_level_fail = std::max(1e-9, lp.delta / lp.levels);
    per_cell_rows_.reserve(n_rows_);
    for (std::uint64_t i = 0; i < n_rows_; ++i) {
      PerCellRow row;
      bool saturated_kept = false;
      std::vector<double> probs;
      for (std::uint32_t j = 0; j < lp.levels; ++j) {
        double prob = std::min(lp.gamma * std::ldexp(1.0, -static_cast<int>(j) - 1), 1.0);
        if (prob >= 1.0 && lp.collapse_saturated_levels) {
          if (saturated_kept) continue;
          saturated_kept = true;
        }
        PerCellRow::LevelMeta meta;
        meta.prob = prob;
        meta.hash = HashFamily::make(rng::mix64(seed_, i * 131 + 7, j),
                                     lp.hash_degree, universe_);
        meta.accept_thr =
            prob >= 1.0 ? meta.hash.prime() : meta.hash.accept_threshold(prob);
        row.levels.push_back(std::move(meta));
        probs.push_back(prob);
      }
      KSetConfig cfg;
      cfg.rows = lp.kset_rows;
      cfg.bucket_factor = lp.kset_bucket_factor;
      for (Eigen::Index c = 0; c < b_.cols(); ++c)
        for (std::size_t lv = 0; lv < row.levels.size(); ++lv)
          row.cells.emplace_back(universe_, lp.kset_capacity, per_level_fail,
                                 rng::mix64(seed_, i * 1000003 + lv,
                                            static_cast<std::uint64_t>(c)),
                                 cfg);
      per_cell_rows_.push_back(std::move(row));
    }
  }
}

void MatrixProductSketch::update(std::uint64_t i, std::uint64_t j, double delta) {
  update_fp(i, j, double_to_fp(delta, fp_scale_));
}

void MatrixProductSketch::update_log_cell_row(std::uint64_t i, std::uint64_t j,
                                              std::int64_t delta_fp) {
  PerCellRow& row = per_cell_rows_[i];
  const std::size_t nlv = row.levels.size();
  for (std::size_t lv = 0; lv < nlv; ++lv) {
    const PerCellRow::LevelMeta& meta = row.levels[lv];
    if (meta.prob < 1.0 && meta.hash.eval(j) >= meta.accept_thr) continue;
    for (Eigen::Index c = 0; c < b_.cols(); ++c) {
      if (b_(static_cast<Eigen::Index>(j), c) == 0.0) continue;
      row.cells[static_cast<std::size_t>(c) * nlv + lv].update(j, delta_fp);
    }
  }
}

void MatrixProductSketch::update_fp(std::uint64_t i, std::uint64_t j,
                                    std::int64_t delta_fp) {
  if (i >= n_rows_) throw DomainError("matrix product row index out of range");
  if (j >= universe_) throw DomainError("matrix product column index out of range");
  ++updates_;
  if (params_.sharing == CellSharing::shared_row) {
    if (!guard_all_ && !row_guard_[j]) return;
    shared_rows_[i].update_fp(j, delta_fp);
  } else if (poly_cells_) {
    double v = fp_to_double(delta_fp, fp_scale_);
    for (Eigen::Index c = 0; c < b_.cols(); ++c)
      poly_grid_[i * static_cast<std::uint64_t>(b_.cols()) +
                 static_cast<std::uint64_t>(c)]
          .update(j, v);
  } else {
    update_log_cell_row(i, j, delta_fp);
  }
}

void MatrixProductSketch::ingest(const std::vector<streams::UpdateEvent>& events,
                                 bool transposed, int threads) {
  int nt = threads > 0 ? threads : omp_get_max_threads();
  if (nt <= 1) {
    for (const streams::UpdateEvent& e : events) {
      std::uint64_t i = transposed ? e.col : e.row;
      std::uint64_t j = transposed ? e.row : e.col;
      update_fp(i, j, e.value_fp);
    }
    return;
  }
  // bounds are validated up front; exceptions must not cross the omp region
  for (const streams::UpdateEvent& e : events) {
    std::uint64_t i = transposed ? e.col : e.row;
    std::uint64_t j = transposed ? e.row : e.col;
    if (i >= n_rows_) throw DomainError("matrix product row index out of range");
    if (j >= universe_)
      throw DomainError("matrix product column index out of range");
  }
  std::uint64_t updates_before = updates_;
  std::uint64_t total = 0;
  bool overflowed = false;
#pragma omp parallel num_threads(nt) reduction(+ : total) reduction(|| : overflowed)
  {
    int tid = omp_get_thread_num();
    int tn = omp_get_num_threads();
    try {
      for (const streams::UpdateEvent& e : events) {
        std::uint64_t i = transposed ? e.col : e.row;
        if (static_cast<int>(i % static_cast<std::uint64_t>(tn)) != tid) continue;
        std::uint64_t j = transposed ? e.row : e.col;
        ++total;
        if (params_.sharing == CellSharing::shared_row) {
          if (!guard_all_ && !row_guard_[j]) continue;
          shared_rows_[i].update_fp(j, e.value_fp);
        } else if (poly_cells_) {
          double v = fp_to_double(e.value_fp, fp_scale_);
          for (Eigen::Index c = 0; c < b_.cols(); ++c)
            poly_grid_[i * static_cast<std::uint64_t>(b_.cols()) +
                       static_cast<std::uint64_t>(c)]
                .update(j, v);
        } else {
          update_log_cell_row(i, j, e.value_fp);
        }
      }
    } catch (const std::exception&) {
      overflowed = true;
    }
  }
  if (overflowed)
    throw PipelineError("sketch update failed during parallel ingest");
  updates_ = updates_before + total;
}

DecodedSample MatrixProductSketch::decode_row(std::uint64_t i) const {
  if (params_.sharing != CellSharing::shared_row)
    throw DomainError("decode_row requires the shared_row profile");
  if (i >= n_rows_) throw DomainError("row index out of range");
  if (guard_all_) return shared_rows_[i].decode();
  const std::vector<std::uint8_t>& guard = row_guard_;
  return shared_rows_[i].decode(
      [&guard](std::uint64_t l) { return guard[l] != 0; });
}

MatrixProductSketch::QueryResult MatrixProductSketch::query() const {
  QueryResult out;
  const Eigen::Index kk = b_.cols();
  out.z = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_rows_), kk);
  out.mask.assign(n_rows_ * static_cast<std::uint64_t>(kk), 0);

  for (std::uint64_t i = 0; i < n_rows_; ++i) {
    if (params_.sharing == CellSharing::shared_row) {
      DecodedSample d = decode_row(i);
      for (Eigen::Index c = 0; c < kk; ++c) {
        if (!d.ok) {
          out.mask[i * kk + c] = 1;
          ++out.failed_cells;
          continue;
        }
        const Eigen::MatrixXd& b = b_;
        out.z(static_cast<Eigen::Index>(i), c) = sample_estimate(
            d,
            [&b, c](std::uint64_t l) { return b(static_cast<Eigen::Index>(l), c); },
            f_, square_, fp_scale_);
      }
    } else if (poly_cells_) {
      for (Eigen::Index c = 0; c < kk; ++c)
        out.z(static_cast<Eigen::Index>(i), c) =
            poly_grid_[i * static_cast<std::uint64_t>(kk) +
                       static_cast<std::uint64_t>(c)]
                .query();
    } else {
      const PerCellRow& row = per_cell_rows_[i];
      const std::size_t nlv = row.levels.size();
      for (Eigen::Index c = 0; c < kk; ++c) {
        bool done = false;
        for (std::size_t lv = 0; lv < nlv && !done; ++lv) {
          KSet::Query q = row.cells[static_cast<std::size_t>(c) * nlv + lv].query();
          if (!q.ok) continue;
          DecodedSample d;
          d.ok = true;
          d.prob = row.levels[lv].prob;
          d.items = std::move(q.items);
          const Eigen::MatrixXd& b = b_;
          out.z(static_cast<Eigen::Index>(i), c) = sample_estimate(
              d,
              [&b, c](std::uint64_t l) { return b(static_cast<Eigen::Index>(l), c); },
              f_, square_, fp_scale_);
          done = true;
        }
        if (!done) {
          out.mask[i * kk + c] = 1;
          ++out.failed_cells;
        }
      }
    }
  }
  return out;
}

std::size_t MatrixProductSketch::payload_bytes() const {
  std::size_t bytes = 0;
  for (const LevelSketch& s : shared_rows_) bytes += s.payload_bytes();
  for (const PerCellRow& row : per_cell_rows_) {
    bytes += row.levels.size() * 2 * sizeof(std::uint64_t);
    for (const KSet& k : row.cells) bytes += k.byte_size() + sizeof(std::uint64_t);
  }
  for (const PolySumSketch& s : poly_grid_) bytes += s.payload_bytes();
  return bytes;
}

bool MatrixProductSketch::state_equal(const MatrixProductSketch& other) const {
  if (shared_rows_.size() != other.shared_rows_.size()) return false;
  for (std::size_t i = 0; i < shared_rows_.size(); ++i)
    if (!shared_rows_[i].state_equal(other.shared_rows_[i])) return false;
  if (per_cell_rows_.size() != other.per_cell_rows_.size()) return false;
  for (std::size_t i = 0; i < per_cell_rows_.size(); ++i) {
    if (per_cell_rows_[i].cells.size() != other.per_cell_rows_[i].cells.size())
      return false;
    for (std::size_t c = 0; c < per_cell_rows_[i].cells.size(); ++c)
      if (!per_cell_rows_[i].cells[c].state_equal(other.per_cell_rows_[i].cells[c]))
        return false;
  }
  return true;
}

RowNormSketch::RowNormSketch(std::uint64_t n_rows, std::uint64_t n_cols,
                             Transform f, double epsilon, double delta,
                             std::uint64_t seed, MatProdParams params)
    : inner_((params.square_transform = true,
              MatrixProductSketch(n_rows, Eigen::MatrixXd::Ones(
                                              static_cast<Eigen::Index>(n_cols), 1),
                                  f, epsilon, delta, seed, params))) {}

void RowNormSketch::update(std::uint64_t i, std::uint64_t j, double delta) {
  inner_.update(i, j, delta);
}

void RowNormSketch::update_fp(std::uint64_t i, std::uint64_t j,
                              std::int64_t delta_fp) {
  inner_.update_fp(i, j, delta_fp);
}

void RowNormSketch::ingest(const std::vector<streams::UpdateEvent>& events,
                           bool transposed, int threads) {
  inner_.ingest(events, transposed, threads);
}

RowNormSketch::QueryResult RowNormSketch::query() const {
  MatrixProductSketch::QueryResult q = inner_.query();
  QueryResult out;
  out.norms_sq = q.z.col(0);
  out.mask = std::move(q.mask);
  return out;
}

}  // namespace fsketch
