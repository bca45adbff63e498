#pragma once

// Test-only reference implementations: dense accumulators and brute-force
// inner products the sketches are checked against. These stay independent of
// the sketch code paths.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "fsketch/streams.hpp"

namespace oracles {

/// Exact turnstile accumulator over a sparse vector.
class DenseVectorAccumulator {
 public:
  explicit DenseVectorAccumulator(std::uint64_t universe) : universe_(universe) {}

  void update(std::uint64_t coord, std::int64_t delta) {
    values_[coord] += delta;
    if (values_[coord] == 0) values_.erase(coord);
  }

  std::vector<std::pair<std::uint64_t, std::int64_t>> support() const {
    return {values_.begin(), values_.end()};
  }

  std::size_t support_size() const { return values_.size(); }

  std::int64_t at(std::uint64_t coord) const {
    auto it = values_.find(coord);
    return it == values_.end() ? 0 : it->second;
  }

  std::uint64_t universe() const { return universe_; }

 private:
  std::uint64_t universe_;
  std::map<std::uint64_t, std::int64_t> values_;
};

/// <x, log^c(|y|+1)> from exact values.
inline double exact_log_inner(const std::vector<double>& x,
                              const DenseVectorAccumulator& y,
                              std::uint32_t fp_scale, int c = 1) {
  double sum = 0.0;
  for (const auto& [coord, v] : y.support()) {
    double yv = static_cast<double>(v) / std::ldexp(1.0, fp_scale);
    double l = std::log1p(std::fabs(yv));
    sum += x[coord] * (c == 1 ? l : std::pow(l, c));
  }
  return sum;
}

/// sum_i |x_i| |y_i|^p from exact values.
inline double exact_pow_inner(const std::vector<double>& x,
                              const DenseVectorAccumulator& y,
                              std::uint32_t fp_scale, double p) {
  double sum = 0.0;
  for (const auto& [coord, v] : y.support()) {
    double yv = static_cast<double>(v) / std::ldexp(1.0, fp_scale);
    sum += std::fabs(x[coord]) * std::pow(std::fabs(yv), p);
  }
  return sum;
}

/// <x, |y|^p> with signed x.
inline double exact_signed_pow_inner(const std::vector<double>& x,
                                     const DenseVectorAccumulator& y,
                                     std::uint32_t fp_scale, double p) {
  double sum = 0.0;
  for (const auto& [coord, v] : y.support()) {
    double yv = static_cast<double>(v) / std::ldexp(1.0, fp_scale);
    sum += x[coord] * std::pow(std::fabs(yv), p);
  }
  return sum;
}

inline Eigen::MatrixXd accumulate(const fsketch::streams::StreamMeta& meta,
                                  const std::vector<fsketch::streams::UpdateEvent>& ev) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(meta.n_rows, meta.n_cols);
  std::vector<std::int64_t> acc(meta.n_rows * meta.n_cols, 0);
  for (const auto& e : ev)
    acc[static_cast<std::size_t>(e.col) * meta.n_rows + e.row] += e.value_fp;
  for (std::uint64_t j = 0; j < meta.n_cols; ++j)
    for (std::uint64_t i = 0; i < meta.n_rows; ++i)
      a(i, j) = static_cast<double>(acc[j * meta.n_rows + i]) /
                std::ldexp(1.0, meta.fp_scale_log2);
  return a;
}

}  // namespace oracles
