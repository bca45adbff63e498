#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace fsketch {

// Configuration / argument problems. CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Out-of-range coordinates, dimension mismatches and similar caller errors.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

// Corrupt or truncated stream files.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& msg, std::uint64_t byte_offset)
      : std::runtime_error(msg + " (at byte " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::uint64_t offset;
};

// Runtime failures inside a sketch or pipeline. CLI maps these to exit code 3.
class PipelineError : public std::runtime_error {
 public:
  explicit PipelineError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown by a vector-sketch query when every level reports Fail.
class EstimationUnavailable : public PipelineError {
 public:
  explicit EstimationUnavailable(const std::string& msg) : PipelineError(msg) {}
};

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out;
  if (__builtin_add_overflow(a, b, &out))
    throw PipelineError("64-bit accumulator overflow in sketch cell");
  return out;
}

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out;
  if (__builtin_mul_overflow(a, b, &out))
    throw PipelineError("64-bit multiply overflow in sketch cell");
  return out;
}

// Fixed-point helpers. Stream values are stored as signed integers scaled by
// 2^scale_log2 so that turnstile cancellation in linear cells is exact.
inline double fp_to_double(std::int64_t v, std::uint32_t scale_log2) {
  return static_cast<double>(v) / std::ldexp(1.0, static_cast<int>(scale_log2));
}

inline std::int64_t double_to_fp(double v, std::uint32_t scale_log2) {
  double scaled = v * std::ldexp(1.0, static_cast<int>(scale_log2));
  if (!(std::fabs(scaled) < 9.0e18))
    throw DomainError("value out of fixed-point range");
  return static_cast<std::int64_t>(std::llround(scaled));
}

}  // namespace fsketch
