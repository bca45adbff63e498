#pragma once

#include <cmath>
#include <string>

#include "fsketch/common.hpp"

namespace fsketch {

/// Entrywise transform f applied to the hidden matrix: log^c(|x|+1) or |x|^p.
struct Transform {
  enum class Kind { log_c, pow_p } kind = Kind::log_c;
  double param = 1.0;  // c for log_c (integer >= 1), p for pow_p (0 < p <= 2)

  double operator()(double x) const {
    if (kind == Kind::log_c) {
      double l = std::log1p(std::fabs(x));
      return param == 1.0 ? l : std::pow(l, param);
    }
    return std::pow(std::fabs(x), param);
  }

  /// f^2, used by the row-norm specialization.
  double squared(double x) const {
    double v = (*this)(x);
    return v * v;
  }

  static Transform log1p_c(int c = 1) {
    if (c < 1) throw ConfigError("log power c must be >= 1");
    return Transform{Kind::log_c, static_cast<double>(c)};
  }

  static Transform pow(double p) {
    if (!(p > 0.0) || p > 2.0) throw ConfigError("power p must lie in (0, 2]");
    return Transform{Kind::pow_p, p};
  }

  /// Accepts "log1p", "log1p^c", and "pow:p" spellings.
  static Transform parse(const std::string& s) {
    if (s == "log1p" || s == "log") return log1p_c(1);
    if (s.rfind("log1p^", 0) == 0) return log1p_c(std::stoi(s.substr(6)));
    if (s.rfind("pow:", 0) == 0) return pow(std::stod(s.substr(4)));
    throw ConfigError("unknown transform: " + s);
  }

  std::string name() const {
    if (kind == Kind::log_c)
      return param == 1.0 ? "log1p" : "log1p^" + std::to_string(static_cast<int>(param));
    return "pow:" + std::to_string(param);
  }
};

}  // namespace fsketch
