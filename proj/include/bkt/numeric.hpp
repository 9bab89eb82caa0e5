#ifndef BKT_NUMERIC_HPP
#define BKT_NUMERIC_HPP

#include <cmath>
#include <limits>
#include <span>

namespace bkt {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)), exact for -inf arguments.
inline double log_sum_exp(double a, double b) noexcept {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a))
               : b + std::log1p(std::exp(a - b));
}

inline double log_sum_exp(std::span<const double> xs) noexcept {
  double m = kNegInf;
  for (double x : xs) m = x > m ? x : m;
  if (m == kNegInf || !std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double inv_logit(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(double p) noexcept { return std::log(p) - std::log1p(-p); }

/// log(p) that maps 0 to -inf without raising.
inline double safe_log(double p) noexcept { return p > 0.0 ? std::log(p) : kNegInf; }

}  // namespace bkt

#endif  // BKT_NUMERIC_HPP
