#pragma once

#include <cmath>
#include <limits>

namespace bifamp {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;
inline constexpr double kSqrt2Pi = 2.5066282746310005024157652848110;

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double hi = a > b ? a : b;
  double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

// log N(x; mean, var)
inline double log_normal_pdf(double x, double mean, double var) {
  double d = x - mean;
  return -0.5 * (d * d / var + std::log(var) + kLog2Pi);
}

// log erfc(x), stable for large positive x where erfc underflows.
inline double log_erfc(double x) {
  if (x < 25.0) return std::log(std::erfc(x));
  // erfc(x) ~ exp(-x^2)/(x sqrt(pi)) * (1 - 1/(2x^2) + 3/(4x^4))
  double x2 = x * x;
  double series = 1.0 - 0.5 / x2 + 0.75 / (x2 * x2);
  return -x2 - std::log(x) - 0.5 * std::log(M_PI) + std::log(series);
}

// log Phi(x) for the standard normal CDF.
inline double log_normal_cdf(double x) {
  return log_erfc(-x / M_SQRT2) - M_LN2;
}

// erfcx(x) = exp(x^2) erfc(x), stable for x >= 0 (used with x of any sign).
inline double erfcx(double x) {
  if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
  if (x < 25.0) return std::exp(x * x) * std::erfc(x);
  double x2 = x * x;
  return (1.0 - 0.5 / x2 + 0.75 / (x2 * x2)) / (x * std::sqrt(M_PI));
}

// Inverse Mills ratio phi(b)/Phi(-b) evaluated stably for any b.
inline double mills_ratio_inverse(double b) {
  // phi(b)/Phi(-b) = sqrt(2/pi) / erfcx(b/sqrt(2))
  return std::sqrt(2.0 / M_PI) / erfcx(b / M_SQRT2);
}

}  // namespace bifamp
