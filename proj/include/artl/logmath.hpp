#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace artl {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow. Either argument may be log 0.
inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = kLogZero;
  for (double x : xs) m = std::max(m, x);
  if (m == kLogZero || !std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

/// In-place log-softmax of one distribution.
inline void log_softmax(std::span<double> xs) {
  const double lse = log_sum_exp(xs);
  for (double& x : xs) x -= lse;
}

}  // namespace artl
