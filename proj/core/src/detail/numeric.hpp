#pragma once

#include <cmath>
#include <numbers>

namespace sbt::detail {

// ln sinh(a) for a > 0 without overflow.
inline double log_sinh(double a) {
  if (a < 20.0) return std::log(std::sinh(a));
  return a - std::numbers::ln2 + std::log1p(-std::exp(-2.0 * a));
}

// ln cosh(a) for any real a without overflow.
inline double log_cosh(double a) {
  const double b = std::abs(a);
  return b - std::numbers::ln2 + std::log1p(std::exp(-2.0 * b));
}

}  // namespace sbt::detail
