#pragma once

// Composite Gauss–Legendre quadrature with panel doubling.

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sbt/errors.hpp"

namespace sbt::quadrature {

inline constexpr int kOrder = 16;

/// Abscissae and weights of the 16-point Gauss–Legendre rule on [-1, 1].
const std::array<double, kOrder>& gl_abscissae();
const std::array<double, kOrder>& gl_weights();

/// Appends the nodes and weights of an n-panel composite rule on [a, b].
void append_composite_rule(double a, double b, int panels, std::vector<double>& nodes,
                           std::vector<double>& weights);

template <class F>
double composite(F&& f, double a, double b, int panels) {
  const auto& xs = gl_abscissae();
  const auto& ws = gl_weights();
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    double s = 0.0;
    for (int k = 0; k < kOrder; ++k) s += ws[k] * f(mid + 0.5 * h * xs[k]);
    sum += 0.5 * h * s;
  }
  return sum;
}

struct Estimate {
  double value = 0.0;
  int panels = 0;
};

/// Doubles the panel count until two successive estimates agree to rel_tol.
template <class F>
Estimate integrate(F&& f, double a, double b, double rel_tol, int start_panels = 16,
                   int max_doublings = 10) {
  int panels = start_panels;
  double prev = composite(f, a, b, panels);
  for (int d = 0; d < max_doublings; ++d) {
    panels *= 2;
    const double cur = composite(f, a, b, panels);
    if (std::abs(cur - prev) <= rel_tol * std::abs(cur)) return {cur, panels};
    prev = cur;
  }
  throw ConvergenceError("composite Gauss-Legendre did not reach the requested tolerance");
}

}  // namespace sbt::quadrature
