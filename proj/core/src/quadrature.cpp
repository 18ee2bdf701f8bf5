#include "sbt/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>

namespace sbt::quadrature {

namespace {

struct Rule {
  std::array<double, kOrder> x{};
  std::array<double, kOrder> w{};
};

const Rule& rule() {
  static const Rule r = [] {
    using G = boost::math::quadrature::gauss<double, kOrder>;
    const auto& a = G::abscissa();
    const auto& w = G::weights();
    static_assert(kOrder % 2 == 0);
    Rule out;
    constexpr int half = kOrder / 2;
    for (int i = 0; i < half; ++i) {
      out.x[half - 1 - i] = -a[i];
      out.w[half - 1 - i] = w[i];
      out.x[half + i] = a[i];
      out.w[half + i] = w[i];
    }
    return out;
  }();
  return r;
}

}  // namespace

const std::array<double, kOrder>& gl_abscissae() { return rule().x; }
const std::array<double, kOrder>& gl_weights() { return rule().w; }

void append_composite_rule(double a, double b, int panels, std::vector<double>& nodes,
                           std::vector<double>& weights) {
  const auto& r = rule();
  const double h = (b - a) / panels;
  nodes.reserve(nodes.size() + static_cast<std::size_t>(panels) * kOrder);
  weights.reserve(weights.size() + static_cast<std::size_t>(panels) * kOrder);
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (int k = 0; k < kOrder; ++k) {
      nodes.push_back(mid + 0.5 * h * r.x[k]);
      weights.push_back(0.5 * h * r.w[k]);
    }
  }
}

}  // namespace sbt::quadrature
