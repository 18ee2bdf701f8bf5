#include "sbt/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <sstream>
#include <tuple>

#include "detail/numeric.hpp"
#include "sbt/errors.hpp"
#include "sbt/quadrature.hpp"

namespace sbt {

namespace {

using detail::log_cosh;
using detail::log_sinh;

constexpr int kMaxDoublings = 9;

double coth(double a) { return 1.0 / std::tanh(a); }

// ln K and d_x ln K given x + u and x - u separately.
struct LocalKernel {
  double log_k;
  double gx;
};

LocalKernel local_kernel(const SystemSpec& spec, double x, double u, double xpu, double xmu) {
  const double eps = spec.epsilon(), mu = spec.mu();
  switch (spec.kind()) {
    case SystemKind::Toda: {
      const double e = std::exp(-x) * std::cosh(u);
      return {-e, e};
    }
    case SystemKind::RationalCM:
      return {std::log(xmu) + std::log(xpu) - std::log(x), 1.0 / xmu + 1.0 / xpu - 1.0 / x};
    case SystemKind::HyperbolicI: {
      const double a = 0.5 * eps * xpu, c = 0.5 * eps * xmu;
      return {mu * (log_sinh(a) + log_sinh(c) - log_sinh(eps * x)),
              mu * eps * (0.5 * (coth(a) + coth(c)) - coth(eps * x))};
    }
    case SystemKind::HyperbolicII: {
      const double a = 0.5 * eps * xpu, c = 0.5 * eps * xmu;
      return {mu * (log_sinh(eps * x) - log_cosh(a) - log_cosh(c)),
              mu * eps * (coth(eps * x) - 0.5 * (std::tanh(a) + std::tanh(c)))};
    }
  }
  return {0.0, 0.0};
}

void check_args(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad) {
  quad.validate();
  if (!in_x_section(spec, x)) {
    std::ostringstream os;
    os << "x=" << x << " is outside the x-section of " << to_string(spec.kind());
    throw DomainError(os.str());
  }
  if (spec.has_lambda_cap() && !(std::abs(lambda) < spec.lambda_cap())) {
    std::ostringstream os;
    os << "hyperbolic2 eigenfunction integral converges only for |lambda| < epsilon*mu = "
       << spec.lambda_cap() << " (got " << lambda << ")";
    throw RangeError(os.str());
  }
}

// Grading map on [0,1]; rho(1-t) = 1 - rho(t) for both variants.
double grade(double t, bool graded) { return graded ? t * t * t * (10.0 + t * (-15.0 + 6.0 * t)) : t; }
double grade_dt(double t, bool graded) {
  const double s = t * (1.0 - t);
  return graded ? 30.0 * s * s : 1.0;
}

// Integration interval on the u-section: the integrand has decayed by the
// truncation margin at trimmed ends; boundary ends are where K vanishes.
struct Section {
  double x, lambda, w;
  double peak_u, log_peak;
  double lower, upper;
  bool lower_is_boundary, upper_is_boundary;

  bool graded() const { return lower_is_boundary || upper_is_boundary; }
};

Section find_section(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad) {
  Section s{};
  s.x = x;
  s.lambda = lambda;
  s.w = quad.kernel_power;
  s.peak_u = critical_point(spec, lambda, x);

  auto ell = [&](double u, double xpu, double xmu) {
    return s.w * (lambda * u + local_kernel(spec, x, u, xpu, xmu).log_k);
  };
  s.log_peak = ell(s.peak_u, x + s.peak_u, x - s.peak_u);
  const double target = s.log_peak - quad.truncation_margin * std::numbers::ln10;
  const bool bounded = spec.bounded_section();

  // dir = +1 walks toward +u, -1 toward -u. Returns the distance from the
  // peak to the cut and whether the cut is the domain boundary.
  auto walk = [&](int dir) -> std::pair<double, bool> {
    const double dmax = bounded ? (dir > 0 ? x - s.peak_u : x + s.peak_u) : kInf;
    auto at = [&](double d) {
      const double u = s.peak_u + dir * d;
      // distance to the boundary in the walking direction is dmax - d
      const double xpu = dir > 0 ? x + u : dmax - d;
      const double xmu = dir > 0 ? dmax - d : x - u;
      return bounded ? ell(u, xpu, xmu) : ell(u, x + u, x - u);
    };
    double lo = 0.0;
    double hi = bounded ? std::min(0.25, 0.5 * dmax) : 0.25;
    while (at(hi) > target) {
      lo = hi;
      if (bounded) {
        if (hi >= dmax) break;
        hi = std::min(2.0 * hi, dmax);
        if (hi == dmax) {
          // K vanishes at the boundary; ell -> -inf there, so the crossing is inside
          hi = dmax;
          break;
        }
      } else {
        hi *= 2.0;
        if (hi > 1e6) throw ConvergenceError("integrand does not decay on the u-section");
      }
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid >= dmax) break;
      if (at(mid) > target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    if (bounded && dmax - hi <= 1e-9 * std::max(1.0, x)) return {dmax, true};
    return {hi, false};
  };

  const auto [dr, rb] = walk(+1);
  const auto [dl, lb] = walk(-1);
  s.upper = rb ? x : s.peak_u + dr;
  s.lower = lb ? -x : s.peak_u - dl;
  s.upper_is_boundary = rb;
  s.lower_is_boundary = lb;
  return s;
}

struct Sums {
  double i0 = 0.0;  // \int K^w / peak
  double i1 = 0.0;  // \int w d_x ln K K^w / peak
};

Sums integrate_section(const SystemSpec& spec, const Section& s, int panels, bool with_dx,
                       const std::function<double(double)>* g = nullptr, double* ig = nullptr) {
  const auto& xs = quadrature::gl_abscissae();
  const auto& ws = quadrature::gl_weights();
  const double len = s.upper - s.lower;
  const bool graded = s.graded();
  const double off_plus = s.lower_is_boundary ? 0.0 : s.x + s.lower;
  const double off_minus = s.upper_is_boundary ? 0.0 : s.x - s.upper;
  const double h = 1.0 / panels;
  Sums out;
  double sg = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h;
    for (int k = 0; k < quadrature::kOrder; ++k) {
      const double t = mid + 0.5 * h * xs[k];
      const double r = grade(t, graded);
      const double u = s.lower + len * r;
      const double xpu = off_plus + len * r;
      const double xmu = off_minus + len * grade(1.0 - t, graded);
      const LocalKernel lk = local_kernel(spec, s.x, u, xpu, xmu);
      const double wt = 0.5 * h * ws[k] * len * grade_dt(t, graded);
      const double kv = std::exp(s.w * (s.lambda * u + lk.log_k) - s.log_peak);
      out.i0 += wt * kv;
      if (with_dx) out.i1 += wt * kv * s.w * lk.gx;
      if (g) sg += wt * kv * (*g)(u);
    }
  }
  if (ig) *ig = sg;
  return out;
}

struct Converged {
  Section section;
  int panels;
  Sums sums;
};

Converged converge(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad, bool with_dx) {
  check_args(spec, lambda, x, quad);
  const Section s = find_section(spec, lambda, x, quad);
  int panels = quad.n_panels;
  Sums prev = integrate_section(spec, s, panels, with_dx);
  for (int d = 0; d < kMaxDoublings; ++d) {
    panels *= 2;
    const Sums cur = integrate_section(spec, s, panels, with_dx);
    bool ok = std::abs(cur.i0 - prev.i0) <= quad.rel_tol * std::abs(cur.i0);
    if (with_dx) {
      const double b1 = cur.i1 / cur.i0, b0 = prev.i1 / prev.i0;
      ok = ok && std::abs(b1 - b0) <= quad.rel_tol * std::max(1.0, std::abs(b1));
    }
    if (ok) return {s, panels, cur};
    prev = cur;
  }
  std::ostringstream os;
  os << "eigenfunction quadrature did not converge to rel_tol=" << quad.rel_tol << " at x=" << x
     << ", lambda=" << lambda;
  throw ConvergenceError(os.str());
}

}  // namespace

void QuadratureSpec::validate() const {
  if (n_panels < 8) throw DomainError("QuadratureSpec.n_panels must be >= 8");
  if (!(rel_tol > 0.0)) throw DomainError("QuadratureSpec.rel_tol must be positive");
  if (!(truncation_margin > 0.0)) throw DomainError("QuadratureSpec.truncation_margin must be positive");
  if (!(kernel_power > 0.0)) throw DomainError("QuadratureSpec.kernel_power must be positive");
}

SectionRule SectionRule::build(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad,
                               int panels) {
  check_args(spec, lambda, x, quad);
  const Section s = find_section(spec, lambda, x, quad);
  SectionRule rule;
  rule.x_ = x;
  rule.lower_ = s.lower;
  rule.upper_ = s.upper;
  rule.panels_ = panels;
  rule.log_peak_ = s.log_peak;

  std::vector<double> ts, tw;
  quadrature::append_composite_rule(0.0, 1.0, panels, ts, tw);
  const double len = s.upper - s.lower;
  const bool graded = s.graded();
  const double off_plus = s.lower_is_boundary ? 0.0 : x + s.lower;
  const double off_minus = s.upper_is_boundary ? 0.0 : x - s.upper;
  rule.u_.reserve(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double t = ts[i];
    const double r = grade(t, graded);
    const double u = s.lower + len * r;
    const LocalKernel lk = local_kernel(spec, x, u, off_plus + len * r, off_minus + len * grade(1.0 - t, graded));
    rule.u_.push_back(u);
    rule.w_.push_back(tw[i] * len * grade_dt(t, graded));
    rule.k_.push_back(std::exp(s.w * (lambda * u + lk.log_k) - s.log_peak));
    rule.gx_.push_back(s.w * lk.gx);
  }
  return rule;
}

int converged_panels(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad) {
  return converge(spec, lambda, x, quad, true).panels;
}

double log_psi(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad) {
  const Converged c = converge(spec, lambda, x, quad, false);
  return c.section.log_peak + std::log(c.sums.i0);
}

double psi(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad) {
  return std::exp(log_psi(spec, lambda, x, quad));
}

double log_psi_drift(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad) {
  const Converged c = converge(spec, lambda, x, quad, true);
  return c.sums.i1 / c.sums.i0;
}

double eigen_residual(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad, double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step h must be positive");
  if (quad.kernel_power != 1.0) {
    throw DomainError("eigen_residual is defined for kernel_power = 1 (the unscaled Hamiltonian)");
  }
  check_args(spec, lambda, x - h, quad);
  check_args(spec, lambda, x + h, quad);
  const int panels = converge(spec, lambda, x, quad, false).panels;
  auto fixed_log_psi = [&](double y) {
    const Section s = find_section(spec, lambda, y, quad);
    return s.log_peak + std::log(integrate_section(spec, s, panels, false).i0);
  };
  const double l0 = fixed_log_psi(x);
  const double lp = fixed_log_psi(x + h);
  const double lm = fixed_log_psi(x - h);
  const double second = (std::expm1(lp - l0) + std::expm1(lm - l0)) / (h * h);
  return std::abs(0.5 * second - quantum_potential(spec, x) - 0.5 * lambda * lambda);
}

double bessel_i_three_halves(double z) {
  if (!(z > 0.0)) throw DomainError("bessel_i_three_halves requires z > 0");
  double bracket;
  if (z < 0.5) {
    // cosh z - sinh z / z = sum_{k>=1} 2k z^{2k} / (2k+1)!
    const double z2 = z * z;
    double term = z2 / 6.0;  // k = 1 term without the factor 2k: z^2 / 3!
    bracket = 0.0;
    for (int k = 1; k < 30; ++k) {
      bracket += 2.0 * k * term;
      term *= z2 / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
    }
  } else {
    bracket = std::cosh(z) - std::sinh(z) / z;
  }
  return std::sqrt(2.0 / (std::numbers::pi * z)) * bracket;
}

double macdonald_k(double nu, double z) {
  if (!(z > 0.0)) throw DomainError("macdonald_k requires z > 0");
  const double a = std::abs(nu);
  auto phase = [&](double t) { return -z * std::cosh(t) + a * t; };
  const double tp = std::asinh(a / z);
  const double top = phase(tp);
  double tmax = tp + 1.0;
  while (phase(tmax) > top - 45.0) tmax = tp + 2.0 * (tmax - tp);
  auto f = [&](double t) { return std::exp(phase(t) - top) * 0.5 * (1.0 + std::exp(-2.0 * a * t)); };
  const auto est = quadrature::integrate(f, 0.0, tmax, 1e-14, 16, 12);
  return std::exp(top) * est.value;
}

std::optional<double> psi_closed_form(const SystemSpec& spec, double lambda, double x) {
  if (!in_x_section(spec, x)) throw DomainError("psi_closed_form: x outside the x-section");
  const double eps = spec.epsilon(), mu = spec.mu();
  switch (spec.kind()) {
    case SystemKind::Toda:
      return 2.0 * macdonald_k(lambda, std::exp(-x));
    case SystemKind::RationalCM: {
      const double l = std::abs(lambda);
      if (l == 0.0) return 2.0 * x * x / 3.0;
      return std::pow(l, -1.5) * std::sqrt(2.0 * std::numbers::pi * x) * bessel_i_three_halves(l * x);
    }
    case SystemKind::HyperbolicI: {
      if (mu != 1.0) return std::nullopt;
      if (lambda == 0.0) return x * coth(eps * x) - 1.0 / eps;
      if (std::abs(std::abs(lambda) - eps) < 1e-12 * eps) return std::nullopt;
      const double sinc = std::sinh(lambda * x) / lambda;
      return eps / (eps * eps - lambda * lambda) * (eps * coth(eps * x) * sinc - std::cosh(lambda * x));
    }
    case SystemKind::HyperbolicII: {
      if (!(std::abs(lambda) < eps * mu)) return std::nullopt;
      // P^{1/2-mu}_{lambda/eps - 1/2}(cosh xi) = sqrt(2/pi) sinh(xi)^{1/2-mu} / Gamma(mu)
      //   * \int_0^xi cosh(lambda t / eps) (cosh xi - cosh t)^{mu-1} dt
      const double xi = eps * x;
      auto f = [&](double s) {
        const double r = grade(s, true);
        const double t = xi * r;
        const double gap = xi * grade(1.0 - s, true);  // xi - t
        const double diff = 2.0 * std::sinh(0.5 * (xi + t)) * std::sinh(0.5 * gap);
        return std::cosh(lambda * t / eps) * std::pow(diff, mu - 1.0) * xi * grade_dt(s, true);
      };
      const double integral = quadrature::integrate(f, 0.0, 1.0, 1e-12, 16, 12).value;
      const double legendre =
          std::sqrt(2.0 / std::numbers::pi) * std::pow(std::sinh(xi), 0.5 - mu) / std::tgamma(mu) * integral;
      const double pre = std::pow(2.0, 2.0 * mu + 1.5) / (std::sqrt(std::numbers::pi) * eps) *
                         std::sqrt(std::sinh(xi)) * std::tgamma(mu + lambda / eps) * std::tgamma(mu - lambda / eps) /
                         std::tgamma(mu);
      return pre * legendre;
    }
  }
  return std::nullopt;
}

double hyperbolic2_printed_ground_state(const SystemSpec& spec, double x) {
  const double eps = spec.epsilon(), mu = spec.mu();
  return 2.0 * std::sqrt(std::numbers::pi) * std::tgamma(mu) / (eps * std::tgamma(mu + 0.5)) *
         std::pow(std::sinh(eps * x), mu);
}

double nu_expectation(const SystemSpec& spec, double lambda, double x, const std::function<double(double)>& g,
                      const QuadratureSpec& quad) {
  check_args(spec, lambda, x, quad);
  const Section s = find_section(spec, lambda, x, quad);
  int panels = quad.n_panels;
  double prev_g = 0.0;
  Sums prev = integrate_section(spec, s, panels, false, &g, &prev_g);
  for (int d = 0; d < kMaxDoublings; ++d) {
    panels *= 2;
    double cur_g = 0.0;
    const Sums cur = integrate_section(spec, s, panels, false, &g, &cur_g);
    const double e1 = cur_g / cur.i0, e0 = prev_g / prev.i0;
    if (std::abs(cur.i0 - prev.i0) <= quad.rel_tol * cur.i0 &&
        std::abs(e1 - e0) <= quad.rel_tol * std::max(1.0, std::abs(e1))) {
      return e1;
    }
    prev = cur;
    prev_g = cur_g;
  }
  throw ConvergenceError("nu_expectation quadrature did not converge");
}

// ---------------------------------------------------------------------------
// NuTable

NuTable::NuTable(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad) {
  check_args(spec, lambda, x, quad);
  const Section s = find_section(spec, lambda, x, quad);
  const bool graded = s.graded();
  const double len = s.upper - s.lower;
  const double off_plus = s.lower_is_boundary ? 0.0 : x + s.lower;
  const double off_minus = s.upper_is_boundary ? 0.0 : x - s.upper;

  auto density_t = [&](double t, double* u_out) {
    const double r = grade(t, graded);
    const double u = s.lower + len * r;
    if (u_out) *u_out = u;
    const LocalKernel lk = local_kernel(spec, x, u, off_plus + len * r, off_minus + len * grade(1.0 - t, graded));
    return std::exp(s.w * (lambda * u + lk.log_k) - s.log_peak);
  };

  u_.resize(kNodes);
  cdf_.resize(kNodes);
  slope_.resize(kNodes);
  const double dt = 1.0 / (kNodes - 1);
  const auto& xs = quadrature::gl_abscissae();
  const auto& ws = quadrature::gl_weights();
  double acc = 0.0;
  for (int j = 0; j < kNodes; ++j) {
    const double t = j * dt;
    if (j == 0) {
      u_[j] = s.lower;
      slope_[j] = s.lower_is_boundary ? 0.0 : density_t(0.0, nullptr);
    } else if (j == kNodes - 1) {
      u_[j] = s.upper;
      slope_[j] = s.upper_is_boundary ? 0.0 : density_t(1.0, nullptr);
    } else {
      slope_[j] = density_t(t, &u_[j]);
    }
    if (j > 0) {
      const double mid = t - 0.5 * dt;
      double cell = 0.0;
      for (int k = 0; k < quadrature::kOrder; ++k) {
        const double tk = mid + 0.5 * dt * xs[k];
        cell += ws[k] * density_t(tk, nullptr) * len * grade_dt(tk, graded);
      }
      acc += 0.5 * dt * cell;
    }
    cdf_[j] = acc;
  }
  for (int j = 0; j < kNodes; ++j) {
    cdf_[j] /= acc;
    slope_[j] /= acc;
  }
  cdf_.back() = 1.0;
}

namespace {

struct Cell {
  double u0, du, f0, f1, m0, m1;
};

// Fritsch–Carlson limited slopes on one cell.
Cell make_cell(const std::vector<double>& u, const std::vector<double>& f, const std::vector<double>& m,
               std::size_t j) {
  Cell c{u[j], u[j + 1] - u[j], f[j], f[j + 1], m[j], m[j + 1]};
  const double delta = (c.f1 - c.f0) / c.du;
  if (delta <= 0.0) {
    c.m0 = c.m1 = 0.0;
    return c;
  }
  const double a = c.m0 / delta, b = c.m1 / delta;
  const double r2 = a * a + b * b;
  if (r2 > 9.0) {
    const double tau = 3.0 / std::sqrt(r2);
    c.m0 = tau * a * delta;
    c.m1 = tau * b * delta;
  }
  return c;
}

double hermite(const Cell& c, double s) {
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * c.f0 + (s3 - 2 * s2 + s) * c.du * c.m0 + (-2 * s3 + 3 * s2) * c.f1 +
         (s3 - s2) * c.du * c.m1;
}

double hermite_ds(const Cell& c, double s) {
  const double s2 = s * s;
  return (6 * s2 - 6 * s) * c.f0 + (3 * s2 - 4 * s + 1) * c.du * c.m0 + (-6 * s2 + 6 * s) * c.f1 +
         (3 * s2 - 2 * s) * c.du * c.m1;
}

}  // namespace

double NuTable::cdf(double u) const {
  if (u <= u_.front()) return 0.0;
  if (u >= u_.back()) return 1.0;
  const auto it = std::upper_bound(u_.begin(), u_.end(), u);
  const auto j = static_cast<std::size_t>(it - u_.begin()) - 1;
  const Cell c = make_cell(u_, cdf_, slope_, j);
  return hermite(c, (u - c.u0) / c.du);
}

double NuTable::quantile(double v) const {
  if (v <= 0.0) return u_.front();
  if (v >= 1.0) return u_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), v);
  std::size_t j = static_cast<std::size_t>(it - cdf_.begin());
  j = std::clamp<std::size_t>(j, 1, cdf_.size() - 1) - 1;
  const Cell c = make_cell(u_, cdf_, slope_, j);
  if (c.f1 <= c.f0) return c.u0;
  double lo = 0.0, hi = 1.0;
  double s = (v - c.f0) / (c.f1 - c.f0);
  for (int it2 = 0; it2 < 60; ++it2) {
    const double r = hermite(c, s) - v;
    if (r > 0) {
      hi = s;
    } else {
      lo = s;
    }
    if (std::abs(r) <= 1e-15) break;
    const double d = hermite_ds(c, s);
    double next = d > 0 ? s - r / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo < 1e-15) break;
    s = next;
  }
  return c.u0 + s * c.du;
}

std::shared_ptr<const NuTable> nu_table(const SystemSpec& spec, double lambda, double x,
                                        const QuadratureSpec& quad) {
  using Key = std::tuple<int, double, double, double, double, double, double>;
  static std::shared_mutex mutex;
  static std::map<Key, std::shared_ptr<const NuTable>> cache;
  const Key key{static_cast<int>(spec.kind()), spec.epsilon(), spec.mu(), lambda, x, quad.kernel_power,
                quad.truncation_margin};
  {
    std::shared_lock lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  std::unique_lock lock(mutex);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto table = std::make_shared<const NuTable>(spec, lambda, x, quad);
  cache.emplace(key, table);
  return table;
}

double sample_nu(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad, RngStream& rng) {
  return nu_table(spec, lambda, x, quad)->quantile(rng.uniform());
}

}  // namespace sbt
