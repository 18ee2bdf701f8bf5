#include "sbt/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "sbt/errors.hpp"
#include "sbt/quadrature.hpp"
#include "sbt/rng.hpp"

namespace sbt {

namespace {

using Real = long double;

constexpr std::uint64_t kTargetSalt = 0x544152474554ULL;
constexpr std::size_t kMinBin = 50;

Real log_sinh_l(Real a) {
  return a > 20 ? a - std::numbers::ln2_v<Real> + std::log1p(-std::exp(-2 * a)) : std::log(std::sinh(a));
}

Real log_cosh_l(Real a) {
  a = std::abs(a);
  return a - std::numbers::ln2_v<Real> + std::log1p(std::exp(-2 * a));
}

// ln K_lambda in extended precision.
Real log_kernel_l(const SystemSpec& spec, Real lambda, Real x, Real u) {
  const Real eps = spec.epsilon(), mu = spec.mu();
  Real g = 0;
  switch (spec.kind()) {
    case SystemKind::Toda:
      g = -std::exp(-x) * std::cosh(u);
      break;
    case SystemKind::RationalCM:
      g = std::log(x - u) + std::log(x + u) - std::log(x);
      break;
    case SystemKind::HyperbolicI:
      g = mu * (log_sinh_l(eps * (x + u) / 2) + log_sinh_l(eps * (x - u) / 2) - log_sinh_l(eps * x));
      break;
    case SystemKind::HyperbolicII:
      g = mu * (log_sinh_l(eps * x) - log_cosh_l(eps * (x + u) / 2) - log_cosh_l(eps * (x - u) / 2));
      break;
  }
  return lambda * u + g;
}

void require_point(const SystemSpec& spec, double x, double u) {
  if (!in_domain(spec, {x, u})) {
    std::ostringstream os;
    os << "stencil point (x=" << x << ", u=" << u << ") is outside the domain of " << to_string(spec.kind());
    throw DomainError(os.str());
  }
}

double q(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  const double r = 1.0 - s * s;
  return r * r * r;
}

double dq(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  const double r = 1.0 - s * s;
  return -6.0 * s * r * r;
}

double d2q(double s) {
  if (std::abs(s) >= 1.0) return 0.0;
  const double r = 1.0 - s * s;
  return r * (30.0 * s * s - 6.0);
}

std::size_t steps_for(double t, double dt) { return static_cast<std::size_t>(std::llround(t / dt)); }

std::string describe_spec(const SystemSpec& spec) {
  std::ostringstream os;
  os << to_string(spec.kind()) << "(eps=" << spec.epsilon() << ", mu=" << spec.mu() << ")";
  return os.str();
}

}  // namespace

double kolmogorov_q(double l) {
  if (!(l > 0.0)) return 1.0;
  double sum = 0.0;
  if (l < 1.0) {
    // 1 - sqrt(2 pi)/l sum_{k odd} exp(-k^2 pi^2 / (8 l^2))
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * l * l);
    for (int k = 1; k < 200; k += 2) {
      const double term = std::exp(-c * k * k);
      sum += term;
      if (term < 1e-300) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / l * sum, 0.0, 1.0);
  }
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * l * l);
    sum += (k % 2 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsReport ks_two_sample(std::span<const double> a, std::span<const double> b, double threshold) {
  if (a.size() < 25 || b.size() < 25) throw DomainError("ks_two_sample requires at least 25 points per sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j == y.size() || (i < x.size() && x[i] <= y[j])) {
      v = x[i];
    } else {
      v = y[j];
    }
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  KsReport r;
  r.statistic = d;
  r.n = x.size();
  r.m = y.size();
  r.p_value = kolmogorov_q(d * std::sqrt(n * m / (n + m)));
  r.threshold = threshold;
  r.pass = r.p_value > threshold;
  return r;
}

KsReport ks_one_sample(std::span<const double> a, const std::function<double(double)>& cdf, double threshold) {
  if (a.size() < 25) throw DomainError("ks_one_sample requires at least 25 points");
  std::vector<double> x(a.begin(), a.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  KsReport r;
  r.statistic = d;
  r.n = x.size();
  r.m = 0;
  r.p_value = kolmogorov_q(d * std::sqrt(n));
  r.threshold = threshold;
  r.pass = r.p_value > threshold;
  return r;
}

std::vector<PhasePoint> random_grid(const SystemSpec& spec, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::vector<PhasePoint> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    PhasePoint p;
    switch (spec.kind()) {
      case SystemKind::Toda:
        p = {-1.0 + 3.0 * a, -1.5 + 3.0 * b};
        break;
      case SystemKind::RationalCM:
      case SystemKind::HyperbolicI:
        p.x = 0.8 + 1.2 * a;
        p.u = p.x * (b - 0.5);
        break;
      case SystemKind::HyperbolicII:
        p = {0.5 + 1.5 * a, -2.0 + 4.0 * b};
        break;
    }
    out.push_back(p);
  }
  return out;
}

ResidualReport intertwining_kernel_residual(const SystemSpec& spec, double lambda, std::span<const PhasePoint> grid,
                                            double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step h must be positive");
  ResidualReport rep;
  const Real hl = h, lam = lambda;
  for (const auto& p : grid) {
    require_point(spec, p.x - h, p.u);
    require_point(spec, p.x + h, p.u);
    require_point(spec, p.x, p.u - h);
    require_point(spec, p.x, p.u + h);
    const Real x = p.x, u = p.u;
    const Real l0 = log_kernel_l(spec, lam, x, u);
    auto rel = [&](Real dx, Real du) { return std::expm1(log_kernel_l(spec, lam, x + dx, u + du) - l0); };
    const Real kxx = (rel(hl, 0) + rel(-hl, 0)) / (hl * hl);
    const Real up = rel(0, hl), um = rel(0, -hl);
    const Real kuu = (up + um) / (hl * hl);
    const Real ku = (up - um) / (2 * hl);
    const Real v = quantum_potential(spec, p.x);
    const Real lhs = kxx / 2 - v - lam * lam / 2;
    const Real rhs = kuu / 2 - lam * ku;
    rep.max_abs = std::max(rep.max_abs, static_cast<double>(std::abs(lhs - rhs)));
  }
  std::ostringstream g;
  g << grid.size() << " points";
  rep.grid = g.str();
  rep.params = {{"lambda", lambda}, {"h", h}, {"epsilon", spec.epsilon()}, {"mu", spec.mu()}};
  rep.tolerance = 1e-5;
  rep.pass = rep.max_abs <= rep.tolerance;
  return rep;
}

double BumpSpec::value(double x, double u) const { return amplitude * q((x - cx) / wx) * q((u - cu) / wu); }

double intertwining_operator_residual(const SystemSpec& spec, double lambda, const BumpSpec& bump, double x,
                                      const QuadratureSpec& quad, double h) {
  quad.validate();
  if (!(h > 0.0)) throw DomainError("finite-difference step h must be positive");
  if (!(bump.wx > 0.0) || !(bump.wu > 0.0)) throw DomainError("bump widths must be positive");
  const double u_lo = bump.cu - bump.wu, u_hi = bump.cu + bump.wu;
  // the bump's support and every stencil point must lie in D
  for (double xs : {bump.cx - bump.wx, bump.cx + bump.wx, x - h, x + h}) {
    if (spec.bounded_section() ? !(std::max(std::abs(u_lo), std::abs(u_hi)) < xs) : !in_x_section(spec, xs)) {
      throw DomainError("bump support or stencil leaves the domain");
    }
  }
  if (bump.amplitude == 0.0) return 0.0;

  std::vector<double> nodes, weights;
  quadrature::append_composite_rule(u_lo, u_hi, std::max(quad.n_panels, 32), nodes, weights);
  const Real lam = lambda;
  const Real shift = log_kernel_l(spec, lam, x, bump.cu);

  auto transform = [&](Real y) {
    Real s = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double f = bump.value(static_cast<double>(y), nodes[i]);
      if (f == 0.0) continue;
      s += weights[i] * std::exp(log_kernel_l(spec, lam, y, nodes[i]) - shift) * f;
    }
    return s;
  };

  const Real hl = h;
  const Real f0 = transform(x);
  const Real second = (transform(x + hl) + transform(x - hl) - 2 * f0) / (hl * hl);
  const Real v = quantum_potential(spec, x);
  const Real lhs = second / 2 - (v + lam * lam / 2) * f0;

  const double sx = (x - bump.cx) / bump.wx;
  Real rhs = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double su = (nodes[i] - bump.cu) / bump.wu;
    const double qx = q(sx), qu = q(su);
    const double fx = dq(sx) / bump.wx * qu, fu = qx * dq(su) / bump.wu;
    const double fxx = d2q(sx) / (bump.wx * bump.wx) * qu, fuu = qx * d2q(su) / (bump.wu * bump.wu);
    const double fxu = dq(sx) * dq(su) / (bump.wx * bump.wu);
    const double b = drift_b(spec, {x, nodes[i]});
    const double af = 0.5 * fxx + 0.5 * fuu + fxu + lambda * fu + (lambda + b) * fx;
    rhs += weights[i] * std::exp(log_kernel_l(spec, lam, x, nodes[i]) - shift) * bump.amplitude * af;
  }
  return static_cast<double>(std::abs(lhs - rhs) * std::exp(shift));
}

std::vector<BumpPlacement> standard_bump_placements(const SystemSpec& spec) {
  switch (spec.kind()) {
    case SystemKind::Toda:
      return {{{0.0, 0.0, 1.0, 1.0, 1.0}, 0.2}, {{0.5, 0.3, 0.8, 1.2, 1.0}, 0.6}, {{-0.5, -0.4, 0.7, 0.8, 1.0}, -0.4}};
    case SystemKind::RationalCM:
    case SystemKind::HyperbolicI:
      return {{{1.2, 0.0, 0.4, 0.4, 1.0}, 1.2}, {{1.5, 0.2, 0.4, 0.5, 1.0}, 1.4}, {{2.0, -0.3, 0.5, 0.6, 1.0}, 2.1}};
    case SystemKind::HyperbolicII:
      return {{{1.0, 0.0, 0.5, 1.0, 1.0}, 1.1}, {{1.5, 0.8, 0.6, 1.5, 1.0}, 1.3}, {{0.9, -0.5, 0.3, 1.0, 1.0}, 0.85}};
  }
  return {};
}

void require_law_hypotheses(const SystemSpec& spec, double lambda, double x0) {
  if (spec.kind() == SystemKind::HyperbolicII) {
    if (!(spec.mu() > 0.5)) {
      std::ostringstream os;
      os << "law theorem for hyperbolic2 requires mu > 1/2 (got mu=" << spec.mu() << ")";
      throw HypothesisError(os.str());
    }
    if (!(std::abs(lambda) < spec.lambda_cap())) {
      std::ostringstream os;
      os << "law theorem for hyperbolic2 requires |lambda| < epsilon*mu = " << spec.lambda_cap()
         << " (got lambda=" << lambda << ")";
      throw HypothesisError(os.str());
    }
  }
  if (!in_x_section(spec, x0)) {
    std::ostringstream os;
    os << "x0=" << x0 << " is outside the x-section of " << describe_spec(spec);
    throw HypothesisError(os.str());
  }
}

std::vector<KsReport> marginal_law_tests(const SystemSpec& spec, double lambda, double x0,
                                         std::span<const double> times, const McConfig& mc,
                                         const QuadratureSpec& quad, const LawTestOptions& opts) {
  require_law_hypotheses(spec, lambda, x0);
  if (opts.target_lambda) require_law_hypotheses(spec, *opts.target_lambda, x0);
  if (times.empty()) throw DomainError("marginal_law_tests needs at least one time");
  McConfig run = mc;
  run.lambda = lambda;
  run.horizon = *std::max_element(times.begin(), times.end());
  std::size_t every = 0;
  for (double t : times) {
    if (!(t > 0.0)) throw DomainError("test times must be positive");
    every = std::gcd(every, steps_for(t, mc.dt));
  }
  run.save_every = std::max<std::size_t>(every, 1);

  const PathEnsemble back = simulate_backlund(spec, {x0, std::nullopt}, run, quad);
  McConfig tgt = run;
  tgt.seed = mix_seed(mc.seed, kTargetSalt);
  const PathEnsemble target = simulate_target(spec, opts.target_lambda.value_or(lambda), x0, tgt, quad);

  std::vector<KsReport> out;
  for (double t : times) {
    const auto xb = back.x_at(back.time_index(t));
    const auto xt = target.x_at(target.time_index(t));
    out.push_back(ks_two_sample(xb, xt, opts.threshold));
  }
  return out;
}

KsReport marginal_law_test(const SystemSpec& spec, double lambda, double x0, double t, const McConfig& mc,
                           const QuadratureSpec& quad, const LawTestOptions& opts) {
  const double ts[] = {t};
  return marginal_law_tests(spec, lambda, x0, ts, mc, quad, opts).front();
}

std::vector<ResidualReport> conditional_law_tests(const SystemSpec& spec, double lambda, double x0, double t,
                                                  const std::vector<std::function<double(double)>>& gs,
                                                  int n_bins, const McConfig& mc, const QuadratureSpec& quad,
                                                  double cap) {
  require_law_hypotheses(spec, lambda, x0);
  if (n_bins < 1) throw DomainError("n_bins must be positive");
  if (!(t > 0.0)) throw DomainError("test time must be positive");
  McConfig run = mc;
  run.lambda = lambda;
  run.horizon = t;
  run.save_every = std::max<std::size_t>(steps_for(t, mc.dt), 1);
  const PathEnsemble ens = simulate_backlund(spec, {x0, std::nullopt}, run, quad);
  const std::size_t k = ens.n_times - 1;
  const auto xs = ens.x_at(k);
  const auto us = ens.u_at(k);
  const std::size_t n = xs.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });

  // equal-count bins as [begin, end) ranges of order, small bins merged into a neighbour
  std::vector<std::pair<std::size_t, std::size_t>> bins;
  for (int b = 0; b < n_bins; ++b) {
    bins.emplace_back(n * b / n_bins, n * (b + 1) / n_bins);
  }
  for (bool merged = true; merged && bins.size() > 1;) {
    merged = false;
    for (std::size_t b = 0; b < bins.size(); ++b) {
      if (bins[b].second - bins[b].first >= kMinBin) continue;
      if (b + 1 < bins.size()) {
        bins[b + 1].first = bins[b].first;
      } else {
        bins[b - 1].second = bins[b].second;
      }
      bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(b));
      merged = true;
      break;
    }
  }

  const double xmin = xs[order.front()], xmax = xs[order.back()];
  constexpr std::size_t kTable = 513;
  const double dx = (xmax - xmin) / static_cast<double>(kTable - 1);

  std::vector<ResidualReport> out;
  for (const auto& g : gs) {
    std::vector<double> m(kTable);
    for (std::size_t j = 0; j < kTable; ++j) {
      m[j] = nu_expectation(spec, lambda, xmin + dx * static_cast<double>(j), g, quad);
    }
    // Catmull–Rom on the uniform table
    auto m_at = [&](double x) {
      if (!(dx > 0.0)) return m[0];
      const double r = std::clamp((x - xmin) / dx, 0.0, static_cast<double>(kTable - 1));
      const std::size_t j = std::min(static_cast<std::size_t>(r), kTable - 2);
      const double s = r - static_cast<double>(j);
      const double p0 = m[j > 0 ? j - 1 : j], p1 = m[j], p2 = m[j + 1], p3 = m[j + 2 < kTable ? j + 2 : j + 1];
      return p1 + 0.5 * s * ((p2 - p0) + s * ((2 * p0 - 5 * p1 + 4 * p2 - p3) + s * (3 * (p1 - p2) + p3 - p0)));
    };

    ResidualReport rep;
    for (const auto& [begin, end] : bins) {
      const double cnt = static_cast<double>(end - begin);
      double mean = 0.0;
      std::vector<double> r;
      r.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t p = order[i];
        r.push_back(g(us[p]) - m_at(xs[p]));
        mean += r.back();
      }
      mean /= cnt;
      double ss = 0.0;
      for (double v : r) ss += (v - mean) * (v - mean);
      const double se = std::sqrt(ss / (cnt - 1.0) / cnt);
      const double z = mean == 0.0 ? 0.0 : std::abs(mean) / se;
      rep.max_abs = std::max(rep.max_abs, z);
    }
    std::ostringstream gd;
    gd << bins.size() << " X_t-quantile bins, " << n << " paths";
    rep.grid = gd.str();
    rep.params = {{"lambda", lambda}, {"x0", x0}, {"t", t}, {"epsilon", spec.epsilon()}, {"mu", spec.mu()}};
    rep.tolerance = cap;
    rep.pass = rep.max_abs <= cap;
    out.push_back(std::move(rep));
  }
  return out;
}

ResidualReport conditional_law_test(const SystemSpec& spec, double lambda, double x0, double t,
                                    const std::function<double(double)>& g, int n_bins, const McConfig& mc,
                                    const QuadratureSpec& quad, double cap) {
  return conditional_law_tests(spec, lambda, x0, t, {g}, n_bins, mc, quad, cap).front();
}

KsReport pitman_law_test(double lambda, double x, double t, const McConfig& mc, double threshold,
                         double drift_multiplier) {
  if (!(x > 0.0)) throw DomainError("pitman_law_test needs x > 0 to start the target diffusion");
  if (!(t > 0.0)) throw DomainError("test time must be positive");
  McConfig run = mc;
  run.lambda = lambda;
  run.horizon = t;
  run.save_every = std::max<std::size_t>(steps_for(t, mc.dt), 1);
  const PathEnsemble pit = pitman_paths(lambda, x, run);
  McConfig tgt = run;
  tgt.seed = mix_seed(mc.seed, kTargetSalt);
  const PathEnsemble target = simulate_scalar_diffusion(
      [&](double y) { return drift_multiplier * pitman_drift(lambda, y); }, x, tgt, 0.0, drift_multiplier);
  return ks_two_sample(pit.x_at(pit.n_times - 1), target.x_at(target.n_times - 1), threshold);
}

}  // namespace sbt
