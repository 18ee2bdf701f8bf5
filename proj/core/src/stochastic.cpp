#include "sbt/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "sbt/errors.hpp"
#include "sbt/rng.hpp"

namespace sbt {

namespace {

constexpr int kMaxHalvings = 10;
constexpr std::uint64_t kRefineSalt = 0x5246494e45ULL;

struct Counters {
  std::size_t violations = 0;
  std::size_t monotone = 0;
};

// Calls body(path, counters) for every path, split into contiguous chunks.
template <class Body>
Counters for_each_path(std::size_t n_paths, unsigned workers, Body body) {
  unsigned n = workers ? workers : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(n_paths, 1)));
  std::vector<Counters> partial(n);
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](unsigned w) {
    try {
      const std::size_t begin = n_paths * w / n, end = n_paths * (w + 1) / n;
      for (std::size_t p = begin; p < end; ++p) body(p, partial[w]);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (n == 1) {
    run(0);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < n; ++w) threads.emplace_back(run, w);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  Counters total;
  for (const auto& c : partial) {
    total.violations += c.violations;
    total.monotone += c.monotone;
  }
  return total;
}

// Stored grid indices: 0, k, 2k, ... and always the last step.
std::vector<std::size_t> saved_steps(const McConfig& mc) {
  const std::size_t n = mc.n_steps();
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k <= n; k += mc.save_every) idx.push_back(k);
  if (idx.back() != n) idx.push_back(n);
  return idx;
}

PathEnsemble make_ensemble(const McConfig& mc, std::optional<SystemSpec> spec, bool with_u,
                           const std::vector<std::size_t>& steps) {
  PathEnsemble e;
  e.config = mc;
  e.spec = std::move(spec);
  e.n_paths = mc.n_paths;
  e.n_times = steps.size();
  e.times.reserve(steps.size());
  for (std::size_t k : steps) e.times.push_back(static_cast<double>(k) * mc.dt);
  e.xs.assign(e.n_paths * e.n_times, 0.0);
  if (with_u) e.us.assign(e.n_paths * e.n_times, 0.0);
  return e;
}

void finish(PathEnsemble& e, const Counters& c, const char* what) {
  e.violations = c.violations;
  e.monotone_violations = c.monotone;
  if (e.config.strict && c.violations > 0) {
    std::ostringstream os;
    os << what << ": " << c.violations << " step(s) left the domain and were clamped (strict mode)";
    throw BoundaryBreach(os.str());
  }
}

struct GapState {
  double g;  // X - U
  double u;
};

// Positive root of y^2 - a y - c h = 0, i.e. y = a + c h / y.
double implicit_root(double a, double ch) {
  const double r = std::sqrt(a * a + 4.0 * ch);
  return a >= 0.0 ? 0.5 * (a + r) : 2.0 * ch / (r - a);
}

// Euler step of the Bäcklund system over time h with Brownian increment dw.
// Near the reachable boundary the drift behaves like c / d, d = x + u for the
// bounded sections and d = x for HyperbolicII; that term is taken implicitly in d,
// the remainder explicitly. Toda has no boundary and uses plain EM.
GapState propose(const SystemSpec& spec, const McConfig& mc, GapState s, double b, double dw, double h) {
  const double du = mc.noise_scale * dw + mc.lambda * h;
  const double u1 = s.u + du;
  const double x = s.g + s.u;
  switch (spec.kind()) {
    case SystemKind::Toda:
      break;
    case SystemKind::RationalCM:
    case SystemKind::HyperbolicI: {
      const double c = spec.kind() == SystemKind::RationalCM ? 2.0 : 2.0 * spec.mu();
      const double y = x + s.u;
      const double y1 = implicit_root(y + 2.0 * du + h * (b - c / y), c * h);
      // gap advanced with the (positive) drift at the implicit point keeps X - U monotone
      return {s.g + h * drift_b(spec, {0.5 * (s.g + y1), 0.5 * (y1 - s.g)}), u1};
    }
    case SystemKind::HyperbolicII: {
      const double c = spec.mu();
      const double x1 = implicit_root(x + du + h * (b - c / x), c * h);
      return {x1 - u1, u1};
    }
  }
  return {s.g + b * h, u1};
}

// A step that leaves D, or whose drift changes by more than drift_tol / h, is
// split in two halves with the midpoint drawn from the Brownian bridge.
GapState backlund_step(const SystemSpec& spec, const McConfig& mc, GapState s, double dw, double h, int depth,
                       RngStream& refine, Counters& counters) {
  const double b = drift_b(spec, {s.g + s.u, s.u});
  const GapState next = propose(spec, mc, s, b, dw, h);
  if (std::isfinite(next.g) && in_domain(spec, {next.g + next.u, next.u})) {
    const bool smooth = depth >= kMaxHalvings || mc.drift_tol <= 0.0 ||
                        std::abs(drift_b(spec, {next.g + next.u, next.u}) - b) * h <= mc.drift_tol;
    if (smooth) {
      if (next.g < s.g) ++counters.monotone;
      return next;
    }
  } else if (depth >= kMaxHalvings) {
    ++counters.violations;
    return s;
  }
  const double w_mid = 0.5 * dw + 0.5 * std::sqrt(h) * refine.normal();
  const GapState half = backlund_step(spec, mc, s, w_mid, 0.5 * h, depth + 1, refine, counters);
  return backlund_step(spec, mc, half, dw - w_mid, 0.5 * h, depth + 1, refine, counters);
}

// As backlund_step for dX = s dB + drift(X) dt; a singular part c / (X - lower)
// of the drift (c = singular) is taken implicitly.
double scalar_step(const std::function<double(double)>& drift, const McConfig& mc, double lower, double singular,
                   double x, double dw, double h, int depth, RngStream& refine, Counters& counters) {
  const double b = drift(x);
  double next = x + mc.noise_scale * dw + b * h;
  if (singular > 0.0) {
    const double d = x - lower;
    next = lower + implicit_root(d + mc.noise_scale * dw + h * (b - singular / d), singular * h);
  }
  if (std::isfinite(next) && next > lower) {
    if (depth >= kMaxHalvings || mc.drift_tol <= 0.0 || std::abs(drift(next) - b) * h <= mc.drift_tol) return next;
  } else if (depth >= kMaxHalvings) {
    ++counters.violations;
    return x;
  }
  const double w_mid = 0.5 * dw + 0.5 * std::sqrt(h) * refine.normal();
  const double half = scalar_step(drift, mc, lower, singular, x, w_mid, 0.5 * h, depth + 1, refine, counters);
  return scalar_step(drift, mc, lower, singular, half, dw - w_mid, 0.5 * h, depth + 1, refine, counters);
}

double initial_u(const InitialCondition& init, const NuTable* table, RngStream& rng) {
  return init.u0 ? *init.u0 : table->quantile(rng.uniform());
}

std::shared_ptr<const NuTable> prepare_initial(const SystemSpec& spec, const InitialCondition& init,
                                               const McConfig& mc, const QuadratureSpec& quad) {
  if (init.u0) {
    if (!in_domain(spec, {init.x0, *init.u0})) throw DomainError("initial point is outside the domain");
    return nullptr;
  }
  if (!in_x_section(spec, init.x0)) throw DomainError("x0 is outside the x-section of the domain");
  return nu_table(spec, mc.lambda, init.x0, quad);
}

}  // namespace

std::size_t McConfig::n_steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }

void McConfig::validate() const {
  if (n_paths == 0 || n_paths > 1000000) throw DomainError("n_paths must be in [1, 1e6]");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw DomainError("horizon must be positive");
  if (horizon / dt > 1e7) throw DomainError("horizon/dt must not exceed 1e7");
  if (n_steps() == 0) throw DomainError("horizon must be at least one step");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw DomainError("noise_scale must be >= 0");
  if (!std::isfinite(lambda)) throw DomainError("lambda must be finite");
  if (save_every == 0) throw DomainError("save_every must be positive");
  if (std::isnan(drift_tol)) throw DomainError("drift_tol must not be NaN");
}

std::vector<double> PathEnsemble::x_at(std::size_t k) const {
  std::vector<double> out(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p) out[p] = x(p, k);
  return out;
}

std::vector<double> PathEnsemble::u_at(std::size_t k) const {
  std::vector<double> out(n_paths);
  for (std::size_t p = 0; p < n_paths; ++p) out[p] = u(p, k);
  return out;
}

std::size_t PathEnsemble::time_index(double t) const {
  std::size_t best = 0;
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (std::abs(times[k] - t) < std::abs(times[best] - t)) best = k;
  }
  return best;
}

PathEnsemble simulate_backlund(const SystemSpec& spec, const InitialCondition& init, const McConfig& mc,
                               const QuadratureSpec& quad) {
  mc.validate();
  if (!init.u0 && spec.has_lambda_cap() && !(std::abs(mc.lambda) < spec.lambda_cap())) {
    std::ostringstream os;
    os << "U_0 ~ nu_x requires |lambda| < epsilon*mu = " << spec.lambda_cap() << " (got " << mc.lambda << ")";
    throw RangeError(os.str());
  }
  const auto table = prepare_initial(spec, init, mc, quad);
  const auto steps = saved_steps(mc);
  PathEnsemble e = make_ensemble(mc, spec, true, steps);
  const std::size_t n_steps = mc.n_steps();
  const double sqdt = std::sqrt(mc.dt);

  const Counters c = for_each_path(mc.n_paths, mc.workers, [&](std::size_t p, Counters& counters) {
    RngStream rng(mc.seed, p);
    RngStream refine(mix_seed(mc.seed, kRefineSalt), p);
    const double u0 = initial_u(init, table.get(), rng);
    GapState s{init.x0 - u0, u0};
    std::size_t slot = 0;
    double* xr = &e.xs[p * e.n_times];
    double* ur = &e.us[p * e.n_times];
    for (std::size_t k = 0;; ++k) {
      if (slot < steps.size() && steps[slot] == k) {
        xr[slot] = s.g + s.u;
        ur[slot] = s.u;
        ++slot;
      }
      if (k == n_steps) break;
      s = backlund_step(spec, mc, s, sqdt * rng.normal(), mc.dt, 0, refine, counters);
    }
  });
  finish(e, c, "simulate_backlund");
  return e;
}

PathEnsemble toda_exact_paths(const InitialCondition& init, const McConfig& mc, const QuadratureSpec& quad) {
  mc.validate();
  const SystemSpec spec = SystemSpec::toda();
  const auto table = prepare_initial(spec, init, mc, quad);
  const auto steps = saved_steps(mc);
  PathEnsemble e = make_ensemble(mc, spec, true, steps);
  const std::size_t n_steps = mc.n_steps();
  const double sqdt = std::sqrt(mc.dt);

  for_each_path(mc.n_paths, mc.workers, [&](std::size_t p, Counters&) {
    RngStream rng(mc.seed, p);
    const double u0 = initial_u(init, table.get(), rng);
    const double a0 = std::exp(init.x0 - u0);
    double u = u0, integral = 0.0, e_prev = std::exp(-2.0 * u0);
    std::size_t slot = 0;
    double* xr = &e.xs[p * e.n_times];
    double* ur = &e.us[p * e.n_times];
    for (std::size_t k = 0;; ++k) {
      if (slot < steps.size() && steps[slot] == k) {
        xr[slot] = u + std::log(a0 + integral);
        ur[slot] = u;
        ++slot;
      }
      if (k == n_steps) break;
      u += mc.noise_scale * sqdt * rng.normal() + mc.lambda * mc.dt;
      const double e_next = std::exp(-2.0 * u);
      integral += 0.5 * (e_prev + e_next) * mc.dt;
      e_prev = e_next;
    }
  });
  return e;
}

// ---------------------------------------------------------------------------

DriftTable::DriftTable(const SystemSpec& spec, double lambda, const QuadratureSpec& quad, double lo, double hi,
                       std::size_t nodes)
    : spec_(spec), lambda_(lambda), quad_(quad), log_grid_(spec.kind() != SystemKind::Toda), lo_(lo), hi_(hi) {
  if (nodes < 8) throw DomainError("DriftTable needs at least 8 nodes");
  if (!(hi > lo) || !in_x_section(spec, lo)) throw DomainError("DriftTable range must lie in the x-section");
  s0_ = log_grid_ ? std::log(lo) : lo;
  const double s1 = log_grid_ ? std::log(hi) : hi;
  ds_ = (s1 - s0_) / static_cast<double>(nodes - 1);
  b_.resize(nodes);
  slope_.resize(nodes);
  std::vector<double> xs(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    const double s = s0_ + ds_ * static_cast<double>(j);
    xs[j] = log_grid_ ? std::exp(s) : s;
    b_[j] = log_psi_drift(spec, lambda, xs[j], quad);
  }
  if (quad.kernel_power == 1.0) {
    // b' = 2V + lambda^2 - b^2
    for (std::size_t j = 0; j < nodes; ++j) {
      const double dbdx = 2.0 * quantum_potential(spec, xs[j]) + lambda * lambda - b_[j] * b_[j];
      slope_[j] = log_grid_ ? dbdx * xs[j] : dbdx;
    }
  } else {
    const std::size_t n = nodes;
    for (std::size_t j = 2; j + 2 < n; ++j) {
      slope_[j] = (-b_[j + 2] + 8.0 * b_[j + 1] - 8.0 * b_[j - 1] + b_[j - 2]) / (12.0 * ds_);
    }
    slope_[1] = (b_[2] - b_[0]) / (2.0 * ds_);
    slope_[n - 2] = (b_[n - 1] - b_[n - 3]) / (2.0 * ds_);
    slope_[0] = (-3.0 * b_[0] + 4.0 * b_[1] - b_[2]) / (2.0 * ds_);
    slope_[n - 1] = (3.0 * b_[n - 1] - 4.0 * b_[n - 2] + b_[n - 3]) / (2.0 * ds_);
  }
}

double DriftTable::operator()(double x) const {
  if (!(x >= lo_ && x <= hi_)) return log_psi_drift(spec_, lambda_, x, quad_);
  const double s = log_grid_ ? std::log(x) : x;
  const double r = (s - s0_) / ds_;
  const auto last = b_.size() - 2;
  const std::size_t j = std::min(static_cast<std::size_t>(std::max(r, 0.0)), last);
  const double t = r - static_cast<double>(j);
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * b_[j] + (t3 - 2 * t2 + t) * ds_ * slope_[j] + (-2 * t3 + 3 * t2) * b_[j + 1] +
         (t3 - t2) * ds_ * slope_[j + 1];
}

PathEnsemble simulate_scalar_diffusion(const std::function<double(double)>& drift, double x0, const McConfig& mc,
                                       double lower_bound, double singular) {
  mc.validate();
  if (!(x0 > lower_bound)) throw DomainError("x0 must lie above the lower boundary");
  if (singular > 0.0 && !std::isfinite(lower_bound)) throw DomainError("a singular drift needs a finite lower bound");
  const auto steps = saved_steps(mc);
  PathEnsemble e = make_ensemble(mc, std::nullopt, false, steps);
  const std::size_t n_steps = mc.n_steps();
  const double sqdt = std::sqrt(mc.dt);
  const Counters c = for_each_path(mc.n_paths, mc.workers, [&](std::size_t p, Counters& counters) {
    RngStream rng(mc.seed, p);
    RngStream refine(mix_seed(mc.seed, kRefineSalt), p);
    double x = x0;
    std::size_t slot = 0;
    double* xr = &e.xs[p * e.n_times];
    for (std::size_t k = 0;; ++k) {
      if (slot < steps.size() && steps[slot] == k) xr[slot++] = x;
      if (k == n_steps) break;
      x = scalar_step(drift, mc, lower_bound, singular, x, sqdt * rng.normal(), mc.dt, 0, refine, counters);
    }
  });
  finish(e, c, "simulate_scalar_diffusion");
  return e;
}

PathEnsemble simulate_target(const SystemSpec& spec, double lambda, double x0, const McConfig& mc,
                             const QuadratureSpec& quad) {
  mc.validate();
  if (!in_x_section(spec, x0)) throw DomainError("x0 is outside the x-section of the domain");
  const double s = mc.noise_scale;
  const double spread = 8.0 * s * std::sqrt(mc.horizon) + 1.0;
  double lo, hi;
  if (spec.kind() == SystemKind::Toda) {
    lo = x0 - spread - 1.0;
    hi = x0 + spread + (std::abs(lambda) + 1.0) * s * s * mc.horizon + 3.0;
  } else {
    lo = 1e-3 * std::min(x0, 1.0);
    hi = x0 + spread + (std::abs(lambda) + 2.0 / x0) * s * s * mc.horizon + 3.0;
  }
  const DriftTable table(spec, lambda, quad, lo, hi);
  const double s2 = s * s;
  // drift ~ c / x at the CM boundary x = 0
  const double singular = spec.kind() == SystemKind::Toda ? 0.0 : s2 * lo * table(lo);
  PathEnsemble e =
      simulate_scalar_diffusion([&](double x) { return s2 * table(x); }, x0, mc, spec.x_lower(), std::max(singular, 0.0));
  e.spec = spec;
  return e;
}

double pitman_drift(double lambda, double x) {
  const double z = lambda * x;
  if (std::abs(z) < 1e-4) return (1.0 + z * z / 3.0) / x;
  return lambda / std::tanh(z);
}

PathEnsemble pitman_paths(double lambda, double x, const McConfig& mc) {
  mc.validate();
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("pitman_paths requires x >= 0");
  if (!std::isfinite(lambda)) throw DomainError("lambda must be finite");
  const auto steps = saved_steps(mc);
  PathEnsemble e = make_ensemble(mc, std::nullopt, true, steps);
  const std::size_t n_steps = mc.n_steps();
  const double sqdt = std::sqrt(mc.dt);
  const double var = mc.noise_scale * mc.noise_scale * mc.dt;
  const double growth = std::expm1(2.0 * lambda * x);

  for_each_path(mc.n_paths, mc.workers, [&](std::size_t p, Counters&) {
    RngStream rng(mc.seed, p);
    const double v = rng.uniform();
    double u0;
    if (std::abs(lambda * x) < 1e-12) {
      u0 = x * (2.0 * v - 1.0);
    } else {
      u0 = -x + std::log1p(v * growth) / lambda;
    }
    u0 = std::clamp(u0, -x, x);
    double u = u0, inf = u0;
    std::size_t slot = 0;
    double* xr = &e.xs[p * e.n_times];
    double* ur = &e.us[p * e.n_times];
    for (std::size_t k = 0;; ++k) {
      if (slot < steps.size() && steps[slot] == k) {
        xr[slot] = u - std::min(2.0 * inf, u0 - x);
        ur[slot] = u;
        ++slot;
      }
      if (k == n_steps) break;
      const double next = u + mc.noise_scale * sqdt * rng.normal() + lambda * mc.dt;
      // minimum of the Brownian bridge from u to next over one step
      const double gap = next - u;
      const double m = 0.5 * (u + next - std::sqrt(gap * gap - 2.0 * var * std::log(rng.uniform())));
      inf = std::min(inf, m);
      u = next;
    }
  });
  return e;
}

}  // namespace sbt
