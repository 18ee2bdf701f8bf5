#include "sbt/classical.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "sbt/errors.hpp"
#include "sbt/io.hpp"

namespace sbt {

namespace {

constexpr double kLambdaZero = 1e-14;

void check_flow_args(const SystemSpec& spec, double lambda, double x0) {
  if (!in_x_section(spec, x0)) {
    std::ostringstream os;
    os << "x0=" << x0 << " is outside the x-section of " << to_string(spec.kind());
    throw DomainError(os.str());
  }
  if (spec.has_lambda_cap() && !(std::abs(lambda) < spec.lambda_cap())) {
    std::ostringstream os;
    os << "hyperbolic2 flow requires |lambda| < epsilon*mu = " << spec.lambda_cap();
    throw RangeError(os.str());
  }
}

}  // namespace

PhasePoint flow_exact(const SystemSpec& spec, double lambda, double x0, double t) {
  check_flow_args(spec, lambda, x0);
  if (!(t >= 0.0)) throw DomainError("flow_exact requires t >= 0");
  const double eps = spec.epsilon(), mu = spec.mu();

  if (std::abs(lambda) < kLambdaZero) {
    switch (spec.kind()) {
      case SystemKind::Toda: {
        // u stays at u_0(x0) = 0
        return {std::log(std::exp(x0) + t), 0.0};
      }
      case SystemKind::RationalCM:
        return {std::sqrt(x0 * x0 + 2.0 * t), 0.0};
      case SystemKind::HyperbolicI:
      case SystemKind::HyperbolicII:
        return {std::acosh(std::cosh(eps * x0) + eps * eps * mu * t) / eps, 0.0};
    }
  }

  const double u = critical_point(spec, lambda, x0) + lambda * t;
  switch (spec.kind()) {
    case SystemKind::Toda:
      return {std::log(std::sinh(u) / lambda), u};
    case SystemKind::RationalCM:
      return {std::sqrt(u * u + 2.0 * u / lambda), u};
    case SystemKind::HyperbolicI: {
      const double c = std::cosh(0.5 * eps * u);
      const double arg = eps * mu / (2.0 * lambda) * std::sinh(eps * u) + c * c;
      return {2.0 / eps * std::acosh(std::sqrt(arg)), u};
    }
    case SystemKind::HyperbolicII: {
      const double s = std::sinh(0.5 * eps * u);
      const double arg = eps * mu / (2.0 * lambda) * std::sinh(eps * u) - s * s;
      return {2.0 / eps * std::acosh(std::sqrt(arg)), u};
    }
  }
  return {};
}

Trajectory flow_rk4(const SystemSpec& spec, double lambda, double x0, double horizon, double dt) {
  check_flow_args(spec, lambda, x0);
  if (!(dt > 0.0)) throw DomainError("flow_rk4 requires dt > 0");
  if (!(horizon >= dt)) throw DomainError("flow_rk4 requires horizon >= dt");

  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  Trajectory traj{spec, lambda, dt, {}, {}};
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);

  PhasePoint s{x0, critical_point(spec, lambda, x0)};
  traj.times.push_back(0.0);
  traj.states.push_back(s);

  auto rhs = [&](PhasePoint p) {
    if (!in_domain(spec, p)) {
      std::ostringstream os;
      os << "RK4 stage left the domain at (x=" << p.x << ", u=" << p.u << ")";
      throw StepError(os.str());
    }
    return PhasePoint{lambda + drift_b(spec, p), lambda};
  };

  for (std::size_t k = 0; k < steps; ++k) {
    const PhasePoint k1 = rhs(s);
    const PhasePoint k2 = rhs({s.x + 0.5 * dt * k1.x, s.u + 0.5 * dt * k1.u});
    const PhasePoint k3 = rhs({s.x + 0.5 * dt * k2.x, s.u + 0.5 * dt * k2.u});
    const PhasePoint k4 = rhs({s.x + dt * k3.x, s.u + dt * k3.u});
    s.x += dt / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    s.u += dt / 6.0 * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u);
    if (!in_domain(spec, s)) throw StepError("RK4 step left the domain");
    traj.times.push_back(static_cast<double>(k + 1) * dt);
    traj.states.push_back(s);
  }
  return traj;
}

ConservationReport conservation_report(const Trajectory& traj) {
  const std::size_t n = traj.size();
  if (n < 5) throw DomainError("conservation_report needs at least 5 trajectory points");
  const double dt = traj.dt;
  const auto& s = traj.states;
  ConservationReport r;
  for (std::size_t k = 2; k + 2 < n; ++k) {
    const double ud = (-s[k + 2].u + 8.0 * s[k + 1].u - 8.0 * s[k - 1].u + s[k - 2].u) / (12.0 * dt);
    const double xd = (-s[k + 2].x + 8.0 * s[k + 1].x - 8.0 * s[k - 1].x + s[k - 2].x) / (12.0 * dt);
    const double xdd =
        (-s[k + 2].x + 16.0 * s[k + 1].x - 30.0 * s[k].x + 16.0 * s[k - 1].x - s[k - 2].x) / (12.0 * dt * dt);
    const double o = lax_offdiag(traj.spec, s[k].x);
    r.r_u = std::max(r.r_u, std::abs(ud - traj.lambda));
    r.r_lax = std::max(r.r_lax, std::abs(xd * xd - o * o - traj.lambda * traj.lambda));
    r.r_eom = std::max(r.r_eom, std::abs(xdd - classical_force(traj.spec, s[k].x)));
  }
  return r;
}

double gradient_identity_residual(const SystemSpec& spec, double lambda, double x, double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step h must be positive");
  auto reduced = [&](double y) { return log_kernel(spec, lambda, {y, critical_point(spec, lambda, y)}); };
  // Five-point central stencil; the three-point one has error h^2/3 for ln x alone.
  const double lhs =
      (8.0 * (reduced(x + h) - reduced(x - h)) - (reduced(x + 2.0 * h) - reduced(x - 2.0 * h))) / (12.0 * h);
  const double rhs = grad_log_kernel(spec, lambda, {x, critical_point(spec, lambda, x)}).gx;
  return std::abs(lhs - rhs);
}

void write_csv(std::ostream& os, const Trajectory& traj) {
  os << "t,x,u\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << io::format_double(traj.times[k]) << ',' << io::format_double(traj.states[k].x) << ','
       << io::format_double(traj.states[k].u) << '\n';
  }
}

}  // namespace sbt
