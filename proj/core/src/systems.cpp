#include "sbt/systems.hpp"

#include <cmath>
#include <sstream>

#include "sbt/errors.hpp"
#include "detail/numeric.hpp"

namespace sbt {

namespace {

using detail::log_cosh;
using detail::log_sinh;

std::string describe(const SystemSpec& spec) {
  std::ostringstream os;
  os << to_string(spec.kind()) << "(epsilon=" << spec.epsilon() << ", mu=" << spec.mu() << ")";
  return os.str();
}

void require_domain(const SystemSpec& spec, PhasePoint p) {
  if (!in_domain(spec, p)) {
    std::ostringstream os;
    os << "point (x=" << p.x << ", u=" << p.u << ") is outside the open domain of "
       << describe(spec);
    throw DomainError(os.str());
  }
}

void require_x_section(const SystemSpec& spec, double x) {
  if (!in_x_section(spec, x)) {
    std::ostringstream os;
    os << "x=" << x << " is outside the x-section of " << describe(spec);
    throw DomainError(os.str());
  }
}

double coth(double a) { return 1.0 / std::tanh(a); }

// Solves F(u) = 0 for strictly decreasing F on (lo, hi) with F(lo+) > 0 and
// F(hi-) < 0. Newton steps, bisection whenever Newton leaves the bracket.
template <class F, class DF>
double solve_decreasing(F f, DF df, double lo, double hi, double guess, double ftol) {
  double u = guess;
  for (int it = 0; it < 100; ++it) {
    const double fu = f(u);
    if (std::abs(fu) <= ftol) return u;
    if (fu > 0) {
      lo = u;
    } else {
      hi = u;
    }
    const double d = df(u);
    double next = u - fu / d;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (next == u || hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(u))) {
      return next;
    }
    u = next;
  }
  return u;
}

}  // namespace

std::string_view to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::Toda:
      return "toda";
    case SystemKind::RationalCM:
      return "rational";
    case SystemKind::HyperbolicI:
      return "hyperbolic1";
    case SystemKind::HyperbolicII:
      return "hyperbolic2";
  }
  return "unknown";
}

SystemKind parse_system_kind(std::string_view name) {
  if (name == "toda" || name == "Toda") return SystemKind::Toda;
  if (name == "rational" || name == "RationalCM" || name == "rational-cm") return SystemKind::RationalCM;
  if (name == "hyperbolic1" || name == "HyperbolicI") return SystemKind::HyperbolicI;
  if (name == "hyperbolic2" || name == "HyperbolicII") return SystemKind::HyperbolicII;
  throw DomainError("unknown system kind '" + std::string(name) + "'");
}

SystemSpec::SystemSpec(SystemKind kind, double epsilon, double mu)
    : kind_(kind), epsilon_(epsilon), mu_(mu) {
  if (kind == SystemKind::Toda || kind == SystemKind::RationalCM) {
    epsilon_ = 1.0;
    mu_ = 1.0;
    return;
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw DomainError("epsilon must be a positive finite real");
  }
  if (kind == SystemKind::HyperbolicI && !(mu >= 1.0)) {
    throw DomainError("hyperbolic1 requires mu >= 1");
  }
  if (kind == SystemKind::HyperbolicII && !(mu >= 0.5)) {
    throw DomainError("hyperbolic2 requires mu >= 1/2");
  }
  if (!std::isfinite(mu)) throw DomainError("mu must be finite");
}

double SystemSpec::lambda_cap() const {
  return kind_ == SystemKind::HyperbolicII ? epsilon_ * mu_ : kInf;
}

bool SystemSpec::bounded_section() const {
  return kind_ == SystemKind::RationalCM || kind_ == SystemKind::HyperbolicI;
}

double SystemSpec::x_lower() const { return kind_ == SystemKind::Toda ? -kInf : 0.0; }

bool in_domain(const SystemSpec& spec, PhasePoint p) {
  if (!std::isfinite(p.x) || !std::isfinite(p.u)) return false;
  switch (spec.kind()) {
    case SystemKind::Toda:
      return true;
    case SystemKind::RationalCM:
    case SystemKind::HyperbolicI:
      return std::abs(p.u) < p.x;
    case SystemKind::HyperbolicII:
      return p.x > 0.0;
  }
  return false;
}

bool in_x_section(const SystemSpec& spec, double x) {
  if (!std::isfinite(x)) return false;
  return spec.kind() == SystemKind::Toda || x > 0.0;
}

double log_kernel(const SystemSpec& spec, double lambda, PhasePoint p) {
  require_domain(spec, p);
  const double x = p.x, u = p.u;
  const double eps = spec.epsilon(), mu = spec.mu();
  double g = 0.0;
  switch (spec.kind()) {
    case SystemKind::Toda:
      g = -std::exp(-x) * std::cosh(u);
      break;
    case SystemKind::RationalCM:
      g = std::log(x - u) + std::log(x + u) - std::log(x);
      break;
    case SystemKind::HyperbolicI:
      g = mu * (log_sinh(0.5 * eps * (x + u)) + log_sinh(0.5 * eps * (x - u)) - log_sinh(eps * x));
      break;
    case SystemKind::HyperbolicII:
      g = mu * (log_sinh(eps * x) - log_cosh(0.5 * eps * (x + u)) - log_cosh(0.5 * eps * (x - u)));
      break;
  }
  return lambda * u + g;
}

KernelGradient grad_log_kernel(const SystemSpec& spec, double lambda, PhasePoint p) {
  require_domain(spec, p);
  const double x = p.x, u = p.u;
  const double eps = spec.epsilon(), mu = spec.mu();
  KernelGradient g;
  switch (spec.kind()) {
    case SystemKind::Toda: {
      const double e = std::exp(-x);
      g.gx = e * std::cosh(u);
      g.gu = -e * std::sinh(u);
      break;
    }
    case SystemKind::RationalCM:
      g.gx = 1.0 / (x - u) + 1.0 / (x + u) - 1.0 / x;
      g.gu = 1.0 / (x + u) - 1.0 / (x - u);
      break;
    case SystemKind::HyperbolicI: {
      const double ca = coth(0.5 * eps * (x + u));
      const double cc = coth(0.5 * eps * (x - u));
      g.gx = mu * eps * (0.5 * (ca + cc) - coth(eps * x));
      g.gu = 0.5 * mu * eps * (ca - cc);
      break;
    }
    case SystemKind::HyperbolicII: {
      const double ta = std::tanh(0.5 * eps * (x + u));
      const double tc = std::tanh(0.5 * eps * (x - u));
      g.gx = mu * eps * (coth(eps * x) - 0.5 * (ta + tc));
      g.gu = 0.5 * mu * eps * (tc - ta);
      break;
    }
  }
  g.gu += lambda;
  return g;
}

double drift_b(const SystemSpec& spec, PhasePoint p) {
  require_domain(spec, p);
  const double x = p.x, u = p.u;
  const double eps = spec.epsilon(), mu = spec.mu();
  switch (spec.kind()) {
    case SystemKind::Toda:
      return std::exp(-u - x);
    case SystemKind::RationalCM:
      return 2.0 / (x + u) - 1.0 / x;
    case SystemKind::HyperbolicI:
      return mu * eps * (coth(0.5 * eps * (x + u)) - coth(eps * x));
    case SystemKind::HyperbolicII:
      return mu * eps * (coth(eps * x) - std::tanh(0.5 * eps * (x + u)));
  }
  return 0.0;
}

double critical_point(const SystemSpec& spec, double lambda, double x) {
  require_x_section(spec, x);
  if (!std::isfinite(lambda)) throw RangeError("lambda must be finite");
  const double eps = spec.epsilon(), mu = spec.mu();
  switch (spec.kind()) {
    case SystemKind::Toda:
      return std::asinh(lambda * std::exp(x));
    case SystemKind::RationalCM:
      // root of lambda u^2 + 2u - lambda x^2 = 0 inside (-x, x), cancellation-free
      return lambda * x * x / (1.0 + std::sqrt(1.0 + lambda * lambda * x * x));
    case SystemKind::HyperbolicI: {
      if (lambda == 0.0) return 0.0;
      auto f = [&](double u) {
        return lambda + 0.5 * mu * eps * (coth(0.5 * eps * (x + u)) - coth(0.5 * eps * (x - u)));
      };
      auto df = [&](double u) {
        const double sa = std::sinh(0.5 * eps * (x + u));
        const double sc = std::sinh(0.5 * eps * (x - u));
        return -0.25 * mu * eps * eps * (1.0 / (sa * sa) + 1.0 / (sc * sc));
      };
      return solve_decreasing(f, df, -x, x, 0.0, 1e-14 * std::max(1.0, std::abs(lambda)));
    }
    case SystemKind::HyperbolicII: {
      const double cap = eps * mu;
      if (!(std::abs(lambda) < cap)) {
        std::ostringstream os;
        os << "hyperbolic2 critical point exists only for |lambda| < epsilon*mu = " << cap
           << " (got lambda=" << lambda << ")";
        throw RangeError(os.str());
      }
      if (lambda == 0.0) return 0.0;
      auto f = [&](double u) {
        return lambda - 0.5 * mu * eps * (std::tanh(0.5 * eps * (x + u)) - std::tanh(0.5 * eps * (x - u)));
      };
      auto df = [&](double u) {
        const double ca = std::cosh(0.5 * eps * (x + u));
        const double cc = std::cosh(0.5 * eps * (x - u));
        return -0.25 * mu * eps * eps * (1.0 / (ca * ca) + 1.0 / (cc * cc));
      };
      double lo = -1.0, hi = 1.0;
      while (f(lo) <= 0.0) lo *= 2.0;
      while (f(hi) >= 0.0) hi *= 2.0;
      return solve_decreasing(f, df, lo, hi, 0.5 * (lo + hi), 1e-14 * std::max(1.0, std::abs(lambda)));
    }
  }
  return 0.0;
}

double gradient_identity_rhs(const SystemSpec& spec, double x) {
  switch (spec.kind()) {
    case SystemKind::Toda:
      return std::exp(-2.0 * x);
    case SystemKind::RationalCM:
      return 1.0 / (x * x);
    case SystemKind::HyperbolicI:
    case SystemKind::HyperbolicII: {
      const double o = lax_offdiag(spec, x);
      return o * o;
    }
  }
  return 0.0;
}

double laplacian_identity_rhs(const SystemSpec& spec, double x) {
  const double eps = spec.epsilon(), mu = spec.mu();
  switch (spec.kind()) {
    case SystemKind::Toda:
      return 0.0;
    case SystemKind::RationalCM:
      return 1.0 / (x * x);
    case SystemKind::HyperbolicI: {
      const double s = std::sinh(eps * x);
      return eps * eps * mu / (s * s);
    }
    case SystemKind::HyperbolicII: {
      const double s = std::sinh(eps * x);
      return -eps * eps * mu / (s * s);
    }
  }
  return 0.0;
}

double quantum_potential(const SystemSpec& spec, double x) {
  // V = (gradient rhs + laplacian rhs) / 2, which reproduces e^{-2x}/2, 1/x^2,
  // eps^2 mu(mu+1)/(2 sinh^2) and eps^2 mu(mu-1)/(2 sinh^2).
  return 0.5 * (gradient_identity_rhs(spec, x) + laplacian_identity_rhs(spec, x));
}

double lax_offdiag(const SystemSpec& spec, double x) {
  switch (spec.kind()) {
    case SystemKind::Toda:
      return std::exp(-x);
    case SystemKind::RationalCM:
      return 1.0 / x;
    case SystemKind::HyperbolicI:
    case SystemKind::HyperbolicII:
      return spec.epsilon() * spec.mu() / std::sinh(spec.epsilon() * x);
  }
  return 0.0;
}

double classical_force(const SystemSpec& spec, double x) {
  const double eps = spec.epsilon(), mu = spec.mu();
  switch (spec.kind()) {
    case SystemKind::Toda:
      return -std::exp(-2.0 * x);
    case SystemKind::RationalCM:
      return -1.0 / (x * x * x);
    case SystemKind::HyperbolicI:
    case SystemKind::HyperbolicII: {
      const double s = std::sinh(eps * x);
      return -eps * eps * eps * mu * mu * std::cosh(eps * x) / (s * s * s);
    }
  }
  return 0.0;
}

BacklundResiduals backlund_residuals(const SystemSpec& spec, PhasePoint p, double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step h must be positive");
  require_domain(spec, p);
  for (PhasePoint q : {PhasePoint{p.x + h, p.u}, PhasePoint{p.x - h, p.u}, PhasePoint{p.x, p.u + h},
                       PhasePoint{p.x, p.u - h}}) {
    require_domain(spec, q);
  }
  const KernelGradient g = grad_log_kernel(spec, 0.0, p);
  BacklundResiduals r;
  r.r_grad = std::abs(g.gx * g.gx - g.gu * g.gu - gradient_identity_rhs(spec, p.x));

  const double c = log_kernel(spec, 0.0, p);
  const double gxx =
      (log_kernel(spec, 0.0, {p.x + h, p.u}) - 2.0 * c + log_kernel(spec, 0.0, {p.x - h, p.u})) / (h * h);
  const double guu =
      (log_kernel(spec, 0.0, {p.x, p.u + h}) - 2.0 * c + log_kernel(spec, 0.0, {p.x, p.u - h})) / (h * h);
  r.r_lap = std::abs(gxx - guu - laplacian_identity_rhs(spec, p.x));
  return r;
}

double lax_residual(const SystemSpec& spec, double lambda, double x) {
  const double u = critical_point(spec, lambda, x);
  const double p = grad_log_kernel(spec, lambda, {x, u}).gx;
  const double o = lax_offdiag(spec, x);
  return std::abs(p * p - o * o - lambda * lambda);
}

}  // namespace sbt
