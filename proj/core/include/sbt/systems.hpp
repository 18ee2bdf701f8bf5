#pragma once

// Rank-one integrable systems and their Bäcklund kernel functions.
//
// Each system is described by a kernel K(x,u) on an open domain D, with
// K_lambda(x,u) = exp(lambda*u) K(x,u). Everything here works with
// g = ln K and its closed-form derivatives.

#include <limits>
#include <string>
#include <string_view>

namespace sbt {

enum class SystemKind { Toda, RationalCM, HyperbolicI, HyperbolicII };

std::string_view to_string(SystemKind kind);
/// Accepts "toda", "rational", "hyperbolic1", "hyperbolic2" (and the enum names).
SystemKind parse_system_kind(std::string_view name);

class SystemSpec {
 public:
  /// Validating constructor. epsilon and mu are forced to 1 for Toda and
  /// RationalCM. HyperbolicI requires mu >= 1, HyperbolicII mu >= 1/2.
  SystemSpec(SystemKind kind, double epsilon = 1.0, double mu = 1.0);

  static SystemSpec toda() { return SystemSpec(SystemKind::Toda); }
  static SystemSpec rational() { return SystemSpec(SystemKind::RationalCM); }
  static SystemSpec hyperbolic1(double epsilon, double mu) {
    return SystemSpec(SystemKind::HyperbolicI, epsilon, mu);
  }
  static SystemSpec hyperbolic2(double epsilon, double mu) {
    return SystemSpec(SystemKind::HyperbolicII, epsilon, mu);
  }

  SystemKind kind() const { return kind_; }
  double epsilon() const { return epsilon_; }
  double mu() const { return mu_; }

  /// Supremum of admissible |lambda|: epsilon*mu for HyperbolicII, +inf otherwise.
  double lambda_cap() const;
  bool has_lambda_cap() const { return kind_ == SystemKind::HyperbolicII; }
  /// True when the u-section of D is the bounded interval (-x, x).
  bool bounded_section() const;
  /// Infimum of the x-section of D (-inf for Toda, 0 otherwise).
  double x_lower() const;

  friend bool operator==(const SystemSpec&, const SystemSpec&) = default;

 private:
  SystemKind kind_;
  double epsilon_;
  double mu_;
};

struct PhasePoint {
  double x = 0.0;
  double u = 0.0;
};

struct KernelGradient {
  double gx = 0.0;
  double gu = 0.0;
};

struct BacklundResiduals {
  double r_grad = 0.0;
  double r_lap = 0.0;
};

/// Strict membership in the open domain D.
bool in_domain(const SystemSpec& spec, PhasePoint p);
/// x lies in the projection of D onto the x axis.
bool in_x_section(const SystemSpec& spec, double x);

/// ln K_lambda(x,u) = lambda*u + ln K(x,u).
double log_kernel(const SystemSpec& spec, double lambda, PhasePoint p);
/// Closed-form gradient of log_kernel.
KernelGradient grad_log_kernel(const SystemSpec& spec, double lambda, PhasePoint p);
/// b(x,u) = (d/dx + d/du) ln K; strictly positive on D for all four kernels.
double drift_b(const SystemSpec& spec, PhasePoint p);

/// Unique u in the u-section with d/du ln K_lambda(x,u) = 0.
/// Throws RangeError for HyperbolicII with |lambda| >= epsilon*mu, DomainError
/// when x is outside the x-section.
double critical_point(const SystemSpec& spec, double lambda, double x);

/// Residuals of the two kernel identities (gradient form, exact; Laplacian
/// form, by central differences with step h).
BacklundResiduals backlund_residuals(const SystemSpec& spec, PhasePoint p, double h);

/// |p^2 - offdiag(x)^2 - lambda^2| on the iso-spectral manifold.
double lax_residual(const SystemSpec& spec, double lambda, double x);

// Per-system scalar functions of x shared by the other modules.

/// Right-hand side of (d_x ln K)^2 - (d_u ln K)^2.
double gradient_identity_rhs(const SystemSpec& spec, double x);
/// Right-hand side of d_x^2 ln K - d_u^2 ln K.
double laplacian_identity_rhs(const SystemSpec& spec, double x);
/// Potential V in H = (1/2) d_x^2 - V(x).
double quantum_potential(const SystemSpec& spec, double x);
/// Off-diagonal entry of the 2x2 Lax matrix.
double lax_offdiag(const SystemSpec& spec, double x);
/// Classical force: xdd = force(x).
double classical_force(const SystemSpec& spec, double x);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace sbt
