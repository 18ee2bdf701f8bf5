#pragma once

// Deterministic Bäcklund flows on the iso-spectral manifold
//   u' = lambda,   x' = lambda + b(x, u),
// started from (x0, u_lambda(x0)).

#include <iosfwd>
#include <vector>

#include "sbt/systems.hpp"

namespace sbt {

struct Trajectory {
  SystemSpec spec;
  double lambda = 0.0;
  double dt = 0.0;
  std::vector<double> times;
  std::vector<PhasePoint> states;

  std::size_t size() const { return states.size(); }
};

struct ConservationReport {
  double r_u = 0.0;    ///< max |u' - lambda|
  double r_lax = 0.0;  ///< max |p^2 - offdiag^2 - lambda^2| with p = x'
  double r_eom = 0.0;  ///< max |x'' - force(x)|
};

/// Explicit solution of the flow at time t (lambda = 0 branch when |lambda| < 1e-14).
PhasePoint flow_exact(const SystemSpec& spec, double lambda, double x0, double t);

/// Classical RK4 on a uniform grid of round(horizon/dt) steps.
/// Throws StepError if any stage leaves the domain.
Trajectory flow_rk4(const SystemSpec& spec, double lambda, double x0, double horizon, double dt);

/// Finite-difference conservation checks (5-point central stencils, interior points).
ConservationReport conservation_report(const Trajectory& traj);

/// |d/dx ln K_lambda(x, u_lambda(x)) - (d_x ln K_lambda)(x, u_lambda(x))| with a
/// central difference of step h (u_lambda re-solved at x +- h).
double gradient_identity_residual(const SystemSpec& spec, double lambda, double x, double h);

/// CSV with header `t,x,u`.
void write_csv(std::ostream& os, const Trajectory& traj);

}  // namespace sbt
