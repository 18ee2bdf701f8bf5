#pragma once

// Euler–Maruyama for the stochastic Bäcklund systems
//   dU = s dB + lambda dt,   dX = dU + b(X, U) dt,
// the pathwise Toda solution, the scalar target diffusions
//   dX = s dB + s^2 b_lambda(X) dt,
// and the Pitman construction X = U - min(2 inf U, U_0 - x).
//
// Every path owns the stream RngStream(seed, path_index), so ensembles do not
// depend on how paths are distributed over worker threads.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "sbt/eigen.hpp"
#include "sbt/systems.hpp"

namespace sbt {

struct McConfig {
  std::size_t n_paths = 1000;
  double dt = 1e-3;
  double horizon = 1.0;
  std::uint64_t seed = 0;
  double noise_scale = 1.0;  ///< s above
  double lambda = 0.0;
  /// Store grid points 0, save_every, 2*save_every, ... and always the final step.
  std::size_t save_every = 1;
  /// Worker threads; 0 means std::thread::hardware_concurrency().
  unsigned workers = 0;
  /// Throw BoundaryBreach when any step had to be clamped.
  bool strict = false;
  /// A step is also halved while |b(end) - b(start)| * h exceeds this (near-boundary
  /// drift blow-up). Non-positive disables the check.
  double drift_tol = 1e-3;

  /// Number of EM steps, round(horizon / dt).
  std::size_t n_steps() const;
  /// Throws DomainError when a field is out of range.
  void validate() const;
};

struct InitialCondition {
  double x0 = 0.0;
  /// Fixed U_0 (coupling experiments); when absent U_0 is drawn from nu_{x0}.
  std::optional<double> u0;
};

struct PathEnsemble {
  McConfig config;
  std::optional<SystemSpec> spec;  ///< absent for Pitman and generic scalar ensembles
  std::vector<double> times;
  std::size_t n_paths = 0;
  std::size_t n_times = 0;
  std::vector<double> xs;  ///< row-major, n_paths x n_times
  std::vector<double> us;  ///< empty for scalar ensembles
  std::size_t violations = 0;           ///< steps clamped by the boundary policy
  std::size_t monotone_violations = 0;  ///< steps where X - U decreased

  bool has_u() const { return !us.empty(); }
  double x(std::size_t path, std::size_t k) const { return xs[path * n_times + k]; }
  double u(std::size_t path, std::size_t k) const { return us[path * n_times + k]; }
  /// Column k of xs / us.
  std::vector<double> x_at(std::size_t k) const;
  std::vector<double> u_at(std::size_t k) const;
  /// Index of the stored time closest to t.
  std::size_t time_index(double t) const;
};

PathEnsemble simulate_backlund(const SystemSpec& spec, const InitialCondition& init, const McConfig& mc,
                               const QuadratureSpec& quad = {});

/// Toda only: U from the same increments as simulate_backlund, and
/// X_t = U_t + ln(e^{X_0 - U_0} + \int_0^t e^{-2 U_s} ds) with the trapezoid rule.
PathEnsemble toda_exact_paths(const InitialCondition& init, const McConfig& mc, const QuadratureSpec& quad = {});

/// Drift b_lambda = d/dx ln psi_lambda tabulated on a uniform grid (in ln x for
/// the Calogero–Moser systems, in x for Toda) and interpolated by cubic Hermite.
/// Points outside the table are evaluated directly.
class DriftTable {
 public:
  DriftTable(const SystemSpec& spec, double lambda, const QuadratureSpec& quad, double lo, double hi,
             std::size_t nodes = 2048);

  double operator()(double x) const;
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  SystemSpec spec_;
  double lambda_;
  QuadratureSpec quad_;
  bool log_grid_;
  double lo_, hi_, s0_, ds_;
  std::vector<double> b_, slope_;  ///< slope is d b / d s in the grid coordinate
};

PathEnsemble simulate_target(const SystemSpec& spec, double lambda, double x0, const McConfig& mc,
                             const QuadratureSpec& quad = {});

/// EM for dX = s dB + drift(X) dt from x0. Steps reaching X <= lower_bound go
/// through the boundary policy. When singular = c > 0 the part c / (X - lower_bound)
/// of the drift is stepped implicitly.
PathEnsemble simulate_scalar_diffusion(const std::function<double(double)>& drift, double x0, const McConfig& mc,
                                       double lower_bound = -kInf, double singular = 0.0);

/// U_0 has density proportional to e^{lambda u} on [-x, x]; U has drift lambda.
/// The running infimum is sampled exactly between grid points.
PathEnsemble pitman_paths(double lambda, double x, const McConfig& mc);

/// lambda coth(lambda x), continued to 1/x at lambda = 0.
double pitman_drift(double lambda, double x);

}  // namespace sbt
