#pragma once

// Eigenfunctions psi_lambda(x) = \int K_lambda(x,u)^w du over the u-section of D,
// their log-derivatives, and the conditional measures
//   nu_x(du) = psi_lambda(x)^{-1} K_lambda(x,u)^w du.
//
// The quadrature of the defining integral is the canonical psi. Printed closed
// forms (psi_closed_form) are diagnostics only: they may differ from it by a
// constant factor.

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "sbt/rng.hpp"
#include "sbt/systems.hpp"

namespace sbt {

struct QuadratureSpec {
  int n_panels = 16;                ///< starting number of 16-node Gauss–Legendre panels
  double rel_tol = 1e-12;           ///< panel doubling stops when successive values agree to this
  double truncation_margin = 17.0;  ///< decades of decay below the peak where the u-range is cut
  double kernel_power = 1.0;        ///< w in K_lambda^w

  /// Throws DomainError unless n_panels >= 8 and the reals are positive.
  void validate() const;
};

/// Fixed quadrature rule on the u-section at one x. Nodes are interior; the
/// distances x + u and x - u are stored separately so that kernels vanishing
/// at |u| = x are evaluated without cancellation.
class SectionRule {
 public:
  static SectionRule build(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad,
                           int panels);

  double x() const { return x_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  int panels() const { return panels_; }
  /// Log of the integrand's maximum, w * ln K_lambda(x, u_lambda(x)).
  double log_peak() const { return log_peak_; }

  std::span<const double> nodes() const { return u_; }
  /// Quadrature weights including the Jacobian of the grading map.
  std::span<const double> weights() const { return w_; }
  /// K_lambda^w / exp(log_peak) at the nodes.
  std::span<const double> scaled_kernel() const { return k_; }
  /// w * d_x ln K at the nodes.
  std::span<const double> log_kernel_dx() const { return gx_; }

 private:
  double x_ = 0.0, lower_ = 0.0, upper_ = 0.0, log_peak_ = 0.0;
  int panels_ = 0;
  std::vector<double> u_, w_, k_, gx_;
};

/// Panel count at which psi and its x-derivative integral have converged.
int converged_panels(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad);

double log_psi(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad = {});
double psi(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad = {});

/// b_lambda(x) = d/dx ln psi_lambda(x) as a ratio of two quadratures.
double log_psi_drift(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad = {});

/// |H_lambda psi| / psi at x, with psi'' from central differences of step h.
/// All three stencil points share one quadrature rule size. Requires kernel_power == 1.
double eigen_residual(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad, double h);

/// Printed closed forms: 2 K_lambda(e^{-x}) (Toda), lambda^{-3/2} sqrt(2 pi x) I_{3/2}(lambda x)
/// (RationalCM), the mu = 1 formula (HyperbolicI) and the associated Legendre
/// form (HyperbolicII). Absent when no formula covers (kind, mu, lambda).
std::optional<double> psi_closed_form(const SystemSpec& spec, double lambda, double x);

/// The printed lambda = 0 HyperbolicII ground state 2 sqrt(pi) Gamma(mu) / (eps Gamma(mu+1/2)) sinh(eps x)^mu.
/// Kept as a diagnostic: it solves H psi = (eps mu)^2/2 psi, not H psi = 0.
double hyperbolic2_printed_ground_state(const SystemSpec& spec, double x);

/// Macdonald function K_nu(z) = \int_0^inf exp(-z cosh t) cosh(nu t) dt, z > 0.
double macdonald_k(double nu, double z);
/// Modified Bessel I_{3/2}(z) = sqrt(2/(pi z)) (cosh z - sinh z / z), z > 0.
double bessel_i_three_halves(double z);

/// \int g d nu_x.
double nu_expectation(const SystemSpec& spec, double lambda, double x, const std::function<double(double)>& g,
                      const QuadratureSpec& quad = {});

/// Tabulated CDF of nu_x on 4096 nodes with monotone cubic Hermite interpolation.
class NuTable {
 public:
  static constexpr int kNodes = 4096;

  NuTable(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad);

  double cdf(double u) const;
  double quantile(double v) const;
  double lower() const { return u_.front(); }
  double upper() const { return u_.back(); }

 private:
  std::vector<double> u_, cdf_, slope_;
};

/// Cached table for (spec, lambda, x, quad). Thread-safe; construction is serialised.
std::shared_ptr<const NuTable> nu_table(const SystemSpec& spec, double lambda, double x,
                                        const QuadratureSpec& quad = {});

/// One draw from nu_x by inverse CDF.
double sample_nu(const SystemSpec& spec, double lambda, double x, const QuadratureSpec& quad, RngStream& rng);

}  // namespace sbt
