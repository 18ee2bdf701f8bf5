#pragma once

// Identity and law checks: finite-difference intertwining residuals, the
// two-sample Kolmogorov–Smirnov test and the Monte Carlo law tests built on it.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sbt/eigen.hpp"
#include "sbt/stochastic.hpp"
#include "sbt/systems.hpp"

namespace sbt {

struct KsReport {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t m = 0;
  double threshold = 0.01;
  bool pass = true;  ///< p_value > threshold
};

struct ResidualReport {
  double max_abs = 0.0;
  std::string grid;
  std::vector<std::pair<std::string, double>> params;
  double tolerance = 0.0;
  bool pass = true;  ///< max_abs <= tolerance
};

/// Kolmogorov tail Q(l) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 l^2); the dual
/// theta series is used for l < 1.
double kolmogorov_q(double l);

/// Exact two-sample statistic (ties handled) and asymptotic p-value. Requires n, m >= 25.
KsReport ks_two_sample(std::span<const double> a, std::span<const double> b, double threshold = 0.01);
/// One-sample variant against a continuous CDF.
KsReport ks_one_sample(std::span<const double> a, const std::function<double(double)>& cdf,
                       double threshold = 0.01);

/// n uniformly random points in a fixed, moderate region of D for each system.
std::vector<PhasePoint> random_grid(const SystemSpec& spec, std::size_t n, std::uint64_t seed);

/// max over grid of |H_lambda K_lambda - (1/2 d_u^2 - lambda d_u) K_lambda| / K_lambda,
/// with H_lambda = 1/2 d_x^2 - V - lambda^2/2 and all derivatives by central differences.
/// tolerance is 1e-5.
ResidualReport intertwining_kernel_residual(const SystemSpec& spec, double lambda, std::span<const PhasePoint> grid,
                                            double h);

/// f(x,u) = amplitude q((x-cx)/wx) q((u-cu)/wu), q(s) = (1-s^2)^3 on |s| < 1.
struct BumpSpec {
  double cx = 0.0, cu = 0.0, wx = 1.0, wu = 1.0, amplitude = 1.0;

  double value(double x, double u) const;
};

/// |H_lambda (K f)(x) - K (A_lambda f)(x)| where (K f)(x) = \int K_lambda(x,u) f(x,u) du,
///   A_lambda = 1/2 d_x^2 + 1/2 d_u^2 + d_x d_u + lambda d_u + (lambda + b) d_x,
/// the outer x-derivative by central differences of step h. The u-integral uses
/// one fixed Gauss–Legendre rule over the bump's u-support.
double intertwining_operator_residual(const SystemSpec& spec, double lambda, const BumpSpec& bump, double x,
                                      const QuadratureSpec& quad, double h);

struct BumpPlacement {
  BumpSpec bump;
  double x = 0.0;
};

/// Three bump placements per system with supports well inside D.
std::vector<BumpPlacement> standard_bump_placements(const SystemSpec& spec);

/// Throws HypothesisError unless the law theorems apply: |lambda| < eps*mu and
/// mu > 1/2 for HyperbolicII, x0 inside the x-section.
void require_law_hypotheses(const SystemSpec& spec, double lambda, double x0);

struct LawTestOptions {
  double threshold = 0.01;
  /// Simulate the target diffusion at this lambda instead (negative control).
  std::optional<double> target_lambda;
};

/// KS of X_t from the Bäcklund system with U_0 ~ nu_{x0} against X_t from the
/// target diffusion, equal path counts, independent seeds. One run serves all times.
std::vector<KsReport> marginal_law_tests(const SystemSpec& spec, double lambda, double x0,
                                         std::span<const double> times, const McConfig& mc,
                                         const QuadratureSpec& quad = {}, const LawTestOptions& opts = {});
KsReport marginal_law_test(const SystemSpec& spec, double lambda, double x0, double t, const McConfig& mc,
                           const QuadratureSpec& quad = {}, const LawTestOptions& opts = {});

/// Paths binned by X_t quantiles; per bin the mean of g(U_t) - m(X_t), with
/// m(x) = \int g d nu_x, in units of its standard error. max_abs is the largest
/// standardised discrepancy; tolerance is cap. Bins under 50 paths are merged.
std::vector<ResidualReport> conditional_law_tests(const SystemSpec& spec, double lambda, double x0, double t,
                                                  const std::vector<std::function<double(double)>>& gs,
                                                  int n_bins, const McConfig& mc, const QuadratureSpec& quad = {},
                                                  double cap = 4.0);
ResidualReport conditional_law_test(const SystemSpec& spec, double lambda, double x0, double t,
                                    const std::function<double(double)>& g, int n_bins, const McConfig& mc,
                                    const QuadratureSpec& quad = {}, double cap = 4.0);

/// KS of X_t from pitman_paths against EM for dX = dB + c lambda coth(lambda X) dt
/// from x, where c = drift_multiplier (1 for the theorem, 2 for the control).
KsReport pitman_law_test(double lambda, double x, double t, const McConfig& mc, double threshold = 0.01,
                         double drift_multiplier = 1.0);

}  // namespace sbt
