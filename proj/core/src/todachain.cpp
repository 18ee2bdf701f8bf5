#include "sbt/todachain.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "sbt/errors.hpp"

namespace sbt {

namespace {

void check_point(int n, double t, int n_max = kMaxChainIndex) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("tau-chain time t must be positive");
  if (n < 0 || n > n_max) {
    std::ostringstream os;
    os << "tau-chain index n=" << n << " outside [0, " << n_max << "]";
    throw DomainError(os.str());
  }
}

double log_heat(double t, double x, double y) {
  const double d = x - y;
  return -0.5 * std::log(2.0 * std::numbers::pi * t) - d * d / (2.0 * t);
}

}  // namespace

double heat_kernel(double t, double x, double y) {
  if (!(t > 0.0)) throw DomainError("heat_kernel requires t > 0");
  return std::exp(log_heat(t, x, y));
}

double log_tau(const TauChainPoint& p) {
  check_point(p.n, p.t);
  if (p.n == 0) return 0.0;
  double log_fact = 0.0;  // sum_{j=1}^{n-1} ln j!
  for (int j = 1; j < p.n; ++j) log_fact += std::lgamma(j + 1.0);
  const double n = p.n;
  return -0.5 * n * (n - 1.0) * std::log(p.t) + log_fact + n * log_heat(p.t, p.x, p.y);
}

double a_coefficient(const TauChainPoint& p) {
  check_point(p.n, p.t, kMaxChainIndex - 1);
  if (p.n < 1) throw DomainError("a_n needs n >= 1");
  TauChainPoint lo = p, hi = p;
  lo.n -= 1;
  hi.n += 1;
  return std::exp(log_tau(lo) + log_tau(hi) - 2.0 * log_tau(p));
}

double h_chain(int n, double t, double x, double y) {
  check_point(n, t);
  if (n < 1) throw DomainError("h_n needs n >= 1");
  return log_tau({n, t, x, y}) - log_tau({n - 1, t, x, y});
}

double h_closed_form(int n_plus_one, double t, double x, double y) {
  check_point(n_plus_one, t);
  if (n_plus_one < 1) throw DomainError("h_n needs n >= 1");
  const double n = n_plus_one - 1;
  const double d = x - y;
  return -d * d / (2.0 * t) - (0.5 * std::log(2.0 * std::numbers::pi * t) + n * std::log(t) - std::lgamma(n + 1.0));
}

Toda2dResiduals toda2d_residuals(const TauChainPoint& p, double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step h must be positive");
  check_point(p.n, p.t);
  auto f = [&](double dx, double dy) { return log_tau({p.n, p.t, p.x + dx, p.y + dy}); };
  const double fxy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
  const double fxx = (f(h, 0) - 2.0 * f(0, 0) + f(-h, 0)) / (h * h);
  const double a = p.n / p.t;
  return {std::abs(fxy - a), std::abs(fxx + a)};
}

double chain_residual(int n, double t, double x, double y, double h) {
  if (!(h > 0.0)) throw DomainError("finite-difference step h must be positive");
  check_point(n, t, kMaxChainIndex - 1);
  if (n < 1) throw DomainError("chain_residual needs n >= 1");
  auto hn = [&](int k, double dx) { return h_chain(k, t, x + dx, y); };
  const double h0 = hn(n, 0.0);
  const double lhs = (hn(n, h) - 2.0 * h0 + hn(n, -h)) / (h * h);
  const double lower = n == 1 ? 0.0 : std::exp(h0 - hn(n - 1, 0.0));
  const double rhs = lower - std::exp(hn(n + 1, 0.0) - h0);
  return std::abs(lhs - rhs);
}

}  // namespace sbt
