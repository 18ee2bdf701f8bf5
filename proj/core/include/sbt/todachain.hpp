#pragma once

// Noise-off tau-functions of the semi-infinite Toda chain built from the heat kernel
//   u(t,x,y) = (2 pi t)^{-1/2} exp(-(x-y)^2 / 2t),
//   tau_n = t^{-n(n-1)/2} (prod_{j=1}^{n-1} j!) u^n,
// all in log-space.

namespace sbt {

struct TauChainPoint {
  int n = 1;  ///< 1 <= n <= 12
  double t = 1.0;
  double x = 0.0;
  double y = 0.0;
};

struct Toda2dResiduals {
  double r_xy = 0.0;  ///< |FD_xy ln tau_n - n/t|
  double r_xx = 0.0;  ///< |FD_xx ln tau_n + n/t|
};

inline constexpr int kMaxChainIndex = 12;

double heat_kernel(double t, double x, double y);

/// ln tau_n; n = 0 gives ln tau_0 = 0.
double log_tau(const TauChainPoint& p);

/// a_n = tau_{n-1} tau_{n+1} / tau_n^2 from log_tau (n + 1 <= 12).
double a_coefficient(const TauChainPoint& p);

/// h_n = ln tau_n - ln tau_{n-1}.
double h_chain(int n, double t, double x, double y);

/// The closed form h_{n+1} = -(x-y)^2/2t - ln(sqrt(2 pi t) t^n / n!).
double h_closed_form(int n_plus_one, double t, double x, double y);

Toda2dResiduals toda2d_residuals(const TauChainPoint& p, double h);

/// |FD_xx h_n - (e^{h_n - h_{n-1}} - e^{h_{n+1} - h_n})| with e^{h_1 - h_0} = 0.
double chain_residual(int n, double t, double x, double y, double h);

}  // namespace sbt
