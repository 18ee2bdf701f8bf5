// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// All tolerances, seeds and sample sizes are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "sbt/classical.hpp"
#include "sbt/eigen.hpp"
#include "sbt/rng.hpp"
#include "sbt/stochastic.hpp"
#include "sbt/systems.hpp"
#include "sbt/todachain.hpp"
#include "sbt/verify.hpp"

using namespace sbt;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double cap_of(const SystemSpec& s) { return s.has_lambda_cap() ? s.lambda_cap() : 1.0; }

std::vector<SystemSpec> four_systems() {
  return {SystemSpec::toda(), SystemSpec::rational(), SystemSpec::hyperbolic1(1.0, 2.0),
          SystemSpec::hyperbolic2(1.0, 2.0)};
}

std::string name_of(const SystemSpec& s) {
  std::string n(to_string(s.kind()));
  if (s.kind() == SystemKind::HyperbolicI || s.kind() == SystemKind::HyperbolicII) {
    n += "(eps=" + fmt("%g", s.epsilon()) + ",mu=" + fmt("%g", s.mu()) + ")";
  }
  return n;
}

// 1. Kernel identities and kernel-level intertwining.
Outcome identity_suite() {
  Stopwatch sw;
  double worst_grad = 0.0, worst_kernel = 0.0;
  for (const auto& spec : four_systems()) {
    const auto grid = random_grid(spec, 50, kSeed);
    for (const auto& p : grid) worst_grad = std::max(worst_grad, backlund_residuals(spec, p, 1e-3).r_grad);
    for (double lambda : {0.0, 0.5, -0.9 * cap_of(spec)}) {
      worst_kernel = std::max(worst_kernel, intertwining_kernel_residual(spec, lambda, grid, 1e-3).max_abs);
    }
  }
  const double t = sw.seconds();
  Outcome o;
  o.pass = worst_grad <= 1e-10 && worst_kernel <= 1e-5 && t < 10.0;
  o.detail = "max r_grad " + fmt("%.2e", worst_grad) + " (<= 1e-10), max intertwining " +
             fmt("%.2e", worst_kernel) + " (<= 1e-5), 4 systems x 3 lambda x 50 points, " + fmt("%.2f", t) +
             " s (< 10 s)";
  return o;
}

// 2. Operator intertwining with O(h^2) scaling.
Outcome operator_suite() {
  Stopwatch sw;
  double worst = 0.0, ratio_lo = 1e300, ratio_hi = 0.0;
  QuadratureSpec quad;
  for (const auto& spec : four_systems()) {
    for (const auto& place : standard_bump_placements(spec)) {
      const double r1 = intertwining_operator_residual(spec, 0.5, place.bump, place.x, quad, 1e-3);
      const double r2 = intertwining_operator_residual(spec, 0.5, place.bump, place.x, quad, 2.5e-4);
      worst = std::max(worst, r1);
      ratio_lo = std::min(ratio_lo, r1 / r2);
      ratio_hi = std::max(ratio_hi, r1 / r2);
    }
  }
  const double t = sw.seconds();
  Outcome o;
  o.pass = worst <= 1e-4 && ratio_lo >= 8.0 && ratio_hi <= 32.0 && t < 60.0;
  o.detail = "max residual " + fmt("%.2e", worst) + " (<= 1e-4), h 1e-3 -> 2.5e-4 ratios in [" +
             fmt("%.2f", ratio_lo) + ", " + fmt("%.2f", ratio_hi) + "] (within [8, 32]), 12 placements, " +
             fmt("%.2f", t) + " s (< 60 s)";
  return o;
}

// 3. Eigenfunctions.
Outcome eigen_suite() {
  Stopwatch sw;
  QuadratureSpec quad;
  double worst_res = 0.0, worst_sym = 0.0;
  for (const auto& spec : four_systems()) {
    const double c = cap_of(spec);
    for (double lambda : {0.0, 0.3, -0.3, 0.9 * c, -0.9 * c}) {
      for (double x : {0.3, 1.0, 2.5}) {
        worst_res = std::max(worst_res, eigen_residual(spec, lambda, x, quad, 1e-3));
        if (spec.kind() != SystemKind::HyperbolicI && lambda > 0.0) {
          const double a = psi(spec, lambda, x, quad), b = psi(spec, -lambda, x, quad);
          worst_sym = std::max(worst_sym, std::abs(a - b) / a);
        }
      }
    }
  }
  const double psi01 = psi(SystemSpec::rational(), 0.0, 1.0, quad);
  double worst_ratio = 0.0;
  for (double lambda : {0.0, 1.0}) {
    for (double x : {0.5, 1.0, 2.0}) {
      const double r = psi(SystemSpec::rational(), lambda, x, quad) /
                       *psi_closed_form(SystemSpec::rational(), lambda, x);
      worst_ratio = std::max(worst_ratio, std::abs(r - 2.0));
    }
  }
  const double t = sw.seconds();
  Outcome o;
  o.pass = worst_res <= 1e-5 && worst_sym <= 1e-8 && std::abs(psi01 - 4.0 / 3.0) <= 1e-10 && worst_ratio <= 1e-8 &&
           t < 30.0;
  o.detail = "max eigen_residual " + fmt("%.2e", worst_res) + " (<= 1e-5), max psi symmetry " +
             fmt("%.2e", worst_sym) + " (<= 1e-8), rational psi_0(1) - 4/3 = " + fmt("%.1e", psi01 - 4.0 / 3.0) +
             " (|.| <= 1e-10), max |psi/closed - 2| " + fmt("%.1e", worst_ratio) + " (<= 1e-8), " +
             fmt("%.2f", t) + " s (< 30 s)";
  return o;
}

// 4. Classical flows.
Outcome classical_suite() {
  Stopwatch sw;
  struct Case {
    SystemSpec spec;
    double lambda, x0, t;
    double expect;  // NaN: compare with flow_exact
  };
  const double nan = std::nan("");
  const std::vector<Case> cases = {
      {SystemSpec::toda(), 0.0, 0.0, 1.0, std::log(2.0)},
      {SystemSpec::rational(), 0.0, 1.0, 4.0, 3.0},
      {SystemSpec::hyperbolic1(1.0, 1.0), 0.0, std::acosh(1.5), 0.5, std::acosh(2.0)},
      {SystemSpec::toda(), 0.7, 0.0, 1.0, nan},
      {SystemSpec::toda(), -0.5, 0.5, 1.0, nan},
      {SystemSpec::rational(), 1.0, 1.0, 1.0, nan},
      {SystemSpec::rational(), -0.5, 1.0, 1.0, nan},
      {SystemSpec::hyperbolic1(1.0, 2.0), 0.5, 1.0, 1.0, nan},
      {SystemSpec::hyperbolic1(1.0, 2.0), -1.5, 1.0, 1.0, nan},
      {SystemSpec::hyperbolic2(1.0, 2.0), 0.5, 1.0, 1.0, nan},
      {SystemSpec::hyperbolic2(1.0, 2.0), -1.0, 1.0, 1.0, nan},
  };
  double worst_end = 0.0, worst_u = 0.0, worst_lax = 0.0;
  for (const auto& c : cases) {
    const Trajectory tr = flow_rk4(c.spec, c.lambda, c.x0, c.t, 1e-3);
    const double exact = std::isnan(c.expect) ? flow_exact(c.spec, c.lambda, c.x0, c.t).x : c.expect;
    worst_end = std::max(worst_end, std::abs(tr.states.back().x - exact));
    const ConservationReport r = conservation_report(tr);
    worst_u = std::max(worst_u, r.r_u);
    worst_lax = std::max(worst_lax, r.r_lax);
  }
  const double t = sw.seconds();
  Outcome o;
  o.pass = worst_end <= 1e-9 && worst_u <= 1e-8 && worst_lax <= 1e-6 && t < 10.0;
  o.detail = "max RK4 endpoint error " + fmt("%.2e", worst_end) + " (<= 1e-9), r_u " + fmt("%.2e", worst_u) +
             " (<= 1e-8), r_lax " + fmt("%.2e", worst_lax) + " (<= 1e-6), 3 closed-form + 8 lambda != 0 cases, " +
             fmt("%.2f", t) + " s (< 10 s)";
  return o;
}

// 5. Toda Euler–Maruyama vs pathwise exact solution.
Outcome coupling_suite() {
  Stopwatch sw;
  std::vector<double> errs;
  for (double dt : {1e-2, 5e-3, 2.5e-3, 1.25e-3}) {
    McConfig mc;
    mc.n_paths = 256;
    mc.dt = dt;
    mc.horizon = 1.0;
    mc.seed = kSeed;
    mc.lambda = 0.5;
    mc.save_every = mc.n_steps();
    const InitialCondition init{0.0, 0.0};
    const auto em = simulate_backlund(SystemSpec::toda(), init, mc);
    const auto ex = toda_exact_paths(init, mc);
    double sum = 0.0;
    for (std::size_t p = 0; p < mc.n_paths; ++p) sum += std::abs(em.x(p, em.n_times - 1) - ex.x(p, ex.n_times - 1));
    errs.push_back(sum / static_cast<double>(mc.n_paths));
  }
  bool ok = true;
  std::string ratios;
  for (std::size_t i = 0; i + 1 < errs.size(); ++i) {
    const double r = errs[i] / errs[i + 1];
    ok = ok && r >= 1.5 && r <= 2.5;
    ratios += (i ? ", " : "") + fmt("%.3f", r);
  }
  const double t = sw.seconds();
  Outcome o;
  o.pass = ok && t < 30.0;
  o.detail = "mean endpoint errors " + fmt("%.3e", errs[0]) + " .. " + fmt("%.3e", errs.back()) +
             ", halving ratios " + ratios + " (each in [1.5, 2.5]), 256 paths, " + fmt("%.2f", t) + " s (< 30 s)";
  return o;
}

struct LawCase {
  SystemSpec spec;
  double lambda, x0;
};

std::vector<LawCase> law_grid() {
  const auto h2 = SystemSpec::hyperbolic2(1.0, 1.0);
  return {{SystemSpec::toda(), 0.0, 0.0},     {SystemSpec::toda(), 0.5, 0.0}, {SystemSpec::rational(), 0.0, 1.0},
          {SystemSpec::rational(), 1.0, 1.0}, {h2, 0.0, 1.0},                  {h2, 0.5, 1.0}};
}

McConfig law_mc(std::size_t n) {
  McConfig mc;
  mc.n_paths = n;
  mc.dt = 1e-3;
  mc.seed = kSeed;
  return mc;
}

// 6. Marginal law of X_t.
Outcome marginal_suite() {
  Stopwatch sw;
  const double times[] = {0.25, 1.0};
  double min_p = 1.0, max_control_p = 0.0;
  std::string worst;
  for (const auto& c : law_grid()) {
    const auto reps = marginal_law_tests(c.spec, c.lambda, c.x0, times, law_mc(20000));
    for (std::size_t i = 0; i < reps.size(); ++i) {
      if (reps[i].p_value < min_p) {
        min_p = reps[i].p_value;
        worst = name_of(c.spec) + " lambda=" + fmt("%g", c.lambda) + " t=" + fmt("%g", times[i]);
      }
    }
    if (c.lambda != 0.0) {
      // controls at the horizon, where the drift mismatch has acted longest
      LawTestOptions neg;
      neg.target_lambda = 0.0;
      const double p = marginal_law_test(c.spec, c.lambda, c.x0, 1.0, law_mc(20000), {}, neg).p_value;
      max_control_p = std::max(max_control_p, p);
    }
  }
  const double t = sw.seconds();
  Outcome o;
  o.pass = min_p > 0.01 && max_control_p < 1e-3 && t < 600.0;
  o.detail = "min p " + fmt("%.4f", min_p) + " at " + worst + " (> 0.01), 12 tests at n=20000 dt=1e-3; " +
             "negative controls (target lambda=0, t=1) max p " + fmt("%.2e", max_control_p) + " (< 1e-3), " +
             fmt("%.1f", t) + " s (< 600 s)";
  return o;
}

// 7. Conditional law of U_t given X_t.
Outcome conditional_suite() {
  Stopwatch sw;
  const std::vector<std::function<double(double)>> gs = {[](double u) { return u; },
                                                         [](double u) { return std::tanh(u); }};
  double worst = 0.0;
  std::string where;
  for (const auto& c : law_grid()) {
    for (double t : {0.25, 1.0}) {
      const auto reps = conditional_law_tests(c.spec, c.lambda, c.x0, t, gs, 8, law_mc(40000));
      for (std::size_t i = 0; i < reps.size(); ++i) {
        if (reps[i].max_abs >= worst) {
          worst = reps[i].max_abs;
          where = name_of(c.spec) + " lambda=" + fmt("%g", c.lambda) + " t=" + fmt("%g", t) +
                  (i == 0 ? " g=u" : " g=tanh");
        }
      }
    }
  }
  const double t = sw.seconds();
  Outcome o;
  o.pass = worst <= 4.0;
  o.detail = "max standardised discrepancy " + fmt("%.3f", worst) + " at " + where +
             " (<= 4), 24 tests, 8 bins, n=40000, " + fmt("%.1f", t) + " s";
  return o;
}

// 8. Pitman's 2M - X.
Outcome pitman_suite() {
  Stopwatch sw;
  double min_p = 1.0, max_control = 0.0;
  for (double lambda : {0.0, 1.0}) {
    min_p = std::min(min_p, pitman_law_test(lambda, 1.0, 1.0, law_mc(20000)).p_value);
    max_control = std::max(max_control, pitman_law_test(lambda, 1.0, 1.0, law_mc(20000), 0.01, 2.0).p_value);
  }
  const double t = sw.seconds();
  Outcome o;
  o.pass = min_p > 0.01 && max_control < 1e-3;
  o.detail = "min p " + fmt("%.4f", min_p) + " over (lambda,x) in {(0,1),(1,1)}, t=1 (> 0.01); doubled-drift control max p " +
             fmt("%.2e", max_control) + " (< 1e-3), n=20000, " + fmt("%.1f", t) + " s";
  return o;
}

// 9. Semiclassical concentration and the gradient identity.
Outcome semiclassical_suite() {
  Stopwatch sw;
  const SystemSpec spec = SystemSpec::rational();
  const double target = critical_point(spec, 1.0, 1.0);
  std::vector<double> means, stds;
  for (double w : {1.0, 10.0, 100.0}) {
    QuadratureSpec quad;
    quad.kernel_power = w;
    RngStream rng(kSeed, static_cast<std::uint64_t>(w));
    constexpr int n = 10000;
    double s = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = sample_nu(spec, 1.0, 1.0, quad, rng);
      s += u;
      ss += u * u;
    }
    const double mean = s / n;
    means.push_back(mean);
    stds.push_back(std::sqrt((ss - n * mean * mean) / (n - 1)));
  }
  double worst_grad = 0.0;
  const std::vector<std::pair<SystemSpec, double>> pts = {
      {SystemSpec::toda(), 1.0}, {SystemSpec::rational(), 0.5}, {SystemSpec::hyperbolic1(1.0, 2.0), 0.5},
      {SystemSpec::hyperbolic2(1.0, 2.0), 0.5}};
  for (const auto& [s, lambda] : pts) {
    for (double x : {0.5, 1.0, 2.0}) {
      worst_grad = std::max(worst_grad, gradient_identity_residual(s, lambda, x, 1e-4));
    }
  }
  const double t = sw.seconds();
  Outcome o;
  const bool decreasing = stds[0] > stds[1] && stds[1] > stds[2];
  o.pass = std::abs(means[2] - target) <= 0.05 && decreasing && worst_grad <= 1e-7;
  o.detail = "rational lambda=1 x=1: std " + fmt("%.4f", stds[0]) + " > " + fmt("%.4f", stds[1]) + " > " +
             fmt("%.4f", stds[2]) + " for w=1,10,100; w=100 mean " + fmt("%.4f", means[2]) + " vs u_lambda " +
             fmt("%.4f", target) + " (|diff| <= 0.05); max gradient identity residual " + fmt("%.2e", worst_grad) +
             " (<= 1e-7, h=1e-4), " + fmt("%.2f", t) + " s";
  return o;
}

// 10. Noise-off Toda chain.
Outcome chain_suite() {
  Stopwatch sw;
  double worst = 0.0, worst_a = 0.0;
  for (int n = 1; n <= 5; ++n) {
    for (double tt : {0.5, 1.0, 2.0}) {
      for (auto [x, y] : {std::pair{0.0, 0.0}, {0.3, -0.2}, {-0.7, 0.4}}) {
        const auto r = toda2d_residuals({n, tt, x, y}, 1e-3);
        worst = std::max({worst, r.r_xy, r.r_xx, chain_residual(n, tt, x, y, 1e-3)});
        worst_a = std::max(worst_a, std::abs(a_coefficient({n, tt, x, y}) / (n / tt) - 1.0));
      }
    }
  }
  const double t = sw.seconds();
  Outcome o;
  o.pass = worst <= 1e-5 && worst_a <= 1e-12 && t < 5.0;
  o.detail = "max toda2d/chain residual " + fmt("%.2e", worst) + " (<= 1e-5, h=1e-3, n<=5, t in {0.5,1,2}), " +
             "a_n relative error " + fmt("%.1e", worst_a) + " (<= 1e-12), " + fmt("%.3f", t) + " s (< 5 s)";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {1, "identity suite", identity_suite},
      {2, "operator intertwining", operator_suite},
      {3, "eigenfunction suite", eigen_suite},
      {4, "classical flow", classical_suite},
      {5, "Toda strong coupling", coupling_suite},
      {6, "marginal law tests", marginal_suite},
      {7, "conditional law", conditional_suite},
      {8, "Pitman", pitman_suite},
      {9, "semiclassical", semiclassical_suite},
      {10, "Toda chain", chain_suite},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& ex) {
      o.pass = false;
      o.detail = std::string("exception: ") + ex.what();
    }
    failures += o.pass ? 0 : 1;
    std::printf("criterion %2d %s  %s: %s\n", c.id, o.pass ? "PASS" : "FAIL", c.title, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}
