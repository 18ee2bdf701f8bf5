#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sbt/errors.hpp"
#include "sbt/systems.hpp"

using namespace sbt;

namespace {

std::vector<SystemSpec> all_systems() {
  return {SystemSpec::toda(), SystemSpec::rational(), SystemSpec::hyperbolic1(1.0, 2.0),
          SystemSpec::hyperbolic2(1.0, 2.0), SystemSpec::hyperbolic1(0.7, 1.5), SystemSpec::hyperbolic2(1.3, 0.8)};
}

// Points drawn well inside D.
std::vector<PhasePoint> interior_points(const SystemSpec& spec, int n, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<PhasePoint> pts;
  for (int i = 0; i < n; ++i) {
    switch (spec.kind()) {
      case SystemKind::Toda:
        pts.push_back({-1.0 + 3.0 * unit(gen), -2.0 + 4.0 * unit(gen)});
        break;
      case SystemKind::RationalCM:
      case SystemKind::HyperbolicI: {
        const double x = 0.5 + 2.0 * unit(gen);
        pts.push_back({x, x * (1.6 * unit(gen) - 0.8)});
        break;
      }
      case SystemKind::HyperbolicII:
        pts.push_back({0.3 + 2.0 * unit(gen), -3.0 + 6.0 * unit(gen)});
        break;
    }
  }
  return pts;
}

}  // namespace

TEST(SystemSpecTest, ConstructionBounds) {
  EXPECT_THROW(SystemSpec::hyperbolic1(1.0, 0.9), DomainError);
  EXPECT_THROW(SystemSpec::hyperbolic2(1.0, 0.4), DomainError);
  EXPECT_THROW(SystemSpec::hyperbolic2(0.0, 1.0), DomainError);
  EXPECT_THROW(SystemSpec::hyperbolic1(-1.0, 1.0), DomainError);
  EXPECT_NO_THROW(SystemSpec::hyperbolic2(1.0, 0.5));
  EXPECT_NO_THROW(SystemSpec::hyperbolic1(1.0, 1.0));
}

TEST(SystemSpecTest, TodaAndRationalForceUnitParameters) {
  const SystemSpec t(SystemKind::Toda, 3.0, 5.0);
  EXPECT_EQ(t.epsilon(), 1.0);
  EXPECT_EQ(t.mu(), 1.0);
  const SystemSpec r(SystemKind::RationalCM, 0.2, 9.0);
  EXPECT_EQ(r.epsilon(), 1.0);
  EXPECT_EQ(r.mu(), 1.0);
}

TEST(SystemSpecTest, LambdaCap) {
  EXPECT_DOUBLE_EQ(SystemSpec::hyperbolic2(0.5, 3.0).lambda_cap(), 1.5);
  EXPECT_TRUE(std::isinf(SystemSpec::toda().lambda_cap()));
  EXPECT_FALSE(SystemSpec::rational().has_lambda_cap());
}

TEST(SystemSpecTest, KindNamesRoundTrip) {
  for (auto k : {SystemKind::Toda, SystemKind::RationalCM, SystemKind::HyperbolicI, SystemKind::HyperbolicII}) {
    EXPECT_EQ(parse_system_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_system_kind("trigonometric"), DomainError);
}

TEST(DomainTest, Examples) {
  EXPECT_TRUE(in_domain(SystemSpec::rational(), {1.0, 0.5}));
  EXPECT_FALSE(in_domain(SystemSpec::rational(), {1.0, 1.0}));
  EXPECT_FALSE(in_domain(SystemSpec::rational(), {1.0, -1.0}));
  EXPECT_TRUE(in_domain(SystemSpec::hyperbolic2(1.0, 1.0), {0.1, -50.0}));
  EXPECT_FALSE(in_domain(SystemSpec::hyperbolic2(1.0, 1.0), {0.0, 0.0}));
  EXPECT_TRUE(in_domain(SystemSpec::toda(), {-30.0, 40.0}));
  EXPECT_FALSE(in_domain(SystemSpec::hyperbolic1(1.0, 1.0), {0.5, 0.6}));
}

TEST(LogKernelTest, Examples) {
  EXPECT_DOUBLE_EQ(log_kernel(SystemSpec::toda(), 0.0, {0.0, 0.0}), -1.0);
  EXPECT_DOUBLE_EQ(log_kernel(SystemSpec::rational(), 0.0, {1.0, 0.0}), 0.0);
  // 2 ln(2 tanh(1/2)), high-precision value
  EXPECT_NEAR(log_kernel(SystemSpec::hyperbolic2(1.0, 2.0), 0.0, {1.0, 0.0}), -0.157579304690718831, 1e-14);
}

TEST(LogKernelTest, RationalFormula) {
  const double x = 1.7, u = -0.4, lambda = 0.8;
  EXPECT_NEAR(log_kernel(SystemSpec::rational(), lambda, {x, u}),
              lambda * u + std::log(x * x - u * u) - std::log(x), 1e-14);
}

TEST(LogKernelTest, OutsideDomainThrows) {
  EXPECT_THROW(log_kernel(SystemSpec::rational(), 0.0, {1.0, 1.0}), DomainError);
  EXPECT_THROW(drift_b(SystemSpec::hyperbolic1(1.0, 1.0), {1.0, -2.0}), DomainError);
  EXPECT_THROW(grad_log_kernel(SystemSpec::hyperbolic2(1.0, 1.0), 0.0, {-0.1, 0.0}), DomainError);
}

TEST(GradLogKernelTest, Examples) {
  const auto t = grad_log_kernel(SystemSpec::toda(), 0.0, {0.0, 0.0});
  EXPECT_DOUBLE_EQ(t.gx, 1.0);
  EXPECT_DOUBLE_EQ(t.gu, 0.0);
  const auto r = grad_log_kernel(SystemSpec::rational(), 0.0, {1.0, 0.0});
  EXPECT_DOUBLE_EQ(r.gx, 1.0);
  EXPECT_DOUBLE_EQ(r.gu, 0.0);
}

TEST(GradLogKernelTest, LambdaShiftsOnlyGu) {
  for (const auto& spec : all_systems()) {
    for (const auto& p : interior_points(spec, 10, 3)) {
      const auto g0 = grad_log_kernel(spec, 0.0, p);
      const auto g3 = grad_log_kernel(spec, 3.0, p);
      EXPECT_EQ(g0.gx, g3.gx);
      EXPECT_NEAR(g3.gu - g0.gu, 3.0, 1e-12);
    }
  }
}

TEST(GradLogKernelTest, MatchesFiniteDifferences) {
  const double h = 1e-5;
  for (const auto& spec : all_systems()) {
    for (const auto& p : interior_points(spec, 100, 11)) {
      const auto g = grad_log_kernel(spec, 0.4, p);
      const double fx =
          (log_kernel(spec, 0.4, {p.x + h, p.u}) - log_kernel(spec, 0.4, {p.x - h, p.u})) / (2.0 * h);
      const double fu =
          (log_kernel(spec, 0.4, {p.x, p.u + h}) - log_kernel(spec, 0.4, {p.x, p.u - h})) / (2.0 * h);
      EXPECT_NEAR(g.gx, fx, 1e-6) << to_string(spec.kind()) << " at (" << p.x << ", " << p.u << ")";
      EXPECT_NEAR(g.gu, fu, 1e-6) << to_string(spec.kind()) << " at (" << p.x << ", " << p.u << ")";
    }
  }
}

TEST(DriftTest, Examples) {
  EXPECT_DOUBLE_EQ(drift_b(SystemSpec::toda(), {0.0, 0.0}), 1.0);
  EXPECT_DOUBLE_EQ(drift_b(SystemSpec::rational(), {1.0, 0.0}), 1.0);
  EXPECT_NEAR(drift_b(SystemSpec::hyperbolic2(1.0, 1.0), {1.0, 0.0}), 0.850918128239321545, 1e-14);
}

TEST(DriftTest, EqualsGradientSumAndIsPositive) {
  for (const auto& spec : all_systems()) {
    for (const auto& p : interior_points(spec, 50, 5)) {
      const auto g = grad_log_kernel(spec, 0.0, p);
      const double b = drift_b(spec, p);
      EXPECT_NEAR(b, g.gx + g.gu, 1e-10 * std::max(1.0, std::abs(b)));
      EXPECT_GT(b, 0.0);
    }
  }
}

TEST(CriticalPointTest, Examples) {
  EXPECT_EQ(critical_point(SystemSpec::toda(), 0.0, 1.7), 0.0);
  EXPECT_NEAR(critical_point(SystemSpec::rational(), 1.0, 1.0), std::sqrt(2.0) - 1.0, 1e-15);
  EXPECT_THROW(critical_point(SystemSpec::hyperbolic2(1.0, 1.0), 1.5, 1.0), RangeError);
  EXPECT_THROW(critical_point(SystemSpec::rational(), 0.5, 0.0), DomainError);
  EXPECT_THROW(critical_point(SystemSpec::hyperbolic1(1.0, 1.0), 0.5, -1.0), DomainError);
}

TEST(CriticalPointTest, ResidualAndOddness) {
  for (const auto& spec : all_systems()) {
    const double cap = spec.has_lambda_cap() ? spec.lambda_cap() : 5.0;
    for (double frac : {0.0, 0.1, 0.5, 0.9, 0.99}) {
      const double lambda = frac * cap;
      for (double x : {0.2, 0.7, 1.0, 2.5, 5.0}) {
        const double u = critical_point(spec, lambda, x);
        ASSERT_TRUE(in_domain(spec, {x, u}));
        EXPECT_LE(std::abs(grad_log_kernel(spec, lambda, {x, u}).gu), 1e-12)
            << to_string(spec.kind()) << " lambda=" << lambda << " x=" << x;
        EXPECT_NEAR(critical_point(spec, -lambda, x), -u, 1e-12);
      }
    }
  }
}

TEST(CriticalPointTest, RationalLargeLambdaStaysInside) {
  const double u = critical_point(SystemSpec::rational(), 1e8, 2.0);
  EXPECT_LT(u, 2.0);
  EXPECT_GT(u, 1.99);
}

TEST(BacklundResidualsTest, Examples) {
  EXPECT_LT(backlund_residuals(SystemSpec::toda(), {0.0, 0.0}, 1e-4).r_grad, 1e-14);
  EXPECT_LT(backlund_residuals(SystemSpec::rational(), {1.0, 0.0}, 1e-4).r_grad, 1e-14);
  EXPECT_LT(backlund_residuals(SystemSpec::hyperbolic2(1.0, 2.0), {1.0, 0.0}, 1e-4).r_grad, 1e-12);
  EXPECT_THROW(backlund_residuals(SystemSpec::toda(), {0.0, 0.0}, 0.0), DomainError);
}

TEST(BacklundResidualsTest, IdentitiesOnRandomPoints) {
  for (const auto& spec : all_systems()) {
    for (const auto& p : interior_points(spec, 50, 17)) {
      const auto r = backlund_residuals(spec, p, 1e-3);
      EXPECT_LE(r.r_grad, 1e-10);
      EXPECT_LE(r.r_lap, 1e-4);
    }
  }
}

TEST(BacklundResidualsTest, LaplacianScalesAsHSquared) {
  const auto spec = SystemSpec::hyperbolic1(1.0, 2.0);
  const PhasePoint p{1.0, 0.3};
  const double r1 = backlund_residuals(spec, p, 1e-2).r_lap;
  const double r2 = backlund_residuals(spec, p, 2.5e-3).r_lap;
  EXPECT_GT(r1 / r2, 8.0);
  EXPECT_LT(r1 / r2, 32.0);
}

TEST(LaxResidualTest, Examples) {
  EXPECT_LT(lax_residual(SystemSpec::rational(), 1.0, 1.0), 1e-12);
  for (double x : {-1.0, 0.0, 2.0}) EXPECT_LT(lax_residual(SystemSpec::toda(), 0.0, x), 1e-14);
  EXPECT_LT(lax_residual(SystemSpec::hyperbolic1(1.0, 1.0), 0.0, 1.0), 1e-12);
}

TEST(LaxResidualTest, AllSystemsOnGrid) {
  for (const auto& spec : all_systems()) {
    const double cap = spec.has_lambda_cap() ? spec.lambda_cap() : 3.0;
    for (double lambda : {-0.9 * cap, -0.2, 0.0, 0.5 * cap}) {
      for (double x : {0.3, 1.0, 2.0}) EXPECT_LT(lax_residual(spec, lambda, x), 1e-10);
    }
  }
}

TEST(IdentityRhsTest, HyperbolicTwoGradientRhs) {
  // at u = 0: gx = mu (coth x - tanh(x/2)) = mu / sinh x
  const auto spec = SystemSpec::hyperbolic2(1.0, 2.0);
  const auto g = grad_log_kernel(spec, 0.0, {1.0, 0.0});
  EXPECT_NEAR(g.gx, 2.0 / std::sinh(1.0), 1e-14);
  EXPECT_NEAR(g.gx * g.gx - g.gu * g.gu, gradient_identity_rhs(spec, 1.0), 1e-13);
}
