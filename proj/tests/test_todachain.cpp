#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sbt/errors.hpp"
#include "sbt/quadrature.hpp"
#include "sbt/todachain.hpp"

using namespace sbt;

TEST(HeatKernel, Examples) {
  EXPECT_NEAR(heat_kernel(1.0, 0.4, 0.4), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-16);
  EXPECT_NEAR(heat_kernel(0.5, 1.3, 0.3), 0.20755374871029735, 1e-16);
  EXPECT_DOUBLE_EQ(heat_kernel(0.7, 0.2, -1.1), heat_kernel(0.7, -1.1, 0.2));
  EXPECT_THROW(heat_kernel(0.0, 0.0, 0.0), DomainError);
  EXPECT_THROW(heat_kernel(-1.0, 0.0, 0.0), DomainError);
}

TEST(HeatKernel, IntegratesToOne) {
  const double sum = quadrature::composite([](double y) { return heat_kernel(0.8, 0.5, y); }, -12.0, 12.0, 64);
  EXPECT_NEAR(sum, 1.0, 1e-13);
}

TEST(LogTau, Examples) {
  EXPECT_EQ(log_tau({0, 0.7, 0.1, 0.2}), 0.0);
  EXPECT_NEAR(log_tau({1, 0.7, 0.1, 0.2}), std::log(heat_kernel(0.7, 0.1, 0.2)), 1e-15);
  EXPECT_NEAR(log_tau({2, 1.0, 0.3, 0.3}), -1.8378770664093455, 1e-14);
  // n = 3: t^{-3} * 1! * 2! * u^3
  const double u = heat_kernel(0.5, 0.2, -0.4);
  EXPECT_NEAR(log_tau({3, 0.5, 0.2, -0.4}), std::log(std::pow(0.5, -3.0) * 2.0 * u * u * u), 1e-13);
}

TEST(LogTau, InvalidPoints) {
  EXPECT_THROW(log_tau({13, 1.0, 0, 0}), DomainError);
  EXPECT_THROW(log_tau({-1, 1.0, 0, 0}), DomainError);
  EXPECT_THROW(log_tau({2, 0.0, 0, 0}), DomainError);
}

TEST(LogTau, StaysFiniteAtLargeIndex) {
  EXPECT_TRUE(std::isfinite(log_tau({12, 0.01, 5.0, -5.0})));
}

TEST(ACoefficient, EqualsNOverT) {
  EXPECT_NEAR(a_coefficient({2, 0.5, 0.0, 0.0}), 4.0, 1e-12);
  for (int n = 1; n <= 10; ++n) {
    for (double t : {0.1, 0.5, 1.0, 3.0}) {
      const TauChainPoint p{n, t, 0.7, -0.4};
      EXPECT_NEAR(a_coefficient(p) / (n / t), 1.0, 1e-12) << n << ' ' << t;
    }
  }
  EXPECT_THROW(a_coefficient({12, 1.0, 0, 0}), DomainError);
}

TEST(HChain, MatchesClosedForm) {
  for (int n = 0; n <= 10; ++n) {
    for (double t : {0.2, 1.0, 2.5}) {
      const double lhs = h_chain(n + 1, t, 0.9, -0.3);
      const double rhs = h_closed_form(n + 1, t, 0.9, -0.3);
      EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs))) << n << ' ' << t;
    }
  }
}

TEST(Toda2d, Examples) {
  const auto r1 = toda2d_residuals({1, 1.0, 0.3, -0.2}, 1e-3);
  EXPECT_LT(r1.r_xy, 1e-6);
  EXPECT_LT(r1.r_xx, 1e-6);
  const auto r3 = toda2d_residuals({3, 0.5, 0.3, -0.2}, 1e-3);
  EXPECT_LT(r3.r_xy, 1e-5);
  EXPECT_LT(r3.r_xx, 1e-5);
}

TEST(Toda2d, BoundedAtSeveralSteps) {
  // ln tau_n is quadratic in (x, y), so the stencils are exact up to roundoff.
  for (double h : {1e-2, 2.5e-3}) {
    for (int n = 1; n <= 8; ++n) {
      const auto r = toda2d_residuals({n, 0.8, 0.5, 0.1}, h);
      EXPECT_LT(r.r_xy, 1e-6) << n;
      EXPECT_LT(r.r_xx, 1e-6) << n;
    }
  }
}

TEST(ChainResidual, Examples) {
  EXPECT_LT(chain_residual(1, 1.0, 0.2, 0.0, 1e-3), 1e-6);
  EXPECT_LT(chain_residual(4, 0.5, 0.2, 0.0, 1e-3), 1e-5);
  for (int n = 1; n <= 11; ++n) EXPECT_LT(chain_residual(n, 0.7, -0.3, 0.4, 1e-2), 1e-6) << n;
}

TEST(ChainResidual, InvalidIndex) {
  EXPECT_THROW(chain_residual(0, 1.0, 0.0, 0.0, 1e-3), DomainError);
}

TEST(ChainResidual, TranslationInvariant) {
  for (int n = 1; n <= 6; ++n) {
    const double a = chain_residual(n, 0.6, 0.3, -0.1, 1e-2);
    const double b = chain_residual(n, 0.6, 2.3, 1.9, 1e-2);
    EXPECT_NEAR(a, b, 1e-10);
    const auto ra = toda2d_residuals({n, 0.6, 0.3, -0.1}, 1e-2);
    const auto rb = toda2d_residuals({n, 0.6, 2.3, 1.9}, 1e-2);
    EXPECT_NEAR(ra.r_xy, rb.r_xy, 1e-10);
    EXPECT_NEAR(ra.r_xx, rb.r_xx, 1e-10);
  }
}

TEST(TauDeterminant, SmallIndices) {
  // tau_2 = det [[u, u_y], [u_x, u_xy]] = u u_xy - u_x u_y for the heat kernel.
  const double t = 0.6, x = 0.4, y = -0.3;
  const double u = heat_kernel(t, x, y);
  const double d = (x - y) / t;
  const double ux = -d * u, uy = d * u, uxy = (1.0 / t - d * d) * u;
  EXPECT_NEAR(std::log(u * uxy - ux * uy), log_tau({2, t, x, y}), 1e-13);
  EXPECT_NEAR(std::log(u), log_tau({1, t, x, y}), 1e-15);
}
