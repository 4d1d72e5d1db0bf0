#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "thermo/jacobi.hpp"

using namespace thermo;
using thermo::testkit::Rng;

namespace {

ThermostatSystem pure_constant(double e1, double e2) {
  return {ConformalMetric::flat(), SpectralScalarField{}, SpectralVectorField::constant(e1, e2)};
}

JacobiOptions tight() {
  JacobiOptions o;
  o.tol = 1e-12;
  return o;
}

}  // namespace

TEST(KLambda, FlatGeodesic) {
  EXPECT_EQ(k_lambda(ThermostatSystem::flat_geodesic(), {{1, 1}, 1}), 0.0);
}

TEST(KLambda, FlatMagnetic) {
  Rng rng(1);
  const auto sys = ThermostatSystem::flat_magnetic(1.5);
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(k_lambda(sys, testkit::random_state(rng)), 2.25, 1e-14);
}

TEST(KLambda, ConstantFieldIsLambdaSquared) {
  Rng rng(2);
  const double e1 = 0.6, e2 = -0.3;
  const auto sys = pure_constant(e1, e2);
  for (int i = 0; i < 10; ++i) {
    const auto st = testkit::random_state(rng);
    const double l = -e1 * std::sin(st.theta) + e2 * std::cos(st.theta);
    EXPECT_NEAR(k_lambda(sys, st), l * l, 1e-15);
  }
}

TEST(JacobiSolve, GeodesicIsLinear) {
  const auto traj = evolve(ThermostatSystem::flat_geodesic(), {{0, 0}, 0.3}, 10.0, 1e-10);
  const auto sol = jacobi_solve(traj, 0.0, 1.0, tight());
  for (double t : {0.5, 2.0, 9.5}) EXPECT_NEAR(sol.y(t), t, 1e-10);
  EXPECT_TRUE(sol.zeros().empty());
}

TEST(JacobiSolve, MagneticIsSine) {
  const double c = 1.3;
  const auto traj = evolve(ThermostatSystem::flat_magnetic(c), {{0, 0}, 0}, 10.0, 1e-11);
  const auto sol = jacobi_solve(traj, 0.0, 1.0, tight());
  for (double t : {0.5, 2.0, 7.0}) EXPECT_NEAR(sol.y(t), std::sin(c * t) / c, 1e-9);
  ASSERT_FALSE(sol.zeros().empty());
  EXPECT_NEAR(sol.zeros().front().time, kPi / c, 1e-9);
}

TEST(JacobiSolve, ConstantThermostatStaysPositive) {
  // Along this trajectory sin(theta) = tanh t and y = cos(gd t), which decays
  // to zero from above like 2 e^{-t}. Past t ~ 25 it is below integration
  // noise, so the direct solve stops at 20 and the Pruefer scan covers 200.
  const auto traj = evolve(pure_constant(0.0, 1.0), {{0, 0}, 0}, 20.0, 1e-11);
  const auto sol = jacobi_solve(traj, 1.0, 0.0, tight());
  EXPECT_TRUE(sol.zeros().empty());
  for (double t = 0.0; t <= 20.0; t += 0.5) {
    EXPECT_NEAR(sol.y(t), std::cos(2.0 * std::atan(std::tanh(0.5 * t))), 1e-10);
    EXPECT_GT(sol.y(t), 0.0);
  }
  EXPECT_FALSE(first_conjugate_time(pure_constant(0.0, 1.0), {{0, 0}, 0}, 200.0).first_time);
}

TEST(FirstConjugateTime, MagneticUnit) {
  const auto rep = first_conjugate_time(ThermostatSystem::flat_magnetic(1.0), {{0, 0}, 0}, 5.0);
  ASSERT_TRUE(rep.first_time);
  EXPECT_NEAR(*rep.first_time, kPi, 1e-9);
  EXPECT_EQ(rep.zero_count, 1);
  EXPECT_EQ(rep.horizon, 5.0);
}

TEST(FirstConjugateTime, GeodesicHasNone) {
  const auto rep = first_conjugate_time(ThermostatSystem::flat_geodesic(), {{1, 2}, 0.4}, 500.0);
  EXPECT_FALSE(rep.first_time);
  EXPECT_EQ(rep.zero_count, 0);
}

TEST(FirstConjugateTime, MagneticTwo) {
  const auto rep = first_conjugate_time(ThermostatSystem::flat_magnetic(2.0), {{0, 0}, 0}, 2.0);
  ASSERT_TRUE(rep.first_time);
  EXPECT_NEAR(*rep.first_time, kPi / 2, 1e-9);
}

TEST(FirstConjugateTime, CountsEveryZero) {
  const auto rep = first_conjugate_time(ThermostatSystem::flat_magnetic(1.0), {{0, 0}, 0}, 10.0);
  ASSERT_EQ(rep.zero_count, 3);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(rep.zeros[k], kPi * (k + 1), 1e-9);
}

TEST(FirstConjugateTime, RejectsNonPositiveHorizon) {
  EXPECT_THROW(first_conjugate_time(ThermostatSystem::flat_geodesic(), {}, 0.0), std::invalid_argument);
}

TEST(FirstConjugateTime, IsASignChangeOfY) {
  Rng rng(3);
  for (int i = 0; i < 5; ++i) {
    const auto sys = testkit::random_system(rng, 2, 0.15, 1.0, 0.4);
    const auto st = testkit::random_state(rng);
    const auto rep = first_conjugate_time(sys, st, 30.0);
    if (!rep.first_time) continue;
    const auto traj = evolve(sys, st, 31.0, 1e-12);
    const auto sol = jacobi_solve(traj, 0.0, 1.0, tight());
    const double t = *rep.first_time;
    EXPECT_LT(sol.y(t - 1e-4) * sol.y(t + 1e-4), 0.0);
    EXPECT_LT(std::abs(sol.y(t)), 1e-8);
  }
}

TEST(DexpVsJacobi, GeodesicNormalDirection) {
  const double theta = 0.7;
  const Vec2 iv{-std::sin(theta), std::cos(theta)};
  const auto cmp = dexp_vs_jacobi(ThermostatSystem::flat_geodesic(), {0.5, 0.5}, theta, 1.0, iv);
  EXPECT_NEAR(cmp.jacobi_norm, 1.0, 1e-10);
  EXPECT_NEAR(std::hypot(cmp.finite_difference.c1, cmp.finite_difference.c2), 1.0, 1e-8);
  EXPECT_LT(cmp.discrepancy, 1e-8);
}

TEST(DexpVsJacobi, MagneticConjugatePoint) {
  const Vec2 iv{0.0, 1.0};
  const auto cmp = dexp_vs_jacobi(ThermostatSystem::flat_magnetic(1.0), {0, 0}, 0.0, kPi, iv);
  // At t = pi the normal part y vanishes; the tangential part is int_0^pi sin = 2
  // along gamma'(pi) = (-1, 0).
  EXPECT_NEAR(cmp.jacobi.c2, 0.0, 1e-9);
  EXPECT_NEAR(cmp.finite_difference.c2, 0.0, 1e-6);
  EXPECT_NEAR(cmp.jacobi.c1, -2.0, 1e-9);
  EXPECT_LT(cmp.discrepancy, 1e-6);
}

TEST(DexpVsJacobi, RandomSystems) {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto sys = testkit::random_system(rng);
    const auto st = testkit::random_state(rng);
    const Vec2 w{testkit::uniform(rng, -1, 1), testkit::uniform(rng, -1, 1)};
    EXPECT_LE(dexp_vs_jacobi(sys, st.x, st.theta, testkit::uniform(rng, 0.5, 2.0), w).discrepancy, 1e-4);
  }
}

TEST(DexpVsJacobi, RejectsZeroTime) {
  EXPECT_THROW(dexp_vs_jacobi(ThermostatSystem::flat_geodesic(), {}, 0.0, 0.0, {1, 0}), std::invalid_argument);
}

TEST(JacobiProperty, NoFurtherZeroOnConjugateFreeSystems) {
  Rng rng(5);
  for (int s = 0; s < 4; ++s) {
    const auto sys = testkit::random_divergence_free(rng, testkit::uniform(rng, 0.3, 1.5));
    const auto traj = evolve_span(sys, testkit::random_state(rng), 0.0, 100.0, integrator_options(1e-11));
    for (double a : {0.0, 13.0, 47.0}) {
      JacobiOptions o;
      o.t_start = a;
      const auto sol = jacobi_solve(traj, 0.0, 1.0, o);
      int later = 0;
      for (const auto& z : sol.zeros()) later += z.time > a;
      EXPECT_EQ(later, 0) << "system " << s << " a = " << a;
    }
  }
}

TEST(JacobiProperty, TangentialFieldIsConstant) {
  Rng rng(6);
  const auto traj = evolve(testkit::random_system(rng), testkit::random_state(rng), 20.0, 1e-10);
  JacobiOptions o;
  o.x0 = 0.75;
  const auto sol = jacobi_solve(traj, 0.0, 0.0, o);
  for (double t = 0.0; t <= 20.0; t += 1.0) {
    EXPECT_EQ(sol.y(t), 0.0);
    EXPECT_NEAR(sol.x(t), 0.75, 1e-15);
  }
}

TEST(JacobiProperty, WronskianLawAndNonVanishing) {
  Rng rng(7);
  for (int i = 0; i < 5; ++i) {
    const auto traj = evolve(testkit::random_system(rng), testkit::random_state(rng), 20.0, 1e-12);
    const auto ya = jacobi_solve(traj, 1.0, 0.0, tight());
    const auto yb = jacobi_solve(traj, 0.0, 1.0, tight());
    const double w0 = wronskian(ya, yb, 0.0);
    // Running integral of V(lambda) by the trapezoid rule on a fine grid.
    const int n = 20000;
    const double h = 20.0 / n;
    double integral = 0.0, min_w = std::abs(w0), worst = 0.0;
    double prev = traj.geometry(0.0).v_lambda();
    for (int k = 1; k <= n; ++k) {
      const double t = k * h;
      const double cur = traj.geometry(t).v_lambda();
      integral += 0.5 * h * (prev + cur);
      prev = cur;
      if (k % 100 == 0) {
        const double w = wronskian(ya, yb, t);
        min_w = std::min(min_w, std::abs(w));
        worst = std::max(worst, std::abs(w - w0 * std::exp(integral)) / std::abs(w0));
      }
    }
    EXPECT_GT(min_w, 0.0);
    EXPECT_LT(worst, 1e-6);
  }
}

TEST(JacobiProperty, Linearity) {
  Rng rng(8);
  const auto traj = evolve(testkit::random_system(rng), testkit::random_state(rng), 15.0, 1e-11);
  const double c1 = testkit::uniform(rng, -2, 2), c2 = testkit::uniform(rng, -2, 2);
  const auto a = jacobi_solve(traj, 1.0, 0.0, tight());
  const auto b = jacobi_solve(traj, 0.0, 1.0, tight());
  const auto sum = jacobi_solve(traj, c1, c2, tight());
  for (double t = 0.0; t <= 15.0; t += 0.25) {
    const double scale = 1.0 + std::abs(c1 * a.y(t)) + std::abs(c2 * b.y(t));
    EXPECT_NEAR(sum.y(t), c1 * a.y(t) + c2 * b.y(t), 1e-9 * scale);
    EXPECT_NEAR(sum.ydot(t), c1 * a.ydot(t) + c2 * b.ydot(t), 1e-9 * scale);
  }
}

TEST(JacobiProperty, BackwardSolveFromInteriorStart) {
  const auto traj = evolve_span(ThermostatSystem::flat_magnetic(1.0), {{0, 0}, 0}, 5.0, 5.0, integrator_options(1e-11));
  JacobiOptions o = tight();
  o.t_start = 0.0;
  const auto sol = jacobi_solve(traj, 0.0, 1.0, o);
  for (double t : {-4.0, -1.0, 2.0, 4.5}) EXPECT_NEAR(sol.y(t), std::sin(t), 1e-9);
  ASSERT_EQ(sol.zeros().size(), 2u);
  EXPECT_NEAR(sol.zeros()[0].time, -kPi, 1e-9);
  EXPECT_NEAR(sol.zeros()[1].time, kPi, 1e-9);
}
