#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "thermo/dynamics.hpp"

using namespace thermo;
using thermo::testkit::Rng;

namespace {

SpectralScalarField sin_x1() { return SpectralScalarField::from_terms(1, {{1, 0, 1.0, -kPi / 2}}); }

ThermostatSystem pure(SpectralVectorField e, SpectralScalarField phi = {}) {
  return {ConformalMetric(std::move(phi)), SpectralScalarField{}, std::move(e)};
}

double angle_gap(double a, double b) { return std::abs(std::remainder(a - b, kTwoPi)); }

}  // namespace

TEST(LambdaEval, GeodesicIsZero) {
  Rng rng(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(lambda_eval(ThermostatSystem::flat_geodesic(), testkit::random_state(rng)), 0.0);
}

TEST(LambdaEval, MagneticIsConstant) {
  Rng rng(2);
  const auto sys = ThermostatSystem::flat_magnetic(1.7);
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(lambda_eval(sys, testkit::random_state(rng)), 1.7, 1e-15);
}

TEST(LambdaEval, RotatedField) {
  EXPECT_NEAR(lambda_eval(pure(SpectralVectorField::constant(0.0, 1.0)), {{0.3, 0.2}, 0.0}), 1.0, 1e-15);
}

TEST(LambdaEval, MatchesMetricInnerProduct) {
  Rng rng(3);
  const auto sys = testkit::random_system(rng);
  for (int i = 0; i < 20; ++i) {
    const auto st = testkit::random_state(rng);
    const auto g = local_geometry(sys, st);
    const double ip = sys.metric().inner(st.x, sys.e()(st.x), g.normal());
    EXPECT_NEAR(g.lambda(), sys.f()(st.x) + ip, 1e-14);
    EXPECT_NEAR(sys.metric().norm(st.x, g.velocity()), 1.0, 1e-15);
    EXPECT_NEAR(sys.metric().inner(st.x, g.velocity(), g.normal()), 0.0, 1e-15);
  }
}

TEST(VLambda, ZeroField) {
  const auto sys = ThermostatSystem::flat_magnetic(2.0);
  EXPECT_EQ(v_lambda(sys, {{1, 1}, 0.3}), 0.0);
  EXPECT_EQ(v2_lambda(sys, {{1, 1}, 0.3}), 0.0);
}

TEST(VLambda, RotatedField) {
  const auto sys = pure(SpectralVectorField::constant(0.0, 1.0));
  EXPECT_NEAR(v_lambda(sys, {{0, 0}, 0.0}), 0.0, 1e-15);
  EXPECT_NEAR(v2_lambda(sys, {{0, 0}, 0.0}), -1.0, 1e-15);
}

TEST(VLambda, PureThermostatIdentity) {
  Rng rng(4);
  const auto base = testkit::random_system(rng);
  const auto sys = pure(base.e(), base.metric().phi());
  for (int i = 0; i < 50; ++i) {
    const auto st = testkit::random_state(rng);
    const double l = lambda_eval(sys, st);
    EXPECT_NEAR(l * l + l * v2_lambda(sys, st), 0.0, 1e-14);
  }
}

TEST(VLambda, MatchesFiberFiniteDifference) {
  Rng rng(5);
  const auto sys = testkit::random_system(rng);
  const double h = 1e-4;
  for (int i = 0; i < 20; ++i) {
    const auto st = testkit::random_state(rng);
    auto lam = [&](double d) { return lambda_eval(sys, {st.x, st.theta + d}); };
    EXPECT_NEAR(v_lambda(sys, st), (lam(h) - lam(-h)) / (2 * h), 1e-7);
    EXPECT_NEAR(v2_lambda(sys, st), (lam(h) - 2 * lam(0) + lam(-h)) / (h * h), 1e-6);
    EXPECT_NEAR(v2_lambda(sys, st), -(lambda_eval(sys, st) - sys.f()(st.x)), 1e-14);
  }
}

TEST(HLambda, GeodesicIsZero) {
  EXPECT_EQ(h_lambda(ThermostatSystem::flat_geodesic(), {{1, 2}, 3}), 0.0);
  EXPECT_EQ(x_vlambda(ThermostatSystem::flat_geodesic(), {{1, 2}, 3}), 0.0);
}

TEST(HLambda, GradientFieldDivergence) {
  Rng rng(6);
  const auto sys = pure(SpectralVectorField(sin_x1(), {}));
  for (int i = 0; i < 20; ++i) {
    const auto st = testkit::random_state(rng);
    EXPECT_NEAR(h_lambda(sys, st) - x_vlambda(sys, st), std::cos(st.x.x1), 1e-14);
  }
}

TEST(HLambda, ConstantFieldFlat) {
  Rng rng(7);
  const auto sys = pure(SpectralVectorField::constant(0.4, -0.9));
  for (int i = 0; i < 10; ++i) {
    const auto st = testkit::random_state(rng);
    EXPECT_NEAR(h_lambda(sys, st), 0.0, 1e-15);
    EXPECT_NEAR(x_vlambda(sys, st), 0.0, 1e-15);
  }
}

TEST(HLambda, PureIdentityOnCurvedMetric) {
  Rng rng(8);
  const auto base = testkit::random_system(rng);
  const auto sys = pure(base.e(), base.metric().phi());
  for (int i = 0; i < 20; ++i) {
    const auto st = testkit::random_state(rng);
    EXPECT_NEAR(h_lambda(sys, st) - x_vlambda(sys, st), local_geometry(sys, st).divergence_e(), 1e-13);
  }
}

TEST(Evolve, StraightLine) {
  const auto traj = evolve(ThermostatSystem::flat_geodesic(), {{0, 0}, 0}, 1.0, 1e-10);
  const auto end = traj.state(1.0);
  EXPECT_NEAR(end.x.x1, 1.0, 1e-12);
  EXPECT_NEAR(end.x.x2, 0.0, 1e-12);
  EXPECT_NEAR(end.theta, 0.0, 1e-12);
}

TEST(Evolve, QuarterCircle) {
  const auto traj = evolve(ThermostatSystem::flat_magnetic(1.0), {{0, 0}, 0}, kPi / 2, 1e-11);
  const auto end = traj.state(kPi / 2);
  EXPECT_NEAR(end.x.x1, 1.0, 1e-9);
  EXPECT_NEAR(end.x.x2, 1.0, 1e-9);
  EXPECT_NEAR(end.theta, kPi / 2, 1e-9);
}

TEST(Evolve, TanhHeading) {
  const double c = 0.7;
  const auto traj = evolve(pure(SpectralVectorField::constant(0.0, c)), {{0, 0}, 0}, 10.0, 1e-11);
  for (double t : {0.5, 1.0, 3.0, 7.0, 10.0}) EXPECT_NEAR(std::sin(traj.state(t).theta), std::tanh(c * t), 1e-9);
}

TEST(Evolve, RejectsBadArguments) {
  EXPECT_THROW(evolve(ThermostatSystem::flat_geodesic(), {}, 0.0), std::invalid_argument);
  EXPECT_THROW(evolve(ThermostatSystem::flat_geodesic(), {}, 1.0, -1.0), std::invalid_argument);
}

TEST(Evolve, CsvColumns) {
  const auto traj = evolve(ThermostatSystem::flat_magnetic(1.0), {{0, 0}, 0}, 1.0, 1e-10);
  std::ostringstream os;
  traj.write_csv(os, 0.5);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "t,x1,x2,theta,lambda,unit_speed_residual");
  int rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  EXPECT_EQ(rows, 3);
}

TEST(ExpMap, IdentityAtZero) {
  const Point p = exp_map(ThermostatSystem::flat_magnetic(1.0), {1.2, 3.4}, 0.5, 0.0);
  EXPECT_EQ(p.x1, 1.2);
  EXPECT_EQ(p.x2, 3.4);
}

TEST(ExpMap, StraightLine) {
  const Point p = exp_map(ThermostatSystem::flat_geodesic(), {0, 0}, 0.0, kPi);
  EXPECT_NEAR(p.x1, kPi, 1e-12);
  EXPECT_NEAR(p.x2, 0.0, 1e-12);
}

TEST(ExpMap, ClosedCircle) {
  const Point p = exp_map(ThermostatSystem::flat_magnetic(1.0), {0, 0}, 0.0, kTwoPi, 1e-12);
  EXPECT_NEAR(p.x1, 0.0, 1e-9);
  EXPECT_NEAR(p.x2, 0.0, 1e-9);
}

TEST(ExpMap, RejectsNegativeTime) {
  EXPECT_THROW(exp_map(ThermostatSystem::flat_geodesic(), {}, 0.0, -1.0), std::invalid_argument);
}

TEST(DynamicsProperty, UnitSpeedConservation) {
  Rng rng(10);
  const double tol = 1e-9;
  for (int i = 0; i < 5; ++i) {
    const auto traj = evolve(testkit::random_system(rng), testkit::random_state(rng), 100.0, tol);
    double worst = 0.0;
    for (double t : traj.sample_times()) worst = std::max(worst, traj.unit_speed_residual(t));
    EXPECT_LE(worst, 10 * tol);
  }
}

TEST(DynamicsProperty, EquationResidual) {
  Rng rng(11);
  const double tol = 1e-9;
  for (int i = 0; i < 5; ++i) {
    const auto traj = evolve(testkit::random_system(rng), testkit::random_state(rng), 20.0, tol);
    const auto times = traj.sample_times();
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < times.size(); ++k) worst = std::max(worst, traj.equation_residual(times[k]));
    EXPECT_LE(worst, 1e2 * tol);
  }
}

TEST(DynamicsProperty, FlatHeadingSolvesThetaDotEqualsLambda) {
  Rng rng(12);
  const auto base = testkit::random_system(rng);
  const ThermostatSystem sys(ConformalMetric::flat(), base.f(), base.e());
  const PhaseState start = testkit::random_state(rng);
  const auto traj = evolve(sys, start, 10.0, 1e-12);
  // Integrate the heading alone along the stored positions.
  auto rhs = [&](double t, const StateVec<1>& y, StateVec<1>& dy) {
    dy[0] = lambda_eval(sys, {traj.state(t).x, y[0]});
  };
  const auto res = integrate_dopri5<1>(rhs, 0.0, StateVec<1>{start.theta}, 10.0, integrator_options(1e-12),
                                       [](const DenseStep<1>&) { return true; });
  EXPECT_NEAR(res.y_end[0], traj.state(10.0).theta, 1e-8);
}

TEST(DynamicsProperty, PureThermostatReversibility) {
  Rng rng(13);
  const double tol = 1e-10;
  for (int i = 0; i < 5; ++i) {
    const auto base = testkit::random_system(rng);
    const auto sys = pure(base.e(), base.metric().phi());
    const auto st = testkit::random_state(rng);
    const double t = 3.0;
    const auto fwd = flow_to(sys, st.flipped(), t, integrator_options(tol)).flipped();
    const auto back = evolve_span(sys, st, t, 0.0, integrator_options(tol)).state(-t);
    EXPECT_NEAR(fwd.x.x1, back.x.x1, 10 * tol);
    EXPECT_NEAR(fwd.x.x2, back.x.x2, 10 * tol);
    EXPECT_LE(angle_gap(fwd.theta, back.theta), 10 * tol);
  }
}

TEST(DynamicsProperty, HorizontalDerivativeMatchesRotatedGeodesicFlow) {
  Rng rng(14);
  for (int i = 0; i < 10; ++i) {
    const auto sys = testkit::random_system(rng);
    const auto geo = sys.geodesic_part();
    const auto st = testkit::random_state(rng);
    const double h = 1e-4;
    auto lam = [&](double s) {
      // R^{-1} g_s R with R the rotation v -> iv.
      const PhaseState moved = flow_to(geo, {st.x, st.theta + kPi / 2}, s, integrator_options(1e-13));
      return lambda_eval(sys, {moved.x, moved.theta - kPi / 2});
    };
    auto flow_back = [&](double s) {
      const auto tr = evolve_span(geo, {st.x, st.theta + kPi / 2}, h, 0.0, integrator_options(1e-13)).state(-s);
      return lambda_eval(sys, {tr.x, tr.theta - kPi / 2});
    };
    const double fd = (lam(h) - flow_back(h)) / (2 * h);
    EXPECT_NEAR(h_lambda(sys, st), fd, 1e-5);
  }
}

TEST(PhaseState, FlipAndReduce) {
  const PhaseState s{{7.0, -1.0}, 9.0};
  const auto r = s.reduced();
  EXPECT_GE(r.x.x1, 0.0);
  EXPECT_LT(r.x.x1, kTwoPi);
  EXPECT_GE(r.x.x2, 0.0);
  EXPECT_LT(r.theta, kTwoPi);
  EXPECT_NEAR(s.flipped().theta, 9.0 + kPi, 1e-15);
}

TEST(ThermostatSystem, DerivedFlags) {
  EXPECT_TRUE(ThermostatSystem::flat_geodesic().is_pure());
  EXPECT_TRUE(ThermostatSystem::flat_geodesic().is_magnetic());
  EXPECT_FALSE(ThermostatSystem::flat_magnetic(1.0).is_pure());
  EXPECT_FALSE(pure(SpectralVectorField::constant(1, 0)).is_magnetic());
}
