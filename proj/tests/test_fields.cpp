#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "support.hpp"
#include "thermo/fields.hpp"

using namespace thermo;
using thermo::testkit::Rng;

namespace {

SpectralScalarField cos_x1() { return SpectralScalarField::from_terms(1, {{1, 0, 1.0, 0.0}}); }
SpectralScalarField sin_x1() { return SpectralScalarField::from_terms(1, {{1, 0, 1.0, -kPi / 2}}); }
SpectralScalarField cos_x2() { return SpectralScalarField::from_terms(1, {{0, 1, 1.0, 0.0}}); }
SpectralScalarField sin_x2() { return SpectralScalarField::from_terms(1, {{0, 1, 1.0, -kPi / 2}}); }

// Trapezoid rule on an n x n grid; exact for trig polynomials of degree < n.
double torus_integral(int n, const std::function<double(Point)>& fn) {
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += fn({kTwoPi * i / n, kTwoPi * j / n});
  return s * (kTwoPi / n) * (kTwoPi / n);
}

Point random_point(Rng& rng) { return {testkit::uniform(rng, 0.0, kTwoPi), testkit::uniform(rng, 0.0, kTwoPi)}; }

}  // namespace

TEST(Evaluate, ZeroField) {
  EXPECT_EQ(evaluate(SpectralScalarField{}, {1.3, -0.4}), 0.0);
}

TEST(Evaluate, CosineAtOrigin) {
  for (double x2 : {0.0, 1.0, 4.5}) EXPECT_NEAR(evaluate(cos_x1(), {0.0, x2}), 1.0, 1e-15);
}

TEST(Evaluate, CosPlusSin) {
  EXPECT_NEAR(evaluate(cos_x1() + sin_x2(), {kPi / 2, kPi / 2}), 1.0, 1e-15);
}

TEST(Evaluate, ConstantAndCoefficients) {
  const auto c = SpectralScalarField::constant(2.5, 3);
  EXPECT_EQ(c.bandwidth(), 3);
  EXPECT_NEAR(c({0.7, 0.1}), 2.5, 1e-15);
  EXPECT_TRUE(c.is_constant());
  const auto f = cos_x1();
  EXPECT_NEAR(f.coefficient(1, 0).real(), 0.5, 1e-15);
  EXPECT_NEAR(f.coefficient(-1, 0).real(), 0.5, 1e-15);
}

TEST(Evaluate, RejectsOutOfBandTerm) {
  EXPECT_ANY_THROW(SpectralScalarField::from_terms(1, {{2, 0, 1.0, 0.0}}));
}

TEST(Fields, HermitianSymmetry) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto f = testkit::random_field(rng, 4, 6, 1.0, true);
    for (int k1 = -4; k1 <= 4; ++k1)
      for (int k2 = -4; k2 <= 4; ++k2) {
        const auto a = f.coefficient(k1, k2), b = f.coefficient(-k1, -k2);
        EXPECT_NEAR(a.real(), b.real(), 1e-15);
        EXPECT_NEAR(a.imag(), -b.imag(), 1e-15);
      }
  }
}

TEST(Fields, TermsRoundTrip) {
  Rng rng(2);
  const auto f = testkit::random_field(rng, 3, 5, 1.0, true);
  const auto g = SpectralScalarField::from_terms(3, f.terms());
  for (int i = 0; i < 20; ++i) {
    const Point x = random_point(rng);
    EXPECT_NEAR(f(x), g(x), 1e-14);
  }
}

TEST(Gradient, EuclideanWhenFlat) {
  const Vec2 g = gradient(cos_x1(), ConformalMetric::flat(), {kPi / 2, 0.0});
  EXPECT_NEAR(g.c1, -1.0, 1e-15);
  EXPECT_NEAR(g.c2, 0.0, 1e-15);
}

TEST(Gradient, ScaledByInverseMetric) {
  const double c = 0.4;
  const Vec2 g = gradient(cos_x1(), ConformalMetric::flat(c), {kPi / 2, 0.0});
  EXPECT_NEAR(g.c1, -std::exp(-2.0 * c), 1e-15);
  EXPECT_NEAR(g.c2, 0.0, 1e-15);
}

TEST(Gradient, ConstantFieldHasZeroGradient) {
  Rng rng(3);
  const ConformalMetric m(testkit::random_field(rng, 2, 3, 0.3));
  for (int i = 0; i < 10; ++i) {
    const Vec2 g = gradient(SpectralScalarField::constant(1.7), m, random_point(rng));
    EXPECT_EQ(g.c1, 0.0);
    EXPECT_EQ(g.c2, 0.0);
  }
}

TEST(Divergence, SineComponent) {
  EXPECT_NEAR(divergence(SpectralVectorField(sin_x1(), {}), ConformalMetric::flat(), {0.0, 0.0}), 1.0, 1e-15);
}

TEST(Divergence, ShearIsFree) {
  Rng rng(4);
  for (int i = 0; i < 10; ++i)
    EXPECT_NEAR(divergence(SpectralVectorField(cos_x2(), {}), ConformalMetric::flat(), random_point(rng)), 0.0, 1e-15);
}

TEST(Divergence, ConstantIsFree) {
  EXPECT_NEAR(divergence(SpectralVectorField::constant(0.3, -1.2), ConformalMetric::flat(), {2.0, 1.0}), 0.0, 1e-15);
}

TEST(GaussCurvature, FlatMetrics) {
  EXPECT_EQ(gauss_curvature(ConformalMetric::flat(), {1.0, 2.0}), 0.0);
  EXPECT_NEAR(gauss_curvature(ConformalMetric::flat(0.8), {0.3, 5.0}), 0.0, 1e-15);
}

TEST(GaussCurvature, CosineFactor) {
  const ConformalMetric m(0.1 * cos_x1());
  EXPECT_NEAR(gauss_curvature(m, {0.0, 0.0}), 0.1 * std::exp(-0.2), 1e-15);
  EXPECT_NEAR(gauss_curvature(m, {0.0, 0.0}), 0.0818731, 1e-7);
}

TEST(GaussCurvature, MatchesFiniteDifferenceLaplacian) {
  Rng rng(5);
  const ConformalMetric m(testkit::random_field(rng, 3, 5, 0.3));
  const double h = 1e-3;
  for (int i = 0; i < 20; ++i) {
    const Point x = random_point(rng);
    const auto& p = m.phi();
    const double lap = (p({x.x1 + h, x.x2}) + p({x.x1 - h, x.x2}) + p({x.x1, x.x2 + h}) + p({x.x1, x.x2 - h}) -
                        4.0 * p(x)) / (h * h);
    EXPECT_NEAR(gauss_curvature(m, x), -std::exp(-2.0 * p(x)) * lap, 1e-5);
  }
}

TEST(CovariantDerivative, ConstantFieldFlat) {
  const Vec2 d = covariant_derivative(SpectralVectorField::constant(1.0, 2.0), {0.3, 0.7}, ConformalMetric::flat(),
                                      {1.0, 1.0});
  EXPECT_NEAR(d.c1, 0.0, 1e-15);
  EXPECT_NEAR(d.c2, 0.0, 1e-15);
}

TEST(CovariantDerivative, DirectionalDerivativeFlat) {
  const Vec2 d = covariant_derivative(SpectralVectorField(sin_x1(), {}), {1.0, 0.0}, ConformalMetric::flat(), {0, 0});
  EXPECT_NEAR(d.c1, 1.0, 1e-15);
  EXPECT_NEAR(d.c2, 0.0, 1e-15);
}

TEST(CovariantDerivative, ZeroField) {
  Rng rng(6);
  const ConformalMetric m(testkit::random_field(rng, 2, 3, 0.3));
  const Vec2 d = covariant_derivative(SpectralVectorField{}, {0.5, -0.2}, m, {0.4, 2.2});
  EXPECT_EQ(d.c1, 0.0);
  EXPECT_EQ(d.c2, 0.0);
}

TEST(CovariantDerivative, IsMetricCompatible) {
  // w <g(v, v)> = 2 g(D_w v, v).
  Rng rng(7);
  const ConformalMetric m(testkit::random_field(rng, 2, 3, 0.3));
  const SpectralVectorField v(testkit::random_field(rng, 2, 3, 1.0), testkit::random_field(rng, 2, 3, 1.0));
  const double h = 1e-5;
  for (int i = 0; i < 20; ++i) {
    const Point x = random_point(rng);
    const Vec2 w{testkit::uniform(rng, -1, 1), testkit::uniform(rng, -1, 1)};
    auto sq = [&](double s) {
      const Point y{x.x1 + s * w.c1, x.x2 + s * w.c2};
      return m.inner(y, v(y), v(y));
    };
    const double lhs = (sq(h) - sq(-h)) / (2.0 * h);
    EXPECT_NEAR(lhs, 2.0 * m.inner(x, covariant_derivative(v, w, m, x), v(x)), 1e-7);
  }
}

TEST(FieldsProperty, SpectralDerivativeMatchesFiniteDifference) {
  Rng rng(8);
  const double h = 1e-4;
  for (int trial = 0; trial < 5; ++trial) {
    const auto f = testkit::random_field(rng, 4, 8, 1.0, true);
    const auto d1 = f.derivative(1), d2 = f.derivative(2);
    for (int i = 0; i < 100; ++i) {
      const Point x = random_point(rng);
      EXPECT_NEAR(d1(x), (f({x.x1 + h, x.x2}) - f({x.x1 - h, x.x2})) / (2 * h), 1e-6);
      EXPECT_NEAR(d2(x), (f({x.x1, x.x2 + h}) - f({x.x1, x.x2 - h})) / (2 * h), 1e-6);
      const Jet j = f.jet(x);
      EXPECT_NEAR(j.d1, d1(x), 1e-12);
      EXPECT_NEAR(j.d2, d2(x), 1e-12);
    }
  }
}

TEST(FieldsProperty, DivergenceIntegratesToZero) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const ConformalMetric m(testkit::random_field(rng, 2, 3, 0.3));
    const SpectralVectorField v(testkit::random_field(rng, 3, 4, 1.0, true), testkit::random_field(rng, 3, 4, 1.0, true));
    // e^{2 phi} is not band limited; 64 points resolve it to rounding.
    const double s = torus_integral(64, [&](Point x) { return m.scale(x) * divergence(v, m, x); });
    EXPECT_LT(std::abs(s), 1e-10);
  }
}

TEST(FieldsProperty, GaussBonnet) {
  Rng rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const ConformalMetric m(testkit::random_field(rng, 3, 5, 0.4));
    const double s = torus_integral(64, [&](Point x) { return m.scale(x) * gauss_curvature(m, x); });
    EXPECT_LT(std::abs(s), 1e-10);
  }
}

TEST(FieldsProperty, GradientDivergenceAdjoint) {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const ConformalMetric m(testkit::random_field(rng, 2, 3, 0.3));
    const auto u = testkit::random_field(rng, 3, 4, 1.0, true);
    const SpectralVectorField v(testkit::random_field(rng, 3, 4, 1.0), testkit::random_field(rng, 3, 4, 1.0));
    const double lhs =
        torus_integral(64, [&](Point x) { return m.scale(x) * m.inner(x, gradient(u, m, x), v(x)); });
    const double rhs = -torus_integral(64, [&](Point x) { return m.scale(x) * u(x) * divergence(v, m, x); });
    EXPECT_NEAR(lhs, rhs, 1e-8);
  }
}

TEST(ConformalMetric, FlatnessIndicator) {
  EXPECT_TRUE(ConformalMetric::flat(0.3).is_flat());
  EXPECT_FALSE(ConformalMetric(0.1 * cos_x1()).is_flat());
  const ConformalMetric m(0.2 * cos_x1());
  const Point x{0.5, 0.5};
  EXPECT_NEAR(m.norm(x, {3.0, 4.0}), 5.0 * std::exp(0.2 * std::cos(0.5)), 1e-14);
  EXPECT_GT(m.scale(x), 0.0);
}
