#ifndef THERMO_TESTS_SUPPORT_HPP
#define THERMO_TESTS_SUPPORT_HPP

// Random in-band systems shared by the unit tests and the acceptance suite.

#include <cmath>
#include <random>
#include <vector>

#include "thermo/fields.hpp"
#include "thermo/dynamics.hpp"

namespace thermo::testkit {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// `count` random terms with |k_i| <= n, nonzero k, amplitudes up to `amp`.
inline SpectralScalarField random_field(Rng& rng, int n, int count, double amp, bool with_mean = false) {
  std::vector<FourierTerm> terms;
  std::uniform_int_distribution<int> k(-n, n);
  for (int i = 0; i < count; ++i) {
    int k1 = 0, k2 = 0;
    while (k1 == 0 && k2 == 0) {
      k1 = k(rng);
      k2 = k(rng);
    }
    terms.push_back({k1, k2, uniform(rng, 0.0, amp), uniform(rng, 0.0, 2.0 * std::acos(-1.0))});
  }
  if (with_mean) terms.push_back({0, 0, uniform(rng, -amp, amp), 0.0});
  return SpectralScalarField::from_terms(n, terms);
}

/// General system: non-flat phi, f and e, all of bandwidth n.
inline ThermostatSystem random_system(Rng& rng, int n = 2, double phi_amp = 0.15, double f_amp = 0.3,
                                      double e_amp = 0.4) {
  return ThermostatSystem(ConformalMetric(random_field(rng, n, 3, phi_amp)), random_field(rng, n, 2, f_amp, true),
                          SpectralVectorField(random_field(rng, n, 3, e_amp, true), random_field(rng, n, 3, e_amp, true)));
}

/// phi = c constant, f = 0, e = (d2 psi, -d1 psi) + constant vector, scaled so
/// that sup |e|_g on a 64 grid equals `e_norm`. Such e is divergence free.
inline ThermostatSystem random_divergence_free(Rng& rng, double e_norm, int n = 2) {
  const double c = uniform(rng, -0.5, 0.5);
  const SpectralScalarField psi = random_field(rng, n, 3, 1.0);
  const double a1 = uniform(rng, -1.0, 1.0), a2 = uniform(rng, -1.0, 1.0);
  SpectralScalarField e1 = psi.derivative(2) + SpectralScalarField::constant(a1);
  SpectralScalarField e2 = -1.0 * psi.derivative(1) + SpectralScalarField::constant(a2);
  double sup = 0.0;
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) {
      const Point x{kTwoPi * i / 64, kTwoPi * j / 64};
      sup = std::max(sup, std::exp(c) * std::hypot(e1(x), e2(x)));
    }
  const double s = e_norm / sup;
  return ThermostatSystem(ConformalMetric(SpectralScalarField::constant(c)), SpectralScalarField{},
                          SpectralVectorField(s * e1, s * e2));
}

inline PhaseState random_state(Rng& rng) {
  return {{uniform(rng, 0.0, kTwoPi), uniform(rng, 0.0, kTwoPi)}, uniform(rng, 0.0, kTwoPi)};
}

}  // namespace thermo::testkit

#endif  // THERMO_TESTS_SUPPORT_HPP
