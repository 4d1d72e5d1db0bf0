// Walks through the main pieces on small systems: circles of the constant
// magnetic field, the Hopf solution of a Gaussian thermostat, the gauge that
// removes a gradient field, and the rigidity verdicts.

#include <cstdio>

#include "thermo/analysis.hpp"

using namespace thermo;

int main() {
  const auto magnetic = ThermostatSystem::flat_magnetic(1.0);
  const PhaseState start{{0.0, 0.0}, 0.0};
  const auto traj = evolve(magnetic, start, kTwoPi, 1e-12);
  const auto end = traj.state(kTwoPi);
  std::printf("circle: returns to (%.3g, %.3g), heading %.6f\n", end.x.x1, end.x.x2, end.theta);
  const auto conj = first_conjugate_time(magnetic, start, 5.0);
  std::printf("circle: first conjugate time %.12f (pi = %.12f)\n", conj.first_time.value_or(-1.0), kPi);

  // e = (cos x2, 0): divergence free, so r = V(lambda).
  const ThermostatSystem shear(ConformalMetric::flat(), SpectralScalarField{},
                               SpectralVectorField(SpectralScalarField::from_terms(1, {{0, 1, 1.0, 0.0}}),
                                                   SpectralScalarField{}));
  HopfOptions ho;
  ho.window = 2.0;
  auto prof = hopf_profile(shear, {{0.3, 1.1}, 2.0}, ho);
  double gap = 0.0;
  for (std::size_t i = 0; i < prof.size(); ++i)
    if (prof.valid(i)) gap = std::max(gap, std::abs(prof.r()[i] - prof.v_lambda()[i]));
  prof.attach_bounds(comparison_bounds(shear));
  std::printf("shear: sup |r - V(lambda)| = %.2e, A = %.6f, P+ = %.6f\n", gap, prof.bounds()->A,
              prof.bounds()->p_plus);

  // e = (sin x1, 0) = grad(-cos x1).
  const ThermostatSystem gradient(ConformalMetric::flat(), SpectralScalarField{},
                                  SpectralVectorField(SpectralScalarField::from_terms(1, {{1, 0, 1.0, -kPi / 2}}),
                                                      SpectralScalarField{}));
  const auto g = solve_gauge(gradient);
  std::printf("gauge: U(0,0) = %.12f, sup|e1| = %.2e, flatness of g1 = %.3f\n", g.U()({0.0, 0.0}),
              std::max(g.transformed().e().c1().grid_sup_norm(64), g.transformed().e().c2().grid_sup_norm(64)),
              g.flatness_residual());

  for (const auto* s : {&shear, &magnetic, &gradient}) {
    const auto rep = rigidity_report(*s);
    std::printf("rigidity: %-16s f=%.3g flat=%.3g div=%.3g\n", rep.verdict().c_str(), rep.f_norm,
                rep.flatness_residual, rep.divergence_residual);
  }
  return 0;
}
