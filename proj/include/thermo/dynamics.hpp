#ifndef THERMO_DYNAMICS_HPP
#define THERMO_DYNAMICS_HPP

// Thermostat flow on the unit circle bundle of (T^2, g). A unit vector at x is
// v = exp(-phi(x)) (cos theta, sin theta); the flow D_t gdot = lambda i gdot in
// these coordinates reads
//   x1' = exp(-phi) cos theta
//   x2' = exp(-phi) sin theta
//   theta' = lambda + exp(-phi) (-phi_1 sin theta + phi_2 cos theta)
// (the geodesic curvature of a unit speed curve equals lambda).

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "thermo/fields.hpp"
#include "thermo/ode.hpp"

namespace thermo {

/// (x1, x2, theta). Positions and angle are kept unwrapped; use reduced() for
/// the representative in [0, 2 pi)^3.
struct PhaseState {
  Point x;
  double theta = 0.0;

  PhaseState reduced() const {
    auto wrap = [](double a) {
      double r = std::fmod(a, kTwoPi);
      return r < 0.0 ? r + kTwoPi : r;
    };
    return {{wrap(x.x1), wrap(x.x2)}, wrap(theta)};
  }

  /// (x, v) -> (x, -v)
  PhaseState flipped() const { return {x, theta + kPi}; }
};

/// Everything about the system that depends on position only.
struct SpatialJets {
  Jet phi;
  Jet f;
  Jet e1;
  Jet e2;
};

/// The triple (g, f, e). Immutable.
class ThermostatSystem {
 public:
  ThermostatSystem() = default;
  ThermostatSystem(ConformalMetric metric, SpectralScalarField f, SpectralVectorField e)
      : metric_(std::move(metric)), f_(std::move(f)), e_(std::move(e)) {}

  static ThermostatSystem flat_geodesic() { return {}; }
  static ThermostatSystem flat_magnetic(double c) {
    return {ConformalMetric::flat(), SpectralScalarField::constant(c), SpectralVectorField{}};
  }

  const ConformalMetric& metric() const { return metric_; }
  const SpectralScalarField& f() const { return f_; }
  const SpectralVectorField& e() const { return e_; }

  /// f == 0: Gaussian (pure) thermostat.
  bool is_pure() const { return f_.is_zero(); }
  /// e == 0: magnetic flow.
  bool is_magnetic() const { return e_.is_zero(); }

  SpatialJets jets(Point x) const {
    return {metric_.phi().jet(x), f_.jet(x), e_.c1().jet(x), e_.c2().jet(x)};
  }

  /// Geodesic flow of the same metric.
  ThermostatSystem geodesic_part() const { return {metric_, SpectralScalarField{}, SpectralVectorField{}}; }

 private:
  ConformalMetric metric_;
  SpectralScalarField f_;
  SpectralVectorField e_;
};

/// lambda and its derivatives along V (fiber), H (horizontal, direction iv)
/// and X (geodesic) at one phase point.
class LocalGeometry {
 public:
  LocalGeometry(const SpatialJets& j, double theta)
      : j_(j), c_(std::cos(theta)), s_(std::sin(theta)), ep_(std::exp(j.phi.value)), em_(1.0 / ep_) {}

  Vec2 velocity() const { return {em_ * c_, em_ * s_}; }
  Vec2 normal() const { return {-em_ * s_, em_ * c_}; }

  /// f + <e, iv>
  double lambda() const { return j_.f.value + ep_ * (-j_.e1.value * s_ + j_.e2.value * c_); }
  /// V(lambda) = -<e, v>
  double v_lambda() const { return -ep_ * (j_.e1.value * c_ + j_.e2.value * s_); }
  /// V^2(lambda) = -<e, iv> = -(lambda - f)
  double v2_lambda() const { return ep_ * (j_.e1.value * s_ - j_.e2.value * c_); }

  /// H(lambda) = df(iv) + <nabla_{iv} e, iv>
  double h_lambda() const {
    const Vec2 n = normal();
    const Vec2 de = metric_covariant_derivative(j_.e1, j_.e2, n, j_.phi);
    return j_.f.d1 * n.c1 + j_.f.d2 * n.c2 + ep_ * ep_ * de.euclidean_dot(n);
  }

  /// X(V(lambda)) = -<nabla_v e, v>
  double x_v_lambda() const {
    const Vec2 v = velocity();
    const Vec2 de = metric_covariant_derivative(j_.e1, j_.e2, v, j_.phi);
    return -ep_ * ep_ * de.euclidean_dot(v);
  }

  double curvature() const { return conformal_curvature(j_.phi); }

  /// K - H(lambda) + lambda^2
  double k_lambda() const {
    const double l = lambda();
    return curvature() - h_lambda() + l * l;
  }

  double theta_dot() const { return lambda() + em_ * (-j_.phi.d1 * s_ + j_.phi.d2 * c_); }

  /// div_g e at the base point.
  double divergence_e() const { return metric_divergence(j_.e1, j_.e2, j_.phi); }

  const SpatialJets& jets() const { return j_; }
  double metric_scale() const { return ep_ * ep_; }

 private:
  SpatialJets j_;
  double c_, s_, ep_, em_;
};

inline LocalGeometry local_geometry(const ThermostatSystem& sys, const PhaseState& st) {
  return {sys.jets(st.x), st.theta};
}

inline double lambda_eval(const ThermostatSystem& sys, const PhaseState& st) {
  return local_geometry(sys, st).lambda();
}
inline double v_lambda(const ThermostatSystem& sys, const PhaseState& st) {
  return local_geometry(sys, st).v_lambda();
}
inline double v2_lambda(const ThermostatSystem& sys, const PhaseState& st) {
  return local_geometry(sys, st).v2_lambda();
}
inline double h_lambda(const ThermostatSystem& sys, const PhaseState& st) {
  return local_geometry(sys, st).h_lambda();
}
inline double x_vlambda(const ThermostatSystem& sys, const PhaseState& st) {
  return local_geometry(sys, st).x_v_lambda();
}

/// Right-hand side of the flow in (x1, x2, theta).
inline StateVec<3> flow_rhs(const ThermostatSystem& sys, const StateVec<3>& y) {
  const LocalGeometry g(sys.jets({y[0], y[1]}), y[2]);
  const Vec2 v = g.velocity();
  return {v.c1, v.c2, g.theta_dot()};
}

inline StateVec<3> to_vec(const PhaseState& s) { return {s.x.x1, s.x.x2, s.theta}; }
inline PhaseState to_state(const StateVec<3>& y) { return {{y[0], y[1]}, y[2]}; }

inline IntegratorOptions integrator_options(double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  IntegratorOptions o;
  o.rtol = tol;
  o.atol = tol;
  return o;
}

/// || D_t gdot - lambda i gdot ||_g at parameter c for a curve given by its
/// phase states. The velocity is the unit tangent e^{-phi}(cos theta, sin theta)
/// read off each state, the acceleration its fourth-order central difference
/// with step dt, and the Christoffel correction is added explicitly.
template <class StateAt>
double covariant_residual(const ThermostatSystem& sys, StateAt&& state_at, double c, double dt) {
  auto tangent = [&](double s) {
    const PhaseState st = state_at(s);
    const double em = std::exp(-sys.metric().phi()(st.x));
    return Vec2{em * std::cos(st.theta), em * std::sin(st.theta)};
  };
  const Vec2 acc = (1.0 / (12.0 * dt)) *
                   (tangent(c - 2.0 * dt) - 8.0 * tangent(c - dt) + 8.0 * tangent(c + dt) - tangent(c + 2.0 * dt));
  const PhaseState st = state_at(c);
  const auto g = local_geometry(sys, st);
  const Vec2 u = g.velocity();
  const Jet& p = g.jets().phi;
  const double g1 = p.d1 * u.c1 * u.c1 + 2.0 * p.d2 * u.c1 * u.c2 - p.d1 * u.c2 * u.c2;
  const double g2 = -p.d2 * u.c1 * u.c1 + 2.0 * p.d1 * u.c1 * u.c2 + p.d2 * u.c2 * u.c2;
  const Vec2 cov{acc.c1 + g1, acc.c2 + g2};
  return sys.metric().norm(st.x, cov - g.lambda() * g.normal());
}

/// A flow segment with dense output on [t_min, t_max] (t = g-arclength).
class Trajectory {
 public:
  Trajectory(std::shared_ptr<const ThermostatSystem> sys, PhaseState initial, DenseTrack<3> track,
             double tol)
      : sys_(std::move(sys)),
        initial_(initial),
        track_(std::make_shared<const DenseTrack<3>>(std::move(track))),
        tol_(tol) {}

  const ThermostatSystem& system() const { return *sys_; }
  std::shared_ptr<const ThermostatSystem> system_ptr() const { return sys_; }
  const PhaseState& initial() const { return initial_; }
  double tolerance() const { return tol_; }
  double t_min() const { return track_->t_min(); }
  double t_max() const { return track_->t_max(); }
  const DenseTrack<3>& track() const { return *track_; }

  PhaseState state(double t) const { return to_state(track_->value(t)); }

  LocalGeometry geometry(double t) const { return local_geometry(*sys_, state(t)); }

  /// Step boundaries: strictly increasing sample times.
  std::vector<double> sample_times() const {
    std::vector<double> ts;
    ts.reserve(track_->steps().size() + 1);
    for (const auto& s : track_->steps()) ts.push_back(s.t_begin());
    ts.push_back(track_->t_max());
    return ts;
  }

  /// Velocity of the dense output itself (not of the vector field).
  Vec2 velocity(double t) const {
    const auto d = track_->derivative(t);
    return {d[0], d[1]};
  }

  /// | |gdot|_g - 1 | using the derivative of the dense output.
  double unit_speed_residual(double t) const {
    const auto st = state(t);
    return std::abs(sys_->metric().norm(st.x, velocity(t)) - 1.0);
  }

  /// || D_t gdot - lambda i gdot ||_g at t (see covariant_residual). Within
  /// 2 dt of either end the evaluation point is moved inward so the stencil
  /// stays on the span.
  double equation_residual(double t, double dt = 1e-5) const {
    const double c = std::clamp(t, t_min() + 2.0 * dt, t_max() - 2.0 * dt);
    return covariant_residual(*sys_, [this](double s) { return state(s); }, c, dt);
  }

  /// CSV columns t, x1, x2, theta, lambda, unit_speed_residual on a uniform
  /// grid of spacing dt (the last row is t_max). Positions are the lift to R^2.
  void write_csv(std::ostream& os, double dt) const {
    if (!(dt > 0.0)) throw std::invalid_argument("sample spacing must be positive");
    os << "t,x1,x2,theta,lambda,unit_speed_residual\n";
    os << std::setprecision(17);
    const long n = static_cast<long>(std::ceil((t_max() - t_min()) / dt - 1e-9));
    for (long i = 0; i <= n; ++i) {
      const double t = i == n ? t_max() : t_min() + static_cast<double>(i) * dt;
      const auto st = state(t);
      os << t << ',' << st.x.x1 << ',' << st.x.x2 << ',' << st.theta << ','
         << lambda_eval(*sys_, st) << ',' << unit_speed_residual(t) << '\n';
    }
  }

 private:
  std::shared_ptr<const ThermostatSystem> sys_;
  PhaseState initial_;
  std::shared_ptr<const DenseTrack<3>> track_;  // shared: copies are cheap
  double tol_;
};

/// Integrates the flow over [-t_back, t_forward] starting from `initial` at t = 0.
inline Trajectory evolve_span(const ThermostatSystem& system, const PhaseState& initial, double t_back,
                              double t_forward, const IntegratorOptions& opt) {
  if (t_back < 0.0 || t_forward < 0.0 || t_back + t_forward <= 0.0)
    throw std::invalid_argument("trajectory span must be positive");
  auto sys = std::make_shared<const ThermostatSystem>(system);
  auto rhs = [&s = *sys](double, const StateVec<3>& y, StateVec<3>& dy) { dy = flow_rhs(s, y); };
  DenseTrack<3> track;
  if (t_forward > 0.0) track = integrate_dense<3>(rhs, 0.0, to_vec(initial), t_forward, opt);
  if (t_back > 0.0) {
    auto back = integrate_dense<3>(rhs, 0.0, to_vec(initial), -t_back, opt);
    if (track.empty())
      track = std::move(back);
    else
      track.merge(back);
  }
  return Trajectory(std::move(sys), initial, std::move(track), opt.rtol);
}

/// Flow segment on [0, T].
inline Trajectory evolve(const ThermostatSystem& system, const PhaseState& initial, double T,
                         double tol = 1e-9) {
  if (!(T > 0.0)) throw std::invalid_argument("duration must be positive");
  return evolve_span(system, initial, 0.0, T, integrator_options(tol));
}

/// Phase point at time t (either sign) without storing dense output.
inline PhaseState flow_to(const ThermostatSystem& system, const PhaseState& initial, double t,
                          const IntegratorOptions& opt) {
  if (t == 0.0) return initial;
  auto rhs = [&system](double, const StateVec<3>& y, StateVec<3>& dy) { dy = flow_rhs(system, y); };
  const auto res = integrate_dopri5<3>(rhs, 0.0, to_vec(initial), t, opt, [](const DenseStep<3>&) { return true; });
  return to_state(res.y_end);
}

/// pi(phi_t(x, v)) as a point of the universal cover R^2; the identity at t = 0.
inline Point exp_map(const ThermostatSystem& system, Point x, double theta, double t, double tol = 1e-9) {
  if (t < 0.0) throw std::invalid_argument("exp_map requires t >= 0");
  return flow_to(system, {x, theta}, t, integrator_options(tol)).x;
}

}  // namespace thermo

#endif  // THERMO_DYNAMICS_HPP
