#ifndef THERMO_JACOBI_HPP
#define THERMO_JACOBI_HPP

// Jacobi fields along thermostat trajectories. A Jacobi field is
// J = x gdot + y i gdot with
//   x' = lambda y
//   y'' - V(lambda) y' + K_lambda y = 0,   K_lambda = K - H(lambda) + lambda^2.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "thermo/dynamics.hpp"

namespace thermo {

inline double k_lambda(const ThermostatSystem& sys, const PhaseState& st) {
  return local_geometry(sys, st).k_lambda();
}

/// A sign change of y bracketed by [t_lo, t_hi] and refined to `time`.
struct JacobiZero {
  double time = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  double y_lo = 0.0;
  double y_hi = 0.0;
};

/// |y| stayed below the zero threshold together with y' - the solution cannot
/// be told apart from the trivial one there.
class DegenerateRootError : public std::runtime_error {
 public:
  DegenerateRootError(const std::string& what, double t) : std::runtime_error(what), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

namespace detail {

inline constexpr double kZeroThreshold = 1e-12;

/// Tracks sign changes of component `Idx` across accepted steps and refines
/// each bracket by bisection on the step's dense output.
template <std::size_t D, std::size_t Idx>
class ZeroScanner {
 public:
  ZeroScanner(double t_start, double y_start, double root_tol) : root_tol_(root_tol) {
    last_sign_ = sign(y_start);
    t_start_ = t_start;
  }

  void observe(const DenseStep<D>& step) {
    const double t_a = step.t0;
    const double t_b = step.t0 + step.h;
    const auto end = step.value(t_b);
    const double y_b = end[Idx];
    const double yd_b = end[Idx + 1];
    if (std::abs(y_b) < kZeroThreshold && std::abs(yd_b) < kZeroThreshold)
      throw DegenerateRootError("Jacobi solution indistinguishable from zero near t = " + std::to_string(t_b), t_b);
    const int s_b = sign(y_b);
    if (last_sign_ == 0) {
      // Started at an exact zero: the first nonzero value fixes the sign.
      last_sign_ = s_b;
      return;
    }
    if (s_b == 0) {
      zeros_.push_back({t_b, t_a, t_b, step.value(t_a)[Idx], y_b});
      last_sign_ = -last_sign_;
      pending_exact_ = true;
      return;
    }
    if (pending_exact_) {
      pending_exact_ = false;
      if (s_b == last_sign_) return;
      // Touched zero without crossing: treat as no zero.
      zeros_.pop_back();
      last_sign_ = s_b;
      return;
    }
    if (s_b != last_sign_) {
      double lo = t_a, hi = t_b;
      double y_lo = step.value(lo)[Idx];
      const double y_a = y_lo;
      while (std::abs(hi - lo) > root_tol_) {
        const double mid = 0.5 * (lo + hi);
        const double y_mid = step.value(mid)[Idx];
        if (sign(y_mid) == sign(y_lo)) {
          lo = mid;
          y_lo = y_mid;
        } else {
          hi = mid;
        }
        if (mid == lo && mid == hi) break;
      }
      zeros_.push_back({0.5 * (lo + hi), std::min(t_a, t_b), std::max(t_a, t_b), y_a, y_b});
      last_sign_ = s_b;
    }
  }

  std::vector<JacobiZero>& zeros() { return zeros_; }

 private:
  static int sign(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

  double root_tol_;
  double t_start_ = 0.0;
  int last_sign_ = 0;
  bool pending_exact_ = false;
  std::vector<JacobiZero> zeros_;
};

}  // namespace detail

struct JacobiOptions {
  double tol = 1e-10;        // integrator tolerance
  double root_tol = 1e-10;   // bisection width for zeros
  std::optional<double> t_start;  // defaults to the trajectory's t = 0 (or t_min if 0 is outside)
  double x0 = 0.0;           // tangential component at t_start
};

/// Solution (y, y', x) of the Jacobi system along a stored trajectory, with
/// coefficients taken from the trajectory's dense output.
class JacobiSolution {
 public:
  JacobiSolution(Trajectory traj, double t_start, DenseTrack<3> track, std::vector<JacobiZero> zeros)
      : traj_(std::move(traj)), t_start_(t_start), track_(std::move(track)), zeros_(std::move(zeros)) {}

  const Trajectory& trajectory() const { return traj_; }
  double t_start() const { return t_start_; }
  double t_min() const { return track_.t_min(); }
  double t_max() const { return track_.t_max(); }

  double y(double t) const { return track_.value(t)[0]; }
  double ydot(double t) const { return track_.value(t)[1]; }
  /// Tangential component, from x' = lambda y.
  double x(double t) const { return track_.value(t)[2]; }

  /// Sign changes of y, sorted by time. The starting point is never counted.
  const std::vector<JacobiZero>& zeros() const { return zeros_; }
  const DenseTrack<3>& track() const { return track_; }

 private:
  Trajectory traj_;
  double t_start_;
  DenseTrack<3> track_;
  std::vector<JacobiZero> zeros_;
};

inline JacobiSolution jacobi_solve(const Trajectory& traj, double y0, double ydot0,
                                   const JacobiOptions& opt = {}) {
  double t0 = opt.t_start.value_or(0.0);
  if (!opt.t_start && (t0 < traj.t_min() || t0 > traj.t_max())) t0 = traj.t_min();
  if (t0 < traj.t_min() || t0 > traj.t_max()) throw std::invalid_argument("start time outside trajectory span");
  auto rhs = [&traj](double t, const StateVec<3>& y, StateVec<3>& dy) {
    const auto g = traj.geometry(t);
    dy[0] = y[1];
    dy[1] = g.v_lambda() * y[1] - g.k_lambda() * y[0];
    dy[2] = g.lambda() * y[0];
  };
  IntegratorOptions io = integrator_options(opt.tol);
  const StateVec<3> init{y0, ydot0, opt.x0};
  DenseTrack<3> track;
  std::vector<JacobiZero> zeros;
  const bool trivial = y0 == 0.0 && ydot0 == 0.0;
  if (t0 < traj.t_max()) {
    detail::ZeroScanner<3, 0> scan(t0, y0, opt.root_tol);
    integrate_dopri5<3>(rhs, t0, init, traj.t_max(), io, [&](const DenseStep<3>& s) {
      track.append(s);
      if (!trivial) scan.observe(s);
      return true;
    });
    zeros = std::move(scan.zeros());
  }
  if (t0 > traj.t_min()) {
    detail::ZeroScanner<3, 0> scan(t0, y0, opt.root_tol);
    integrate_dopri5<3>(rhs, t0, init, traj.t_min(), io, [&](const DenseStep<3>& s) {
      track.append(s);
      if (!trivial) scan.observe(s);
      return true;
    });
    auto& back = scan.zeros();
    zeros.insert(zeros.end(), back.begin(), back.end());
  }
  track.finalize();
  std::sort(zeros.begin(), zeros.end(), [](const JacobiZero& a, const JacobiZero& b) { return a.time < b.time; });
  return JacobiSolution(traj, t0, std::move(track), std::move(zeros));
}

/// W = y_a y_b' - y_b y_a'
inline double wronskian(const JacobiSolution& a, const JacobiSolution& b, double t) {
  const auto sa = a.track().value(t);
  const auto sb = b.track().value(t);
  return sa[0] * sb[1] - sb[0] * sa[1];
}

struct ConjugateOptions {
  double tol = 1e-10;
  double root_tol = 1e-10;
};

/// Result of scanning y with y(0) = 0, y'(0) = 1 for later zeros. Absence of a
/// zero up to the horizon is evidence only.
struct ConjugateReport {
  std::optional<double> first_time;
  int zero_count = 0;
  double horizon = 0.0;
  double tol = 0.0;
  double root_tol = 0.0;
  std::vector<double> zeros;
};

/// Integrates the flow jointly with the Pruefer angle of the Jacobi solution
/// y(0) = 0, y'(0) = 1 (y = rho sin psi, y' = rho cos psi):
///   psi' = cos^2 psi - V(lambda) sin psi cos psi + K_lambda sin^2 psi.
/// Zeros of y are the times psi = k pi, k >= 1; there psi' = 1, so psi crosses
/// each multiple of pi once and upwards. The amplitude rho never enters, so
/// exponential growth or decay of y does not affect the count.
inline ConjugateReport first_conjugate_time(const ThermostatSystem& sys, const PhaseState& start,
                                            double horizon, const ConjugateOptions& opt = {}) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  auto rhs = [&sys](double, const StateVec<4>& y, StateVec<4>& dy) {
    const LocalGeometry g(sys.jets({y[0], y[1]}), y[2]);
    const Vec2 v = g.velocity();
    const double s = std::sin(y[3]), c = std::cos(y[3]);
    dy[0] = v.c1;
    dy[1] = v.c2;
    dy[2] = g.theta_dot();
    dy[3] = c * c - g.v_lambda() * s * c + g.k_lambda() * s * s;
  };
  ConjugateReport rep;
  rep.horizon = horizon;
  rep.tol = opt.tol;
  rep.root_tol = opt.root_tol;
  const StateVec<4> init{start.x.x1, start.x.x2, start.theta, 0.0};
  long reached = 0;  // multiples of pi passed so far
  integrate_dopri5<4>(rhs, 0.0, init, horizon, integrator_options(opt.tol), [&](const DenseStep<4>& st) {
    const double t_b = st.t0 + st.h;
    const long k_end = static_cast<long>(std::floor(st.value(t_b)[3] / kPi));
    for (long k = reached + 1; k <= k_end; ++k) {
      const double target = kPi * static_cast<double>(k);
      double lo = st.t0, hi = t_b;
      while (hi - lo > opt.root_tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        (st.value(mid)[3] < target ? lo : hi) = mid;
      }
      rep.zeros.push_back(0.5 * (lo + hi));
    }
    reached = std::max(reached, k_end);
    return true;
  });
  rep.zero_count = static_cast<int>(rep.zeros.size());
  if (!rep.zeros.empty()) rep.first_time = rep.zeros.front();
  return rep;
}

inline ConjugateReport first_conjugate_time(const Trajectory& traj, double horizon,
                                            const ConjugateOptions& opt = {}) {
  return first_conjugate_time(traj.system(), traj.initial(), horizon, opt);
}

/// d_{tv} exp_x (t w) by central differences next to the Jacobi field with
/// J(0) = 0, D_t J(0) = w.
struct DexpComparison {
  Vec2 finite_difference;
  Vec2 jacobi;
  double discrepancy = 0.0;  // g-norm at gamma(t)
  double jacobi_norm = 0.0;
};

struct DexpOptions {
  double step = 1e-5;
  double tol = 1e-12;
};

inline DexpComparison dexp_vs_jacobi(const ThermostatSystem& sys, Point x, double theta, double t, Vec2 w,
                                     const DexpOptions& opt = {}) {
  if (!(t > 0.0)) throw std::invalid_argument("dexp_vs_jacobi requires t > 0");
  const Jet phi0 = sys.metric().phi().jet(x);
  const double em0 = std::exp(-phi0.value);
  const Vec2 v{em0 * std::cos(theta), em0 * std::sin(theta)};

  // exp_x(u) for a tangent vector u: unit direction, g-length as time.
  auto exp_vec = [&](Vec2 u) {
    const double len = std::exp(phi0.value) * u.euclidean_norm();
    const double dir = std::atan2(u.c2, u.c1);
    return exp_map(sys, x, dir, len, opt.tol);
  };
  const Point plus = exp_vec(t * (v + opt.step * w));
  const Point minus = exp_vec(t * (v - opt.step * w));
  const Vec2 fd{(plus.x1 - minus.x1) / (2.0 * opt.step), (plus.x2 - minus.x2) / (2.0 * opt.step)};

  // Split w = a v + b iv in the metric at x.
  const double s0 = std::exp(2.0 * phi0.value);
  const Vec2 iv{-v.c2, v.c1};
  const double a = s0 * w.euclidean_dot(v);
  const double b = s0 * w.euclidean_dot(iv);

  auto rhs = [&sys](double, const StateVec<6>& y, StateVec<6>& dy) {
    const LocalGeometry g(sys.jets({y[0], y[1]}), y[2]);
    const Vec2 vel = g.velocity();
    dy[0] = vel.c1;
    dy[1] = vel.c2;
    dy[2] = g.theta_dot();
    dy[3] = y[4];
    dy[4] = g.v_lambda() * y[4] - g.k_lambda() * y[3];
    dy[5] = g.lambda() * y[3];
  };
  const StateVec<6> init{x.x1, x.x2, theta, 0.0, 1.0, 0.0};
  const auto res = integrate_dopri5<6>(rhs, 0.0, init, t, integrator_options(opt.tol),
                                       [](const DenseStep<6>&) { return true; });
  const auto& ye = res.y_end;
  const LocalGeometry g(sys.jets({ye[0], ye[1]}), ye[2]);
  const Vec2 gdot = g.velocity();
  const Vec2 igdot = g.normal();
  // Radial part: the variation exp(t (1 + s a) v) moves along gamma at rate a t.
  const Vec2 jac = (a * t + b * ye[5]) * gdot + (b * ye[3]) * igdot;

  DexpComparison out;
  out.finite_difference = fd;
  out.jacobi = jac;
  const double sc = std::exp(g.jets().phi.value);
  out.discrepancy = sc * (fd - jac).euclidean_norm();
  out.jacobi_norm = sc * jac.euclidean_norm();
  return out;
}

}  // namespace thermo

#endif  // THERMO_JACOBI_HPP
