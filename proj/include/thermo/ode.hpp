#ifndef THERMO_ODE_HPP
#define THERMO_ODE_HPP

// Dormand-Prince 5(4) with the Hairer-Wanner continuous extension. State
// vectors are fixed-size arrays; integration may run forward or backward in
// time.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace thermo {

template <std::size_t D>
using StateVec = std::array<double, D>;

struct IntegratorOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double initial_step = 0.0;  // 0 selects a step automatically
  double max_step = std::numeric_limits<double>::infinity();
  long max_steps = 20'000'000;
};

/// Thrown when the step size underflows or the step budget runs out. Carries
/// the last time that was reached with an accepted step.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double last_time)
      : std::runtime_error(what), last_time_(last_time) {}
  double last_valid_time() const { return last_time_; }

 private:
  double last_time_;
};

/// One accepted step with its continuous extension on [t0, t0 + h] (h may be
/// negative).
template <std::size_t D>
struct DenseStep {
  double t0 = 0.0;
  double h = 0.0;
  std::array<StateVec<D>, 5> rc{};

  double t_begin() const { return std::min(t0, t0 + h); }
  double t_end() const { return std::max(t0, t0 + h); }
  const StateVec<D>& start() const { return rc[0]; }

  StateVec<D> value(double t) const {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    StateVec<D> y;
    for (std::size_t i = 0; i < D; ++i)
      y[i] = rc[0][i] + s * (rc[1][i] + s1 * (rc[2][i] + s * (rc[3][i] + s1 * rc[4][i])));
    return y;
  }

  StateVec<D> derivative(double t) const {
    const double s = (t - t0) / h;
    const double s1 = 1.0 - s;
    StateVec<D> dy;
    for (std::size_t i = 0; i < D; ++i) {
      const double inner = rc[3][i] + s1 * rc[4][i];
      const double mid = rc[2][i] + s * inner;
      const double outer = rc[1][i] + s1 * mid;
      const double d_inner = -rc[4][i];
      const double d_mid = inner + s * d_inner;
      const double d_outer = -mid + s1 * d_mid;
      dy[i] = (outer + s * d_outer) / h;
    }
    return dy;
  }
};

/// Piecewise dense output over an interval, steps sorted by increasing time.
template <std::size_t D>
class DenseTrack {
 public:
  DenseTrack() = default;

  /// Accepts steps in integration order for either direction.
  void append(const DenseStep<D>& s) { steps_.push_back(s); }

  /// Sorts steps so lookup works; call once after integration.
  void finalize() {
    std::sort(steps_.begin(), steps_.end(),
              [](const DenseStep<D>& a, const DenseStep<D>& b) { return a.t_begin() < b.t_begin(); });
  }

  /// Appends another finalized track covering times adjacent to this one.
  void merge(const DenseTrack& other) {
    steps_.insert(steps_.end(), other.steps_.begin(), other.steps_.end());
    finalize();
  }

  bool empty() const { return steps_.empty(); }
  double t_min() const { return steps_.front().t_begin(); }
  double t_max() const { return steps_.back().t_end(); }
  const std::vector<DenseStep<D>>& steps() const { return steps_; }

  const DenseStep<D>& locate(double t) const {
    if (steps_.empty()) throw std::out_of_range("empty dense track");
    const double slack = 1e-12 * (1.0 + std::abs(t));
    if (t < t_min() - slack || t > t_max() + slack) {
      std::ostringstream os;
      os << "time " << t << " outside dense output span [" << t_min() << ", " << t_max() << "]";
      throw std::out_of_range(os.str());
    }
    auto it = std::upper_bound(steps_.begin(), steps_.end(), t,
                               [](double tt, const DenseStep<D>& s) { return tt < s.t_begin(); });
    if (it == steps_.begin()) return steps_.front();
    return *(it - 1);
  }

  StateVec<D> value(double t) const { return locate(t).value(t); }
  StateVec<D> derivative(double t) const { return locate(t).derivative(t); }

 private:
  std::vector<DenseStep<D>> steps_;
};

template <std::size_t D>
struct IntegrationSummary {
  double t_end = 0.0;
  StateVec<D> y_end{};
  long accepted = 0;
  long rejected = 0;
  bool stopped_early = false;
};

namespace detail {
// Dormand-Prince tableau.
inline constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
inline constexpr double a21 = 1.0 / 5.0;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                        a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace detail

/// Integrates y' = rhs(t, y) from t0 to t1. The observer is called with every
/// accepted DenseStep and returns false to stop early.
///
/// rhs: void(double t, const StateVec<D>& y, StateVec<D>& dydt)
/// observer: bool(const DenseStep<D>&)
template <std::size_t D, class Rhs, class Observer>
IntegrationSummary<D> integrate_dopri5(Rhs&& rhs, double t0, const StateVec<D>& y0, double t1,
                                       const IntegratorOptions& opt, Observer&& observer) {
  using namespace detail;
  IntegrationSummary<D> out;
  out.t_end = t0;
  out.y_end = y0;
  if (t1 == t0) return out;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);

  auto scale = [&](double a, double b) { return opt.atol + opt.rtol * std::max(std::abs(a), std::abs(b)); };

  StateVec<D> y = y0, k1, k2, k3, k4, k5, k6, k7, ytmp, ynew;
  double t = t0;
  rhs(t, y, k1);

  double h;
  if (opt.initial_step > 0.0) {
    h = opt.initial_step;
  } else {
    // Hairer's starting step heuristic.
    double d0 = 0.0, d1n = 0.0;
    for (std::size_t i = 0; i < D; ++i) {
      const double sk = scale(y[i], y[i]);
      d0 += (y[i] / sk) * (y[i] / sk);
      d1n += (k1[i] / sk) * (k1[i] / sk);
    }
    d0 = std::sqrt(d0 / D);
    d1n = std::sqrt(d1n / D);
    double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h0 = std::min(h0, span);
    for (std::size_t i = 0; i < D; ++i) ytmp[i] = y[i] + dir * h0 * k1[i];
    rhs(t + dir * h0, ytmp, k2);
    double d2 = 0.0;
    for (std::size_t i = 0; i < D; ++i) {
      const double sk = scale(y[i], y[i]);
      d2 += ((k2[i] - k1[i]) / sk) * ((k2[i] - k1[i]) / sk);
    }
    d2 = std::sqrt(d2 / D) / h0;
    const double dm = std::max(d1n, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min(100.0 * h0, h1);
  }
  h = std::min({h, opt.max_step, span});

  double err_old = 1e-4;
  bool last_rejected = false;
  while (dir * (t1 - t) > 0.0) {
    if (out.accepted + out.rejected >= opt.max_steps)
      throw IntegrationError("step budget exhausted", t);
    const double remaining = std::abs(t1 - t);
    bool final_step = false;
    if (h >= remaining) {
      h = remaining;
      final_step = true;
    }
    if (!final_step && h < 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t))) {
      std::ostringstream os;
      os << "step size underflow at t = " << t;
      throw IntegrationError(os.str(), t);
    }
    const double hs = dir * h;

    for (std::size_t i = 0; i < D; ++i) ytmp[i] = y[i] + hs * a21 * k1[i];
    rhs(t + c2 * hs, ytmp, k2);
    for (std::size_t i = 0; i < D; ++i) ytmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
    rhs(t + c3 * hs, ytmp, k3);
    for (std::size_t i = 0; i < D; ++i) ytmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(t + c4 * hs, ytmp, k4);
    for (std::size_t i = 0; i < D; ++i)
      ytmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(t + c5 * hs, ytmp, k5);
    for (std::size_t i = 0; i < D; ++i)
      ytmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    const double t_new = final_step ? t1 : t + hs;
    rhs(t_new, ytmp, k6);
    for (std::size_t i = 0; i < D; ++i)
      ynew[i] = y[i] + hs * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
    rhs(t_new, ynew, k7);

    double err = 0.0;
    for (std::size_t i = 0; i < D; ++i) {
      const double ei = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double r = ei / scale(y[i], ynew[i]);
      err += r * r;
    }
    err = std::sqrt(err / D);
    if (!std::isfinite(err)) err = 1e10;

    if (err <= 1.0) {
      DenseStep<D> step;
      step.t0 = t;
      step.h = t_new - t;
      for (std::size_t i = 0; i < D; ++i) {
        const double ydiff = ynew[i] - y[i];
        const double bspl = step.h * k1[i] - ydiff;
        step.rc[0][i] = y[i];
        step.rc[1][i] = ydiff;
        step.rc[2][i] = bspl;
        step.rc[3][i] = ydiff - step.h * k7[i] - bspl;
        step.rc[4][i] = step.h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                                  d7 * k7[i]);
      }
      ++out.accepted;
      t = t_new;
      y = ynew;
      k1 = k7;
      out.t_end = t;
      out.y_end = y;
      if (!observer(step)) {
        out.stopped_early = true;
        return out;
      }
      // PI step control.
      double fac = 0.9 * std::pow(err, -0.7 / 5.0) * std::pow(err_old, 0.4 / 5.0);
      fac = std::clamp(fac, 0.2, 10.0);
      if (last_rejected) fac = std::min(fac, 1.0);
      err_old = std::max(err, 1e-4);
      h = std::min(h * fac, opt.max_step);
      last_rejected = false;
    } else {
      ++out.rejected;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      last_rejected = true;
    }
  }
  return out;
}

/// Integrates and records the full dense output.
template <std::size_t D, class Rhs>
DenseTrack<D> integrate_dense(Rhs&& rhs, double t0, const StateVec<D>& y0, double t1,
                              const IntegratorOptions& opt) {
  DenseTrack<D> track;
  integrate_dopri5<D>(rhs, t0, y0, t1, opt, [&](const DenseStep<D>& s) {
    track.append(s);
    return true;
  });
  track.finalize();
  return track;
}

}  // namespace thermo

#endif  // THERMO_ODE_HPP
