#ifndef THERMO_HOPF_HPP
#define THERMO_HOPF_HPP

// Hopf's construction along a trajectory: two-point solutions y(t;a,b) with
// y(a) = 1, y(b) = 0, their limit y(t;a) as b -> infinity, and the bounded
// Riccati solution r = y'/y of
//   r' + r^2 + K_lambda - V(lambda) r = 0.

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "thermo/jacobi.hpp"

namespace thermo {

/// y2(b) = 0 for the solution with y2(a) = 0, y2'(a) = 1: a and b are
/// conjugate and y(t;a,b) does not exist.
class ConjugatePairError : public std::runtime_error {
 public:
  ConjugatePairError(double a, double b, double zero)
      : std::runtime_error("times " + std::to_string(a) + " and " + std::to_string(b) +
                           " are separated by a Jacobi zero at " + std::to_string(zero)),
        zero_(zero) {}
  double zero() const { return zero_; }

 private:
  double zero_;
};

/// y(t;a,b) = y1 - (y1(b)/y2(b)) y2 with y1, y2 the fundamental solutions at a.
inline JacobiSolution two_point_solution(const Trajectory& traj, double a, double b, const JacobiOptions& base = {}) {
  if (a == b) throw std::invalid_argument("two_point_solution requires a != b");
  for (double t : {a, b})
    if (t < traj.t_min() || t > traj.t_max()) throw std::invalid_argument("a and b must lie in the trajectory span");
  JacobiOptions opt = base;
  opt.t_start = a;
  const auto y1 = jacobi_solve(traj, 1.0, 0.0, opt);
  const auto y2 = jacobi_solve(traj, 0.0, 1.0, opt);
  const double lo = std::min(a, b), hi = std::max(a, b);
  for (const auto& z : y2.zeros())
    if (z.time > lo && z.time <= hi) throw ConjugatePairError(a, b, z.time);
  const double y2b = y2.y(b);
  if (y2b == 0.0) throw ConjugatePairError(a, b, b);
  return jacobi_solve(traj, 1.0, -y1.y(b) / y2b, opt);
}

struct ComparisonBounds {
  double B = 0.0;  // sqrt(sup |K_lambda|)
  double C = 0.0;  // sup |V(lambda)|
  double A = 0.0;
  double p_minus = 0.0;
  double p_plus = 0.0;
  int resolution = 0;  // final grid points per axis
};

inline ComparisonBounds bounds_from_constant(double A) {
  ComparisonBounds out;
  out.A = A;
  out.p_minus = A * (1.0 - std::sqrt(5.0)) / 2.0;
  out.p_plus = A * (1.0 + std::sqrt(5.0)) / 2.0;
  return out;
}

struct BoundsOptions {
  int initial_resolution = 16;
  int max_resolution = 128;
  double stable_rel = 1e-6;  // grid refinement stops when both sups move less than this
  int polish_starts = 4;
};

namespace detail {

struct GridSup {
  double k = 0.0, v = 0.0;
  std::vector<std::pair<double, std::array<double, 3>>> top_k, top_v;
};

inline void keep_top(std::vector<std::pair<double, std::array<double, 3>>>& top, double val,
                     const std::array<double, 3>& p, std::size_t n) {
  if (top.size() < n) {
    top.push_back({val, p});
  } else {
    auto it = std::min_element(top.begin(), top.end(), [](auto& l, auto& r) { return l.first < r.first; });
    if (val > it->first) *it = {val, p};
  }
}

inline GridSup grid_sup(const ThermostatSystem& sys, int n, std::size_t keep) {
  GridSup out;
  const double h = kTwoPi / n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const SpatialJets jet = sys.jets({i * h, j * h});
      for (int k = 0; k < n; ++k) {
        const LocalGeometry g(jet, k * h);
        const double kv = std::abs(g.k_lambda());
        const double vv = std::abs(g.v_lambda());
        const std::array<double, 3> p{i * h, j * h, k * h};
        out.k = std::max(out.k, kv);
        out.v = std::max(out.v, vv);
        keep_top(out.top_k, kv, p, keep);
        keep_top(out.top_v, vv, p, keep);
      }
    }
  return out;
}

/// Cyclic coordinate maximization with Brent line searches in windows of
/// half-width `radius` around the current point.
template <class F>
double polish_max(F&& fn, std::array<double, 3> p, double radius) {
  double best = fn(p);
  for (int sweep = 0; sweep < 60; ++sweep) {
    const double before = best;
    for (int c = 0; c < 3; ++c) {
      auto neg = [&](double s) {
        auto q = p;
        q[c] = s;
        return -fn(q);
      };
      const auto r = boost::math::tools::brent_find_minima(neg, p[c] - radius, p[c] + radius, 52);
      if (-r.second > best) {
        best = -r.second;
        p[c] = r.first;
      }
    }
    if (best - before <= 1e-15 * std::max(1.0, best)) break;
    radius = std::max(radius * 0.5, 1e-6);
  }
  return best;
}

}  // namespace detail

/// B^2 = sup |K_lambda|, C = sup |V(lambda)| over the unit circle bundle,
/// A = max(B, C), P+- = A (1 +- sqrt 5) / 2. The sups come from a product grid
/// refined until stable and then polished by local maximization.
inline ComparisonBounds comparison_bounds(const ThermostatSystem& sys, const BoundsOptions& opt = {}) {
  int n = opt.initial_resolution;
  auto cur = detail::grid_sup(sys, n, opt.polish_starts);
  while (n < opt.max_resolution) {
    auto next = detail::grid_sup(sys, 2 * n, opt.polish_starts);
    n *= 2;
    const bool stable = std::abs(next.k - cur.k) <= opt.stable_rel * std::max(1.0, next.k) &&
                        std::abs(next.v - cur.v) <= opt.stable_rel * std::max(1.0, next.v);
    cur = std::move(next);
    if (stable) break;
  }
  const double radius = kTwoPi / n;
  auto fk = [&](const std::array<double, 3>& p) {
    return std::abs(local_geometry(sys, {{p[0], p[1]}, p[2]}).k_lambda());
  };
  auto fv = [&](const std::array<double, 3>& p) {
    return std::abs(local_geometry(sys, {{p[0], p[1]}, p[2]}).v_lambda());
  };
  double sk = cur.k, sv = cur.v;
  for (const auto& s : cur.top_k)
    if (s.first > 0.0) sk = std::max(sk, detail::polish_max(fk, s.second, radius));
  for (const auto& s : cur.top_v)
    if (s.first > 0.0) sv = std::max(sv, detail::polish_max(fv, s.second, radius));
  ComparisonBounds out = bounds_from_constant(std::max(std::sqrt(sk), sv));
  out.B = std::sqrt(sk);
  out.C = sv;
  out.resolution = n;
  return out;
}

/// Solution of z'' - A z' - A^2 z = 0 with z(a) = 1, z(b) = 0.
inline double comparison_z(double t, double a, double b, double A) {
  if (a == b) throw std::invalid_argument("comparison_z requires a != b");
  if (!(A > 0.0)) throw std::invalid_argument("comparison_z requires A > 0");
  const auto B = bounds_from_constant(A);
  return (std::exp(B.p_minus * (t - b)) - std::exp(B.p_plus * (t - b))) /
         (std::exp(B.p_minus * (a - b)) - std::exp(B.p_plus * (a - b)));
}

/// z'(t) for the same data.
inline double comparison_z_dot(double t, double a, double b, double A) {
  if (a == b) throw std::invalid_argument("comparison_z requires a != b");
  if (!(A > 0.0)) throw std::invalid_argument("comparison_z requires A > 0");
  const auto B = bounds_from_constant(A);
  return (B.p_minus * std::exp(B.p_minus * (t - b)) - B.p_plus * std::exp(B.p_plus * (t - b))) /
         (std::exp(B.p_minus * (a - b)) - std::exp(B.p_plus * (a - b)));
}

struct HopfOptions {
  double b0 = 8.0;        // first offset b - a
  double b_max = 1024.0;  // largest offset
  double tol = 1e-6;      // sup-norm convergence tolerance
  double window = 10.0;   // profile on [a - window, a + window]
  double dt = 0.05;       // sample spacing
  double integ_tol = 1e-12;
  double mask = 1e-8;     // r reported only where y(t;a) exceeds this
  bool extrapolate = true;  // Romberg in 1/b across the doubling schedule
};

/// One b of the doubling schedule.
struct HopfLevel {
  double b = 0.0;
  double delta = std::numeric_limits<double>::quiet_NaN();      // sup |estimate_k - estimate_{k-1}|
  double raw_delta = std::numeric_limits<double>::quiet_NaN();  // same for unextrapolated r_b
  double monotone_violation = 0.0;  // largest breach of the ordering of y(t;a,b) in b
  int valid = 0;
};

class HopfNonConvergence : public std::runtime_error {
 public:
  HopfNonConvergence(const std::string& what, std::vector<HopfLevel> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<HopfLevel>& history() const { return history_; }

 private:
  std::vector<HopfLevel> history_;
};

/// r on a uniform sample grid along a trajectory. Masked samples carry NaN.
class RiccatiProfile {
 public:
  RiccatiProfile() = default;

  /// Profile from given values, e.g. a candidate closed form.
  RiccatiProfile(Trajectory traj, std::vector<double> times, std::vector<double> r)
      : traj_(std::make_shared<Trajectory>(std::move(traj))), times_(std::move(times)), r_(std::move(r)) {
    if (times_.size() != r_.size()) throw std::invalid_argument("times and values differ in length");
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (!(times_[i] > times_[i - 1])) throw std::invalid_argument("sample times must increase");
    y_.assign(times_.size(), std::numeric_limits<double>::quiet_NaN());
    fill_coefficients();
  }

  /// Samples f(state(t)) on [t0, t1] with spacing dt.
  template <class F>
  static RiccatiProfile sample(const Trajectory& traj, double t0, double t1, double dt, F&& f) {
    std::vector<double> ts, rs;
    const long n = static_cast<long>(std::floor((t1 - t0) / dt + 1e-9));
    for (long i = 0; i <= n; ++i) {
      const double t = t0 + static_cast<double>(i) * dt;
      ts.push_back(t);
      rs.push_back(f(traj.state(t)));
    }
    return RiccatiProfile(traj, std::move(ts), std::move(rs));
  }

  const Trajectory& trajectory() const { return *traj_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& r() const { return r_; }
  const std::vector<double>& y() const { return y_; }
  const std::vector<double>& v_lambda() const { return v_; }
  const std::vector<double>& k_lambda() const { return k_; }
  const std::vector<HopfLevel>& history() const { return history_; }
  double base_time() const { return a_; }
  /// True when the Romberg estimate rather than the last r_b was accepted.
  bool extrapolated() const { return extrapolated_; }
  double tolerance() const { return eps_; }
  bool valid(std::size_t i) const { return !std::isnan(r_[i]); }
  std::size_t size() const { return times_.size(); }
  std::size_t masked_count() const {
    return static_cast<std::size_t>(std::count_if(r_.begin(), r_.end(), [](double v) { return std::isnan(v); }));
  }

  const std::optional<ComparisonBounds>& bounds() const { return bounds_; }
  void attach_bounds(const ComparisonBounds& b) { bounds_ = b; }

  bool in_bounds(std::size_t i, double eps) const {
    if (!bounds_ || !valid(i)) return false;
    return r_[i] >= bounds_->p_minus - eps && r_[i] <= bounds_->p_plus + eps;
  }

  /// Largest amount by which a sample leaves [P-, P+] (0 when all are inside).
  double bound_violation() const {
    if (!bounds_) throw std::logic_error("no comparison bounds attached");
    double worst = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
      if (valid(i)) worst = std::max({worst, bounds_->p_minus - r_[i], r_[i] - bounds_->p_plus});
    return worst;
  }

  /// Same for the symmetric interval [-P+, P+], which is what the Riccati
  /// equation itself guarantees for a solution bounded on the whole line.
  double symmetric_bound_violation() const {
    if (!bounds_) throw std::logic_error("no comparison bounds attached");
    double worst = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
      if (valid(i)) worst = std::max(worst, std::abs(r_[i]) - bounds_->p_plus);
    return worst;
  }

  std::optional<double> residual() const { return residual_; }
  void set_residual(double v) { residual_ = v; }

  /// Copy with every valid sample shifted by c.
  RiccatiProfile shifted(double c) const {
    RiccatiProfile out = *this;
    for (auto& v : out.r_)
      if (!std::isnan(v)) v += c;
    out.residual_.reset();
    return out;
  }

  /// Columns t, r, V_lambda, K_lambda, in_bounds.
  void write_csv(std::ostream& os) const {
    os << "t,r,V_lambda,K_lambda,in_bounds\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < size(); ++i) {
      os << times_[i] << ',';
      if (valid(i))
        os << r_[i];
      else
        os << "nan";
      os << ',' << v_[i] << ',' << k_[i] << ',' << (in_bounds(i, eps_) ? 1 : 0) << '\n';
    }
  }

 private:
  friend RiccatiProfile hopf_limit(const Trajectory&, double, const HopfOptions&);

  void fill_coefficients() {
    v_.resize(times_.size());
    k_.resize(times_.size());
    for (std::size_t i = 0; i < times_.size(); ++i) {
      const auto g = traj_->geometry(times_[i]);
      v_[i] = g.v_lambda();
      k_[i] = g.k_lambda();
    }
  }

  std::shared_ptr<const Trajectory> traj_;
  std::vector<double> times_, r_, y_, v_, k_;
  std::vector<HopfLevel> history_;
  std::optional<ComparisonBounds> bounds_;
  std::optional<double> residual_;
  double a_ = 0.0;
  double eps_ = 0.0;
  bool extrapolated_ = false;
};

struct RiccatiResidualOptions {
  double tol = 1e-12;
};

/// Sup over consecutive valid samples of |r(t_{i+1}) - rho(t_{i+1})| / dt_i,
/// rho solving the Riccati equation from rho(t_i) = r(t_i) with coefficients
/// along the trajectory. This is the interval mean of the left-hand side
/// r' + r^2 + K_lambda - V(lambda) r.
inline double riccati_residual(const RiccatiProfile& p, const RiccatiResidualOptions& opt = {}) {
  if (p.size() < 3) throw std::invalid_argument("riccati_residual needs at least three samples");
  const Trajectory& traj = p.trajectory();
  auto rhs = [&traj](double t, const StateVec<1>& r, StateVec<1>& dr) {
    const auto g = traj.geometry(t);
    dr[0] = g.v_lambda() * r[0] - r[0] * r[0] - g.k_lambda();
  };
  const auto io = integrator_options(opt.tol);
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (!p.valid(i) || !p.valid(i + 1)) continue;
    const double t0 = p.times()[i], t1 = p.times()[i + 1];
    const auto res = integrate_dopri5<1>(rhs, t0, StateVec<1>{p.r()[i]}, t1, io, [](const DenseStep<1>&) { return true; });
    worst = std::max(worst, std::abs(p.r()[i + 1] - res.y_end[0]) / (t1 - t0));
  }
  return worst;
}

namespace detail {

/// Samples of psi and log rho for the solution with y(b) = 0, y'(b) = -1,
/// integrated backward from b in Pruefer form y = rho sin psi, y' = rho cos psi.
struct PruferSamples {
  std::vector<double> psi, log_rho;
  std::vector<bool> filled;
};

inline PruferSamples prufer_backward(const Trajectory& traj, double b, const std::vector<double>& times,
                                     double integ_tol) {
  // Coefficients come from the stored forward trajectory: re-integrating the
  // flow backward from gamma(b) is unstable for dissipative thermostats.
  auto rhs = [&traj](double t, const StateVec<2>& y, StateVec<2>& dy) {
    const auto g = traj.geometry(t);
    const double s = std::sin(y[0]), c = std::cos(y[0]);
    const double K = g.k_lambda(), V = g.v_lambda();
    dy[0] = c * c - V * s * c + K * s * s;
    dy[1] = s * c * (1.0 - K) + V * c * c;
  };
  const StateVec<2> init{kPi, 0.0};
  PruferSamples out;
  out.psi.assign(times.size(), 0.0);
  out.log_rho.assign(times.size(), 0.0);
  out.filled.assign(times.size(), false);
  const double t_end = times.front();
  if (b <= t_end) return out;
  auto record = [&](std::size_t i, const StateVec<2>& v) {
    out.psi[i] = v[0];
    out.log_rho[i] = v[1];
    out.filled[i] = true;
  };
  for (std::size_t i = 0; i < times.size(); ++i)
    if (times[i] == b) record(i, init);
  integrate_dopri5<2>(rhs, b, init, t_end, integrator_options(integ_tol), [&](const DenseStep<2>& st) {
    const double lo = st.t_begin(), hi = st.t_end();
    auto first = std::lower_bound(times.begin(), times.end(), lo);
    for (auto it = first; it != times.end() && *it <= hi; ++it) {
      const auto i = static_cast<std::size_t>(it - times.begin());
      if (!out.filled[i] && *it < b) record(i, st.value(*it));
    }
    return true;
  });
  return out;
}

}  // namespace detail

/// r(t) = lim_{b -> infinity} y'(t;a,b)/y(t;a,b) on [a - window, a + window].
/// For each b of the doubling schedule, r_b = cot psi comes from one backward
/// Pruefer integration started at y(b) = 0; y(t;a,b) is renormalized to 1 at a.
/// Converged when successive r_b differ by less than tol in sup norm. With
/// `extrapolate`, a Romberg table in 1/b is carried along and accepted instead
/// when it settles first (r_b - r = O(1/b) for parabolic behaviour such as the
/// flat geodesic flow, where the raw sequence would need b ~ 1/tol).
inline RiccatiProfile hopf_limit(const Trajectory& traj, double a, const HopfOptions& opt = {}) {
  if (!(opt.tol > 0.0) || !(opt.dt > 0.0) || !(opt.window >= 0.0) || !(opt.b0 > 0.0))
    throw std::invalid_argument("invalid Hopf options");
  const long n = static_cast<long>(std::llround(opt.window / opt.dt));
  std::vector<double> times;
  for (long k = -n; k <= n; ++k) times.push_back(a + static_cast<double>(k) * opt.dt);
  if (times.front() < traj.t_min() - 1e-12)
    throw std::invalid_argument("trajectory does not cover the profile window");
  const std::size_t ia = static_cast<std::size_t>(n);
  const std::size_t m = times.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<std::vector<double>> table(m);  // last Romberg row per sample
  std::vector<double> estimate(m, nan), raw_prev(m, nan), y_prev(m, nan), y_cur(m, nan);
  std::vector<HopfLevel> history;
  double b_prev = 0.0;

  for (double off = opt.b0; off <= opt.b_max * (1.0 + 1e-12); off *= 2.0) {
    const double b = a + off;
    if (b > traj.t_max() + 1e-12) {
      throw HopfNonConvergence("trajectory ends at " + std::to_string(traj.t_max()) + " before b = " +
                                   std::to_string(b),
                               history);
    }
    const auto pr = detail::prufer_backward(traj, b, times, opt.integ_tol);
    HopfLevel lvl;
    lvl.b = b;
    const double sa = std::sin(pr.psi[ia]);
    std::vector<double> raw(m, nan), est_new(m, nan);
    double delta = 0.0, raw_delta = 0.0;
    bool all_have_prev = true;
    for (std::size_t i = 0; i < m; ++i) {
      y_cur[i] = nan;
      // A sample joins the table once b - a >= 2 |t - a|, inside the disc where
      // the expansion in 1/b converges.
      if (!pr.filled[i] || times[i] >= b || off < 2.0 * std::abs(times[i] - a)) {
        table[i].clear();
        all_have_prev = false;
        continue;
      }
      const double s = std::sin(pr.psi[i]), c = std::cos(pr.psi[i]);
      const double y = std::exp(pr.log_rho[i] - pr.log_rho[ia]) * s / sa;
      y_cur[i] = y;
      if (!(y > opt.mask)) {
        table[i].clear();
        all_have_prev = false;
        continue;
      }
      raw[i] = c / s;
      ++lvl.valid;
      // Romberg row: R_j = R_{j-1} + (R_{j-1} - prev_{j-1}) / (2^j - 1)
      std::vector<double> row{raw[i]};
      if (opt.extrapolate) {
        double p2 = 1.0;
        for (std::size_t j = 1; j <= table[i].size(); ++j) {
          p2 *= 2.0;
          row.push_back(row[j - 1] + (row[j - 1] - table[i][j - 1]) / (p2 - 1.0));
        }
      }
      const bool had_prev = !table[i].empty();
      est_new[i] = row.back();
      if (had_prev) {
        delta = std::max(delta, std::abs(est_new[i] - estimate[i]));
        raw_delta = std::max(raw_delta, std::abs(raw[i] - raw_prev[i]));
      } else {
        all_have_prev = false;
      }
      table[i] = std::move(row);
    }
    if (!history.empty()) {
      double viol = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (std::isnan(y_prev[i]) || std::isnan(y_cur[i]) || times[i] >= b_prev) continue;
        // b_prev < b: y(t;a,b_prev) >= y(t;a,b) for t <= a and <= for t >= a.
        const double d = times[i] <= a ? y_cur[i] - y_prev[i] : y_prev[i] - y_cur[i];
        viol = std::max(viol, d / std::max(1.0, std::abs(y_cur[i])));
      }
      lvl.monotone_violation = viol;
      lvl.delta = delta;
      lvl.raw_delta = raw_delta;
    }
    history.push_back(lvl);
    estimate = est_new;
    raw_prev = raw;
    y_prev = y_cur;
    b_prev = b;
    const bool raw_ok = raw_delta < opt.tol;
    if (history.size() >= 2 && all_have_prev && (raw_ok || delta < opt.tol)) {
      RiccatiProfile prof(traj, times, raw_ok ? raw : estimate);
      prof.extrapolated_ = !raw_ok;
      prof.residual_ = riccati_residual(prof);
      prof.y_ = y_cur;
      prof.history_ = std::move(history);
      prof.a_ = a;
      prof.eps_ = opt.tol;
      return prof;
    }
  }
  throw HopfNonConvergence("Hopf limit did not converge by b - a = " + std::to_string(opt.b_max), history);
}

/// Integrates the flow far enough for hopf_limit and returns the profile.
inline RiccatiProfile hopf_profile(const ThermostatSystem& sys, const PhaseState& start, const HopfOptions& opt = {},
                                   double a = 0.0) {
  IntegratorOptions io = integrator_options(opt.integ_tol);
  const double back = std::max(0.0, opt.window - a) + 1.0;
  const double fwd = a + opt.b_max + 1.0;
  return hopf_limit(evolve_span(sys, start, back, fwd, io), a, opt);
}

}  // namespace thermo

#endif  // THERMO_HOPF_HPP
