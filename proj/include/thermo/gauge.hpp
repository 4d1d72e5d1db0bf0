#ifndef THERMO_GAUGE_HPP
#define THERMO_GAUGE_HPP

// Gauge normalization. For U on T^2 the thermostat (g, f, e) corresponds to
//   g1 = e^{-2U} g,  f1 = e^U f,  e1 = e^{2U} (e + grad_g U)
// under the time change ds/dt = e^{-U(gamma(t))}. Choosing U with
// div_g(e + grad_g U) = 0 makes e1 divergence free for g1.
//
// For g = e^{2 phi} delta, e^{2 phi} grad_g U = grad U, so the condition is the
// flat Poisson equation  Delta U = -d_j(e^{2 phi} e_j).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "thermo/jacobi.hpp"
#include "thermo/projection.hpp"

namespace thermo {

struct GaugeOptions {
  int bandwidth_factor = 4;  // first projection band is factor * N
  double tail_target = 1e-13;  // the band doubles until the projection tail is below this
  int verify_grid = 64;      // points per axis for the residual checks
  double drop = 1e-15;       // relative coefficient cutoff in projections
};

class GaugeTransform {
 public:
  const SpectralScalarField& U() const { return U_; }
  const ThermostatSystem& source() const { return source_; }
  const ThermostatSystem& transformed() const { return transformed_; }

  /// sup |Delta_g U + div_g e| on the verification grid.
  double poisson_residual() const { return poisson_residual_; }
  /// sup |div_{g1} e1| on the verification grid.
  double transformed_divergence_residual() const { return div1_residual_; }
  /// Largest projection tail among the transformed fields.
  double aliasing_residual() const { return aliasing_residual_; }
  /// Initial projection band (factor * N); projections may double it.
  int bandwidth() const { return bandwidth_; }
  int verify_grid() const { return verify_grid_; }

  double mean_U() const { return U_.mean(); }
  double sup_U(int grid = 0) const { return U_.grid_sup_norm(grid > 0 ? grid : verify_grid_); }

  /// sup of the oscillation of phi1 = phi - U, zero iff g1 is flat.
  double flatness_residual() const {
    const auto& p = transformed_.metric().phi();
    return (p - SpectralScalarField::constant(p.mean())).grid_sup_norm(verify_grid_);
  }

 private:
  friend GaugeTransform make_gauge(const ThermostatSystem&, const SpectralScalarField&, const GaugeOptions&);

  SpectralScalarField U_;
  ThermostatSystem source_;
  ThermostatSystem transformed_;
  double poisson_residual_ = 0.0;
  double div1_residual_ = 0.0;
  double aliasing_residual_ = 0.0;
  int bandwidth_ = 0;
  int verify_grid_ = 0;
};

namespace detail {

inline int system_bandwidth(const ThermostatSystem& s) {
  return std::max({s.metric().phi().bandwidth(), s.f().bandwidth(), s.e().bandwidth()});
}

template <class F>
double grid_max(int n, F&& fn) {
  double m = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m = std::max(m, std::abs(fn(Point{kTwoPi * i / n, kTwoPi * j / n})));
  return m;
}

}  // namespace detail

/// Builds the transformed triple for a given U (not necessarily the
/// normalizing one).
inline GaugeTransform make_gauge(const ThermostatSystem& sys, const SpectralScalarField& U,
                                 const GaugeOptions& opt = {}) {
  GaugeTransform g;
  g.U_ = U;
  g.source_ = sys;
  g.verify_grid_ = opt.verify_grid;
  const auto& phi = sys.metric().phi();
  const int N = std::max(detail::system_bandwidth(sys), U.bandwidth());
  const int L = std::min(kMaxBandwidth, std::max(1, opt.bandwidth_factor * N));
  g.bandwidth_ = L;

  const SpectralScalarField phi1 = phi - U;
  SpectralScalarField f1, e1c1, e1c2;
  double tail = 0.0;
  if (U.is_constant()) {
    const double u = U.mean();
    f1 = std::exp(u) * sys.f();
    e1c1 = std::exp(2.0 * u) * sys.e().c1();
    e1c2 = std::exp(2.0 * u) * sys.e().c2();
  } else {
    const SpectralScalarField U1 = U.derivative(1), U2 = U.derivative(2);
    if (!sys.f().is_zero()) {
      auto p = project_adaptive(
          [&](int M) {
            auto u = sample_grid(U, M);
            const auto f = sample_grid(sys.f(), M);
            for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::exp(u[i]) * f[i];
            return u;
          },
          L, opt.tail_target, opt.drop);
      f1 = std::move(p.field);
      tail = std::max(tail, p.tail);
    }
    auto comp = [&](const SpectralScalarField& ej, const SpectralScalarField& Uj) {
      return project_adaptive(
          [&](int M) {
            auto u = sample_grid(U, M);
            const auto ph = sample_grid(phi, M), ev = sample_grid(ej, M), uj = sample_grid(Uj, M);
            for (std::size_t i = 0; i < u.size(); ++i)
              u[i] = std::exp(2.0 * u[i]) * (ev[i] + std::exp(-2.0 * ph[i]) * uj[i]);
            return u;
          },
          L, opt.tail_target, opt.drop);
    };
    auto p1 = comp(sys.e().c1(), U1);
    auto p2 = comp(sys.e().c2(), U2);
    tail = std::max({tail, p1.tail, p2.tail});
    e1c1 = std::move(p1.field);
    e1c2 = std::move(p2.field);
  }
  g.aliasing_residual_ = tail;
  g.transformed_ = ThermostatSystem(ConformalMetric(phi1), f1, SpectralVectorField(e1c1, e1c2));

  const int n = opt.verify_grid;
  const auto& e = sys.e();
  g.poisson_residual_ = detail::grid_max(n, [&](Point x) {
    const Jet p = phi.jet(x), u = U.jet(x);
    return std::exp(-2.0 * p.value) * (u.d11 + u.d22) + metric_divergence(e.c1().jet(x), e.c2().jet(x), p);
  });
  const auto& t = g.transformed_;
  g.div1_residual_ = detail::grid_max(n, [&](Point x) {
    return metric_divergence(t.e().c1().jet(x), t.e().c2().jet(x), t.metric().phi().jet(x));
  });
  return g;
}

/// Zero-mean U with div_g(e + grad_g U) = 0 and the transformed system.
inline GaugeTransform solve_gauge(const ThermostatSystem& sys, const GaugeOptions& opt = {}) {
  const auto& phi = sys.metric().phi();
  const auto& e = sys.e();
  SpectralScalarField w1, w2;  // e^{2 phi} e_j
  if (phi.is_constant()) {
    const double s = std::exp(2.0 * phi.mean());
    w1 = s * e.c1();
    w2 = s * e.c2();
  } else if (!e.is_zero()) {
    const int L = std::min(kMaxBandwidth, std::max(1, opt.bandwidth_factor * detail::system_bandwidth(sys)));
    auto weighted = [&](const SpectralScalarField& ej) {
      return project_adaptive(
                 [&](int M) {
                   auto v = sample_grid(phi, M);
                   const auto ev = sample_grid(ej, M);
                   for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(2.0 * v[i]) * ev[i];
                   return v;
                 },
                 L, opt.tail_target, opt.drop)
          .field;
    };
    w1 = weighted(e.c1());
    w2 = weighted(e.c2());
  }
  const SpectralScalarField source = w1.derivative(1) + w2.derivative(2);
  const int n = source.bandwidth();
  std::vector<std::complex<double>> c(static_cast<std::size_t>((2 * n + 1) * (2 * n + 1)));
  for (int k1 = -n; k1 <= n; ++k1)
    for (int k2 = -n; k2 <= n; ++k2) {
      if (k1 == 0 && k2 == 0) continue;
      // -|k|^2 U_k = -S_k
      c[static_cast<std::size_t>((k1 + n) * (2 * n + 1) + (k2 + n))] =
          source.coefficient(k1, k2) / static_cast<double>(k1 * k1 + k2 * k2);
    }
  return make_gauge(sys, SpectralScalarField::from_coefficients(n, std::move(c)), opt);
}

/// s(t) = int_0^t e^{-U(gamma(tau))} dtau along a trajectory, with its inverse.
class TimeChange {
 public:
  TimeChange(Trajectory traj, SpectralScalarField U, DenseTrack<1> s, double origin)
      : traj_(std::move(traj)), U_(std::move(U)), s_(std::move(s)), origin_(origin) {}

  const Trajectory& trajectory() const { return traj_; }
  double t_min() const { return traj_.t_min(); }
  double t_max() const { return traj_.t_max(); }
  double s_min() const { return s(t_min()); }
  double s_max() const { return s(t_max()); }
  /// The time where s = 0.
  double origin() const { return origin_; }

  double s(double t) const { return s_.value(t)[0]; }
  double rate(double t) const { return std::exp(-U_(traj_.state(t).x)); }

  /// Inverse of s by safeguarded Newton iteration.
  double t_of_s(double sv) const {
    double lo = t_min(), hi = t_max();
    const double slo = s(lo), shi = s(hi);
    if (sv < slo - 1e-12 || sv > shi + 1e-12) throw std::out_of_range("s outside the reparametrized span");
    if (sv <= slo) return lo;
    if (sv >= shi) return hi;
    double t = lo + (hi - lo) * (sv - slo) / (shi - slo);
    for (int it = 0; it < 200; ++it) {
      const double f = s(t) - sv;
      if (f > 0.0) hi = t; else lo = t;
      if (std::abs(f) <= 1e-15 * std::max(1.0, std::abs(sv))) break;
      double nt = t - f / rate(t);
      if (!(nt > lo && nt < hi)) nt = 0.5 * (lo + hi);
      if (nt == t || hi - lo <= 1e-15 * std::max(1.0, std::abs(t))) break;
      t = nt;
    }
    return t;
  }

  /// gamma_1(s) = gamma(t(s)); the heading is unchanged by the conformal change.
  PhaseState state(double sv) const { return traj_.state(t_of_s(sv)); }

  /// s at the trajectory's sample times.
  std::vector<double> sample_s() const {
    std::vector<double> out;
    for (double t : traj_.sample_times()) out.push_back(s(t));
    return out;
  }

  /// min over samples of ds/dt.
  double min_rate() const {
    double m = std::numeric_limits<double>::infinity();
    for (double t : traj_.sample_times()) m = std::min(m, rate(t));
    return m;
  }

  /// Thermostat residual of gamma_1 for the transformed system at parameter s.
  double transformed_residual(const ThermostatSystem& transformed, double sv, double ds = 1e-5) const {
    const double c = std::clamp(sv, s_min() + 2.0 * ds, s_max() - 2.0 * ds);
    return covariant_residual(transformed, [this](double q) { return state(q); }, c, ds);
  }

 private:
  Trajectory traj_;
  SpectralScalarField U_;
  DenseTrack<1> s_;
  double origin_;
};

inline TimeChange time_change(const Trajectory& traj, const SpectralScalarField& U, double tol = 1e-13) {
  const double t0 = std::clamp(0.0, traj.t_min(), traj.t_max());
  auto rhs = [&](double t, const StateVec<1>&, StateVec<1>& ds) { ds[0] = std::exp(-U(traj.state(t).x)); };
  DenseTrack<1> track;
  const auto io = integrator_options(tol);
  auto keep = [&](const DenseStep<1>& st) {
    track.append(st);
    return true;
  };
  if (traj.t_max() > t0) integrate_dopri5<1>(rhs, t0, StateVec<1>{0.0}, traj.t_max(), io, keep);
  if (traj.t_min() < t0) integrate_dopri5<1>(rhs, t0, StateVec<1>{0.0}, traj.t_min(), io, keep);
  track.finalize();
  return TimeChange(traj, U, std::move(track), t0);
}

struct CorrespondenceOptions {
  double match_tol = 1e-6;
  ConjugateOptions conjugate{1e-12, 1e-12};
  double trajectory_tol = 1e-12;
};

/// Conjugate-point scans of a system and its gauge transform from the same
/// phase point, with the original zeros mapped through t -> s(t).
struct CorrespondenceRecord {
  ConjugateReport original;
  ConjugateReport transformed;
  std::vector<double> mapped;  // s(t_i) for the original zeros
  double s_horizon = 0.0;
  double max_mismatch = 0.0;
  bool both_free = false;
  bool passed = false;
};

inline CorrespondenceRecord conjugacy_correspondence(const GaugeTransform& gauge, const PhaseState& start,
                                                     double horizon, const CorrespondenceOptions& opt = {}) {
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  CorrespondenceRecord rec;
  rec.original = first_conjugate_time(gauge.source(), start, horizon, opt.conjugate);
  const auto traj = evolve_span(gauge.source(), start, 0.0, horizon, integrator_options(opt.trajectory_tol));
  const auto tc = time_change(traj, gauge.U());
  rec.s_horizon = tc.s(horizon);
  rec.transformed = first_conjugate_time(gauge.transformed(), start, rec.s_horizon, opt.conjugate);
  for (double t : rec.original.zeros) rec.mapped.push_back(tc.s(t));

  // Zeros within match_tol of the horizon may fall on either side of it.
  auto inner = [&](const std::vector<double>& z, double end) {
    std::vector<double> out;
    for (double v : z)
      if (v < end - opt.match_tol) out.push_back(v);
    return out;
  };
  const auto a = inner(rec.mapped, rec.s_horizon);
  const auto b = inner(rec.transformed.zeros, rec.s_horizon);
  rec.both_free = rec.original.zero_count == 0 && rec.transformed.zero_count == 0;
  bool ok = a.size() == b.size();
  for (std::size_t i = 0; ok && i < a.size(); ++i) rec.max_mismatch = std::max(rec.max_mismatch, std::abs(a[i] - b[i]));
  if (a.size() != b.size()) rec.max_mismatch = std::numeric_limits<double>::infinity();
  rec.passed = ok && rec.max_mismatch <= opt.match_tol;
  return rec;
}

inline CorrespondenceRecord conjugacy_correspondence(const ThermostatSystem& sys, Point x, double theta,
                                                     double horizon, const CorrespondenceOptions& opt = {}) {
  return conjugacy_correspondence(solve_gauge(sys), {x, theta}, horizon, opt);
}

}  // namespace thermo

#endif  // THERMO_GAUGE_HPP
