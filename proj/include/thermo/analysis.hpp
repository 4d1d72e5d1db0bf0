#ifndef THERMO_ANALYSIS_HPP
#define THERMO_ANALYSIS_HPP

// Quadrature for the Liouville measure d mu = e^{2 phi} dx1 dx2 dtheta on the
// unit circle bundle and the integral identities behind Hopf rigidity on T^2.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "thermo/gauge.hpp"
#include "thermo/hopf.hpp"
#include "thermo/parallel.hpp"

namespace thermo {

/// Uniform product grid on (x1, x2, theta) with weights
/// e^{2 phi(x)} (2 pi / n_x)^2 (2 pi / n_theta).
class PhaseQuadrature {
 public:
  PhaseQuadrature(const ConformalMetric& metric, int n_x, int n_theta) : nx_(n_x), nt_(n_theta) {
    if (n_x < 1 || n_theta < 1) throw std::invalid_argument("quadrature resolutions must be positive");
    const double cell = (kTwoPi / nx_) * (kTwoPi / nx_);
    w_.resize(static_cast<std::size_t>(nx_) * nx_);
    for (int i = 0; i < nx_; ++i)
      for (int j = 0; j < nx_; ++j)
        w_[static_cast<std::size_t>(i) * nx_ + j] = std::exp(2.0 * metric.phi()(point(i, j))) * cell;
  }
  PhaseQuadrature(const ThermostatSystem& sys, int n_x, int n_theta) : PhaseQuadrature(sys.metric(), n_x, n_theta) {}

  int n_x() const { return nx_; }
  int n_theta() const { return nt_; }
  std::size_t size() const { return w_.size() * static_cast<std::size_t>(nt_); }

  Point point(int i, int j) const { return {kTwoPi * i / nx_, kTwoPi * j / nx_}; }
  double theta(int k) const { return kTwoPi * k / nt_; }
  PhaseState node(int i, int j, int k) const { return {point(i, j), theta(k)}; }
  /// Node with flat index ((i n_x) + j) n_theta + k.
  PhaseState node(std::size_t flat) const {
    const int k = static_cast<int>(flat % static_cast<std::size_t>(nt_));
    const std::size_t ij = flat / static_cast<std::size_t>(nt_);
    return node(static_cast<int>(ij / static_cast<std::size_t>(nx_)), static_cast<int>(ij % static_cast<std::size_t>(nx_)),
                k);
  }

  double area_weight(int i, int j) const { return w_[static_cast<std::size_t>(i) * nx_ + j]; }
  double weight(int i, int j) const { return area_weight(i, j) * (kTwoPi / nt_); }
  double weight(std::size_t flat) const { return w_[flat / static_cast<std::size_t>(nt_)] * (kTwoPi / nt_); }

  /// Area_g(T^2).
  double area() const {
    double s = 0.0;
    for (double w : w_) s += w;
    return s;
  }
  /// mu(ST^2) = 2 pi Area_g.
  double total_measure() const { return kTwoPi * area(); }

 private:
  int nx_, nt_;
  std::vector<double> w_;
};

/// Several Liouville integrals in one sweep. fn receives the LocalGeometry of
/// each node and returns std::array<double, M>. Rows of the x1 index are
/// summed independently and then added in row order.
template <std::size_t M, class Fn>
std::array<double, M> liouville_integrals(const ThermostatSystem& sys, const PhaseQuadrature& quad, Fn&& fn,
                                          int workers = 1) {
  const int nx = quad.n_x(), nt = quad.n_theta();
  std::vector<std::array<double, M>> rows(static_cast<std::size_t>(nx));
  parallel_for(static_cast<std::size_t>(nx), workers, [&](std::size_t i) {
    std::array<double, M> acc{};
    for (int j = 0; j < nx; ++j) {
      const Point x = quad.point(static_cast<int>(i), j);
      const SpatialJets jets = sys.jets(x);
      const double w = quad.weight(static_cast<int>(i), j);
      std::array<double, M> cell{};
      for (int k = 0; k < nt; ++k) {
        const LocalGeometry g(jets, quad.theta(k));
        const std::array<double, M> v = fn(g, PhaseState{x, quad.theta(k)});
        for (std::size_t m = 0; m < M; ++m) cell[m] += v[m];
      }
      for (std::size_t m = 0; m < M; ++m) acc[m] += w * cell[m];
    }
    rows[i] = acc;
  });
  std::array<double, M> total{};
  for (const auto& r : rows)
    for (std::size_t m = 0; m < M; ++m) total[m] += r[m];
  return total;
}

/// Weighted sum of the integrand over the product grid. The integrand takes
/// either a PhaseState or a LocalGeometry.
template <class F>
double liouville_integral(const ThermostatSystem& sys, F&& integrand, const PhaseQuadrature& quad, int workers = 1) {
  return liouville_integrals<1>(
      sys, quad,
      [&](const LocalGeometry& g, const PhaseState& s) -> std::array<double, 1> {
        if constexpr (std::is_invocable_v<F&, const LocalGeometry&>)
          return {integrand(g)};
        else
          return {integrand(s)};
      },
      workers)[0];
}

/// Two sides of an integral identity. For sampled identities the standard
/// error of the difference is attached.
struct IdentityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double difference = 0.0;
  std::optional<double> standard_error;
  bool sampled = false;
};

/// sup over the grid of a pointwise identity's residual.
struct PointwiseCheck {
  std::string name;
  double residual = 0.0;
  bool applies = true;  // the identity is claimed only for pure thermostats
};

struct SampledNode {
  PhaseState state;
  double weight = 0.0;
  bool converged = false;
  double r = std::numeric_limits<double>::quiet_NaN();
  double r_dot = std::numeric_limits<double>::quiet_NaN();  // F(r)
  double v_lambda = 0.0;
  std::string failure;
};

struct IdentityOptions {
  int workers = 1;
  /// Nodes drawn for the identities involving r; zero skips them.
  int sampled_nodes = 256;
  std::uint64_t seed = 1;
  HopfOptions hopf = {.b0 = 8.0, .b_max = 1024.0, .tol = 1e-4, .window = 0.1, .dt = 0.025};
};

struct IdentityReport {
  int n_x = 0;
  int n_theta = 0;
  double total_measure = 0.0;
  std::vector<IdentityCheck> integrals;    // full grid, no r
  std::vector<PointwiseCheck> pointwise;   // full grid
  std::vector<IdentityCheck> r_integrals;  // sampled nodes
  std::vector<SampledNode> nodes;
  int excluded = 0;

  const IdentityCheck& integral(const std::string& name) const {
    for (const auto& c : integrals)
      if (c.name == name) return c;
    for (const auto& c : r_integrals)
      if (c.name == name) return c;
    throw std::out_of_range("no identity named " + name);
  }
  const PointwiseCheck& pointwise_check(const std::string& name) const {
    for (const auto& c : pointwise)
      if (c.name == name) return c;
    throw std::out_of_range("no pointwise identity named " + name);
  }
  /// Largest |difference| over the r-free integral identities.
  double max_r_free_difference() const {
    double m = 0.0;
    for (const auto& c : integrals) m = std::max(m, std::abs(c.difference));
    return m;
  }

  /// Columns x1, x2, theta, weight, converged, r, F_r, V_lambda.
  void write_nodes_csv(std::ostream& os) const {
    os << "x1,x2,theta,weight,converged,r,F_r,V_lambda\n";
    os << std::setprecision(17);
    for (const auto& n : nodes)
      os << n.state.x.x1 << ',' << n.state.x.x2 << ',' << n.state.theta << ',' << n.weight << ','
         << (n.converged ? 1 : 0) << ',' << n.r << ',' << n.r_dot << ',' << n.v_lambda << '\n';
  }
};

namespace detail {

inline IdentityCheck make_check(std::string name, double lhs, double rhs) {
  return {std::move(name), lhs, rhs, lhs - rhs, std::nullopt, false};
}

/// Index of `t` in the profile's sample grid.
inline std::size_t profile_index(const RiccatiProfile& p, double t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (std::abs(p.times()[i] - t) < std::abs(p.times()[best] - t)) best = i;
  return best;
}

inline void evaluate_node(const ThermostatSystem& sys, SampledNode& node, const HopfOptions& hopt) {
  node.v_lambda = v_lambda(sys, node.state);
  try {
    const RiccatiProfile p = hopf_profile(sys, node.state, hopt, 0.0);
    const std::size_t c = profile_index(p, 0.0);
    if (c < 2 || c + 2 >= p.size()) throw std::invalid_argument("profile window too short for F(r)");
    const auto& r = p.r();
    for (std::size_t i = c - 2; i <= c + 2; ++i)
      if (!p.valid(i)) throw std::runtime_error("masked Riccati sample near the node");
    const double h = p.times()[c + 1] - p.times()[c];
    node.r = r[c];
    node.r_dot = (r[c - 2] - 8.0 * r[c - 1] + 8.0 * r[c + 1] - r[c + 2]) / (12.0 * h);
    node.converged = true;
  } catch (const std::exception& ex) {
    node.converged = false;
    node.failure = ex.what();
  }
}

/// Estimates N * mean(w g) over uniformly drawn nodes of an N-node grid.
struct SampleMean {
  double sum = 0.0, sum_sq = 0.0;
  int n = 0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  double estimate(double scale) const { return n > 0 ? scale * sum / n : 0.0; }
  double standard_error(double scale) const {
    if (n < 2) return std::numeric_limits<double>::infinity();
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1));
    return scale * std::sqrt(var / n);
  }
};

}  // namespace detail

/// Integral identities on the full grid, pointwise identities on the spatial
/// grid, and the identities involving the Hopf solution r on a random sample
/// of nodes (nodes where the Hopf limit fails are excluded and counted).
inline IdentityReport identity_suite(const ThermostatSystem& sys, const PhaseQuadrature& quad,
                                     const IdentityOptions& opt = {}) {
  IdentityReport rep;
  rep.n_x = quad.n_x();
  rep.n_theta = quad.n_theta();
  rep.total_measure = quad.total_measure();

  // theta_x(v) = <e, v> = -V(lambda), so V(theta_x(v)) = -V^2(lambda).
  const auto I = liouville_integrals<9>(
      sys, quad,
      [](const LocalGeometry& g, const PhaseState&) -> std::array<double, 9> {
        const double l = g.lambda(), vl = g.v_lambda(), v2l = g.v2_lambda(), f = g.jets().f.value;
        const double v_theta = -v2l;
        return {g.h_lambda(), vl, g.curvature(), f * v_theta, vl * vl, l * v2l, l * (v2l + l), f * f + f * v_theta,
                vl * vl - l * l};
      },
      opt.workers);
  rep.integrals.push_back(detail::make_check("H_lambda", I[0], 0.0));
  rep.integrals.push_back(detail::make_check("V_lambda", I[1], 0.0));
  rep.integrals.push_back(detail::make_check("gauss_bonnet", I[2], 0.0));
  rep.integrals.push_back(detail::make_check("f_V_theta", I[3], 0.0));
  rep.integrals.push_back(detail::make_check("V_lambda_squared", I[4], -I[5]));
  rep.integrals.push_back(detail::make_check("lambda_f_split", I[6], I[7]));
  const double rhs_integrated = I[8];

  // Pointwise: lambda^2 = -lambda V^2(lambda) and H(lambda) - X(V(lambda)) = div e,
  // both stated for f = 0.
  const int nx = quad.n_x(), nt = quad.n_theta();
  std::vector<std::array<double, 2>> rows(static_cast<std::size_t>(nx));
  parallel_for(static_cast<std::size_t>(nx), opt.workers, [&](std::size_t i) {
    std::array<double, 2> m{};
    for (int j = 0; j < nx; ++j) {
      const SpatialJets jets = sys.jets(quad.point(static_cast<int>(i), j));
      for (int k = 0; k < nt; ++k) {
        const LocalGeometry g(jets, quad.theta(k));
        const double l = g.lambda();
        m[0] = std::max(m[0], std::abs(l * l + l * g.v2_lambda()));
        m[1] = std::max(m[1], std::abs(g.h_lambda() - g.x_v_lambda() - g.divergence_e()));
      }
    }
    rows[i] = m;
  });
  std::array<double, 2> pw{};
  for (const auto& m : rows) pw = {std::max(pw[0], m[0]), std::max(pw[1], m[1])};
  rep.pointwise.push_back({"lambda_squared", pw[0], sys.is_pure()});
  rep.pointwise.push_back({"H_minus_XV_div_e", pw[1], sys.is_pure()});

  if (opt.sampled_nodes > 0) {
    const std::size_t total = quad.size();
    std::mt19937_64 gen(opt.seed);
    rep.nodes.resize(static_cast<std::size_t>(opt.sampled_nodes));
    for (auto& n : rep.nodes) {
      const std::size_t flat = static_cast<std::size_t>(gen() % total);
      n.state = quad.node(flat);
      n.weight = quad.weight(flat);
    }
    parallel_for(rep.nodes.size(), opt.workers,
                 [&](std::size_t i) { detail::evaluate_node(sys, rep.nodes[i], opt.hopf); });

    detail::SampleMean lhs, rhs, diff, sq;
    for (const auto& n : rep.nodes) {
      if (!n.converged) {
        ++rep.excluded;
        continue;
      }
      const double a = n.weight * n.r_dot, b = -n.weight * n.r * n.v_lambda;
      lhs.add(a);
      rhs.add(b);
      diff.add(a - b);
      sq.add(n.weight * (n.r - n.v_lambda) * (n.r - n.v_lambda));
    }
    // Converged nodes stand in for the whole grid.
    const double scale = static_cast<double>(total);
    IdentityCheck stokes{"F_r_stokes", lhs.estimate(scale), rhs.estimate(scale), diff.estimate(scale),
                         diff.standard_error(scale), true};
    IdentityCheck integrated{"integrated_riccati", sq.estimate(scale), rhs_integrated,
                             sq.estimate(scale) - rhs_integrated, sq.standard_error(scale), true};
    rep.r_integrals.push_back(stokes);
    rep.r_integrals.push_back(integrated);
  }
  return rep;
}

struct RigidityThresholds {
  double f_norm = 1e-8;
  double flatness = 1e-8;
  double divergence = 1e-8;
};

struct RigidityOptions {
  RigidityThresholds thresholds;
  GaugeOptions gauge;
  int n_x = 32;
  int n_theta = 32;
  int workers = 1;
};

struct RigidityReport {
  std::vector<IdentityCheck> integrals;
  double f_norm = 0.0;
  double flatness_residual = 0.0;        // oscillation of phi_1
  double divergence_residual = 0.0;      // sup |div_{g1} e1|
  double poisson_residual = 0.0;
  double curvature_minus_div_e = 0.0;    // sup |K_1 - div_{g1} e1| on the normalized system
  bool f_vanishes = false;
  bool metric_flat = false;
  bool divergence_free = false;
  bool rigid_compatible = false;
  RigidityThresholds thresholds;

  std::string verdict() const { return rigid_compatible ? "rigid-compatible" : "incompatible"; }
};

/// Normalizes the gauge and checks the conditions of Hopf rigidity: f = 0,
/// g_1 flat, e_1 divergence free.
inline RigidityReport rigidity_report(const ThermostatSystem& sys, const RigidityOptions& opt = {}) {
  RigidityReport rep;
  rep.thresholds = opt.thresholds;
  const int n = opt.gauge.verify_grid;
  rep.f_norm = sys.f().grid_sup_norm(n);
  const GaugeTransform gauge = solve_gauge(sys, opt.gauge);
  rep.flatness_residual = gauge.flatness_residual();
  rep.divergence_residual = gauge.transformed_divergence_residual();
  rep.poisson_residual = gauge.poisson_residual();
  const auto& t = gauge.transformed();
  rep.curvature_minus_div_e = detail::grid_max(n, [&](Point x) {
    const SpatialJets j = t.jets(x);
    return conformal_curvature(j.phi) - metric_divergence(j.e1, j.e2, j.phi);
  });
  rep.f_vanishes = rep.f_norm < opt.thresholds.f_norm;
  rep.metric_flat = rep.flatness_residual < opt.thresholds.flatness;
  rep.divergence_free = rep.divergence_residual < opt.thresholds.divergence;
  rep.rigid_compatible = rep.f_vanishes && rep.metric_flat && rep.divergence_free;

  IdentityOptions io;
  io.workers = opt.workers;
  io.sampled_nodes = 0;
  rep.integrals = identity_suite(sys, PhaseQuadrature(sys, opt.n_x, opt.n_theta), io).integrals;
  return rep;
}

}  // namespace thermo

#endif  // THERMO_ANALYSIS_HPP
