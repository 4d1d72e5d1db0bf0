#ifndef THERMO_FIELDS_HPP
#define THERMO_FIELDS_HPP

// Doubly periodic fields on T^2 = R^2 / (2 pi Z)^2 stored as truncated Fourier
// series, and the geometric calculus of a conformally flat metric
// g = exp(2 phi) (dx1^2 + dx2^2).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace thermo {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Largest bandwidth a field may carry. Evaluation uses fixed stack tables of
/// this size so pointwise calls never allocate.
inline constexpr int kMaxBandwidth = 256;

struct Point {
  double x1 = 0.0;
  double x2 = 0.0;
};

/// Tangent vector in Euclidean coordinate components.
struct Vec2 {
  double c1 = 0.0;
  double c2 = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.c1 + b.c1, a.c2 + b.c2}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.c1 - b.c1, a.c2 - b.c2}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.c1, s * a.c2}; }
  friend Vec2 operator*(Vec2 a, double s) { return {s * a.c1, s * a.c2}; }
  double euclidean_dot(Vec2 b) const { return c1 * b.c1 + c2 * b.c2; }
  double euclidean_norm() const { return std::hypot(c1, c2); }
};

/// Value and partial derivatives up to second order at one point.
struct Jet {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d11 = 0.0;
  double d12 = 0.0;
  double d22 = 0.0;
};

/// One real Fourier mode: amplitude * cos(k1 x1 + k2 x2 + phase).
struct FourierTerm {
  int k1 = 0;
  int k2 = 0;
  double amplitude = 0.0;
  double phase = 0.0;
};

/// Real trigonometric polynomial sum_{|k_i| <= N} c_k exp(i k.x) with
/// Hermitian coefficients. Immutable after construction.
class SpectralScalarField {
 public:
  SpectralScalarField() : SpectralScalarField(0) {}

  explicit SpectralScalarField(int bandwidth)
      : n_(check_bandwidth(bandwidth)),
        coef_(static_cast<std::size_t>((2 * n_ + 1) * (2 * n_ + 1))) {
    rebuild_modes();
  }

  /// Builds Hermitian-symmetric coefficients from real cosine terms. Terms
  /// with the same frequency accumulate.
  static SpectralScalarField from_terms(int bandwidth, std::span<const FourierTerm> terms) {
    SpectralScalarField out(bandwidth);
    for (const auto& t : terms) {
      if (std::abs(t.k1) > out.n_ || std::abs(t.k2) > out.n_)
        throw std::invalid_argument("Fourier term (" + std::to_string(t.k1) + ", " +
                                    std::to_string(t.k2) + ") exceeds bandwidth " +
                                    std::to_string(out.n_));
      if (t.k1 == 0 && t.k2 == 0) {
        out.at(0, 0) += t.amplitude * std::cos(t.phase);
        continue;
      }
      const std::complex<double> half = 0.5 * std::polar(t.amplitude, t.phase);
      out.at(t.k1, t.k2) += half;
      out.at(-t.k1, -t.k2) += std::conj(half);
    }
    out.rebuild_modes();
    return out;
  }

  static SpectralScalarField from_terms(int bandwidth, std::initializer_list<FourierTerm> terms) {
    return from_terms(bandwidth, std::span<const FourierTerm>(terms.begin(), terms.size()));
  }

  static SpectralScalarField constant(double c, int bandwidth = 0) {
    SpectralScalarField out(bandwidth);
    out.at(0, 0) = c;
    out.rebuild_modes();
    return out;
  }

  /// Coefficients in row-major (k1, k2) order, each index running -N..N.
  /// The array is symmetrized so that c(-k) = conj(c(k)) holds exactly.
  static SpectralScalarField from_coefficients(int bandwidth,
                                               std::vector<std::complex<double>> coefficients) {
    SpectralScalarField out(bandwidth);
    if (coefficients.size() != out.coef_.size())
      throw std::invalid_argument("coefficient array does not match bandwidth");
    out.coef_ = std::move(coefficients);
    for (int k1 = -out.n_; k1 <= out.n_; ++k1) {
      for (int k2 = -out.n_; k2 <= out.n_; ++k2) {
        if (k1 < 0 || (k1 == 0 && k2 < 0)) continue;
        const auto sym = 0.5 * (out.at(k1, k2) + std::conj(out.at(-k1, -k2)));
        out.at(k1, k2) = sym;
        out.at(-k1, -k2) = std::conj(sym);
      }
    }
    out.rebuild_modes();
    return out;
  }

  int bandwidth() const { return n_; }

  std::complex<double> coefficient(int k1, int k2) const {
    if (std::abs(k1) > n_ || std::abs(k2) > n_) return {0.0, 0.0};
    return coef_[index(k1, k2)];
  }

  std::span<const std::complex<double>> coefficients() const { return coef_; }

  double mean() const { return mean_; }
  bool is_zero() const { return modes_.empty() && mean_ == 0.0; }
  bool is_constant() const { return modes_.empty(); }

  /// Largest |coefficient| among nonzero frequencies.
  double oscillation_amplitude() const {
    double m = 0.0;
    for (const auto& md : modes_) m = std::max(m, 0.5 * std::hypot(md.a, md.b));
    return m;
  }

  double operator()(Point x) const { return jet_impl<false>(x).value; }

  Jet jet(Point x) const { return jet_impl<true>(x); }

  /// Exact partial derivative along axis 1 or 2.
  SpectralScalarField derivative(int axis) const {
    if (axis != 1 && axis != 2) throw std::invalid_argument("axis must be 1 or 2");
    SpectralScalarField out(n_);
    for (int k1 = -n_; k1 <= n_; ++k1)
      for (int k2 = -n_; k2 <= n_; ++k2)
        out.at(k1, k2) = std::complex<double>(0.0, axis == 1 ? k1 : k2) * at(k1, k2);
    out.rebuild_modes();
    return out;
  }

  SpectralScalarField laplacian() const {
    SpectralScalarField out(n_);
    for (int k1 = -n_; k1 <= n_; ++k1)
      for (int k2 = -n_; k2 <= n_; ++k2)
        out.at(k1, k2) = -static_cast<double>(k1 * k1 + k2 * k2) * at(k1, k2);
    out.rebuild_modes();
    return out;
  }

  /// Same function on a larger coefficient array, or truncated to a smaller one.
  SpectralScalarField with_bandwidth(int bandwidth) const {
    SpectralScalarField out(bandwidth);
    const int m = std::min(n_, out.n_);
    for (int k1 = -m; k1 <= m; ++k1)
      for (int k2 = -m; k2 <= m; ++k2) out.at(k1, k2) = at(k1, k2);
    out.rebuild_modes();
    return out;
  }

  /// Real cosine terms reproducing this field; frequencies on the upper half
  /// plane only, zero coefficients skipped.
  std::vector<FourierTerm> terms(double drop_below = 0.0) const {
    std::vector<FourierTerm> out;
    if (std::abs(mean_) > drop_below || (mean_ != 0.0 && drop_below == 0.0))
      out.push_back({0, 0, mean_, 0.0});
    for (int k1 = 0; k1 <= n_; ++k1) {
      for (int k2 = -n_; k2 <= n_; ++k2) {
        if (k1 == 0 && k2 <= 0) continue;
        const auto c = at(k1, k2);
        const double amp = 2.0 * std::abs(c);
        if (amp == 0.0 || amp <= drop_below) continue;
        out.push_back({k1, k2, amp, std::arg(c)});
      }
    }
    return out;
  }

  /// max |field| over a uniform n x n grid.
  double grid_sup_norm(int n) const {
    double m = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        m = std::max(m, std::abs((*this)({kTwoPi * i / n, kTwoPi * j / n})));
    return m;
  }

  friend SpectralScalarField operator+(const SpectralScalarField& a, const SpectralScalarField& b) {
    return combine(a, 1.0, b, 1.0);
  }
  friend SpectralScalarField operator-(const SpectralScalarField& a, const SpectralScalarField& b) {
    return combine(a, 1.0, b, -1.0);
  }
  friend SpectralScalarField operator*(double s, const SpectralScalarField& a) {
    return combine(a, s, SpectralScalarField(0), 0.0);
  }

 private:
  // Compact evaluation table: c0 + sum over upper half plane of
  // a cos(k.x) + b sin(k.x).
  struct Mode {
    int k1;
    int k2;
    double a;
    double b;
  };

  static int check_bandwidth(int n) {
    if (n < 0 || n > kMaxBandwidth)
      throw std::invalid_argument("bandwidth out of range: " + std::to_string(n));
    return n;
  }

  std::size_t index(int k1, int k2) const {
    return static_cast<std::size_t>((k1 + n_) * (2 * n_ + 1) + (k2 + n_));
  }
  std::complex<double>& at(int k1, int k2) { return coef_[index(k1, k2)]; }
  const std::complex<double>& at(int k1, int k2) const { return coef_[index(k1, k2)]; }

  static SpectralScalarField combine(const SpectralScalarField& a, double sa,
                                     const SpectralScalarField& b, double sb) {
    SpectralScalarField out(std::max(a.n_, b.n_));
    for (int k1 = -out.n_; k1 <= out.n_; ++k1)
      for (int k2 = -out.n_; k2 <= out.n_; ++k2)
        out.at(k1, k2) = sa * a.coefficient(k1, k2) + sb * b.coefficient(k1, k2);
    out.rebuild_modes();
    return out;
  }

  void rebuild_modes() {
    modes_.clear();
    mean_ = coef_[index(0, 0)].real();
    kmax1_ = 0;
    kmax2_ = 0;
    for (int k1 = 0; k1 <= n_; ++k1) {
      for (int k2 = -n_; k2 <= n_; ++k2) {
        if (k1 == 0 && k2 <= 0) continue;
        const auto c = at(k1, k2);
        if (c == std::complex<double>(0.0, 0.0)) continue;
        modes_.push_back({k1, k2, 2.0 * c.real(), -2.0 * c.imag()});
        kmax1_ = std::max(kmax1_, k1);
        kmax2_ = std::max(kmax2_, std::abs(k2));
      }
    }
  }

  static void fill_trig(double x, int kmax, double* c, double* s) {
    c[0] = 1.0;
    s[0] = 0.0;
    if (kmax == 0) return;
    const double cx = std::cos(x);
    const double sx = std::sin(x);
    c[1] = cx;
    s[1] = sx;
    for (int k = 2; k <= kmax; ++k) {
      c[k] = c[k - 1] * cx - s[k - 1] * sx;
      s[k] = s[k - 1] * cx + c[k - 1] * sx;
    }
  }

  template <bool Derivatives>
  Jet jet_impl(Point x) const {
    Jet j;
    j.value = mean_;
    if (modes_.empty()) return j;
    // cos/sin(k x) tables built by angle addition; left uninitialized past
    // the entries in use.
    double c1[kMaxBandwidth + 1];
    double s1[kMaxBandwidth + 1];
    double c2[kMaxBandwidth + 1];
    double s2[kMaxBandwidth + 1];
    fill_trig(x.x1, kmax1_, c1, s1);
    fill_trig(x.x2, kmax2_, c2, s2);
    for (const auto& m : modes_) {
      // exp(i (k1 x1 + k2 x2)) with k1 >= 0 and sin(-k x) = -sin(k x).
      const double ca = c1[m.k1];
      const double sa = s1[m.k1];
      const double cb = c2[m.k2 < 0 ? -m.k2 : m.k2];
      const double sb = m.k2 < 0 ? -s2[-m.k2] : s2[m.k2];
      const double c = ca * cb - sa * sb;
      const double s = sa * cb + ca * sb;
      const double val = m.a * c + m.b * s;
      j.value += val;
      if constexpr (Derivatives) {
        const double dval = -m.a * s + m.b * c;  // d/d(k.x)
        j.d1 += m.k1 * dval;
        j.d2 += m.k2 * dval;
        j.d11 -= m.k1 * m.k1 * val;
        j.d12 -= m.k1 * m.k2 * val;
        j.d22 -= m.k2 * m.k2 * val;
      }
    }
    return j;
  }

  int n_;
  std::vector<std::complex<double>> coef_;
  std::vector<Mode> modes_;
  double mean_ = 0.0;
  int kmax1_ = 0;
  int kmax2_ = 0;
};

/// Vector field with Euclidean coordinate components (e1, e2), both on the
/// same bandwidth.
class SpectralVectorField {
 public:
  SpectralVectorField() = default;
  SpectralVectorField(SpectralScalarField c1, SpectralScalarField c2) {
    const int n = std::max(c1.bandwidth(), c2.bandwidth());
    c1_ = c1.bandwidth() == n ? std::move(c1) : c1.with_bandwidth(n);
    c2_ = c2.bandwidth() == n ? std::move(c2) : c2.with_bandwidth(n);
  }

  static SpectralVectorField constant(double e1, double e2, int bandwidth = 0) {
    return {SpectralScalarField::constant(e1, bandwidth), SpectralScalarField::constant(e2, bandwidth)};
  }

  const SpectralScalarField& c1() const { return c1_; }
  const SpectralScalarField& c2() const { return c2_; }
  int bandwidth() const { return c1_.bandwidth(); }
  bool is_zero() const { return c1_.is_zero() && c2_.is_zero(); }
  Vec2 operator()(Point x) const { return {c1_(x), c2_(x)}; }

 private:
  SpectralScalarField c1_;
  SpectralScalarField c2_;
};

/// g = exp(2 phi) * identity.
class ConformalMetric {
 public:
  ConformalMetric() = default;
  explicit ConformalMetric(SpectralScalarField phi) : phi_(std::move(phi)) {}

  static ConformalMetric flat(double c = 0.0) { return ConformalMetric(SpectralScalarField::constant(c)); }

  const SpectralScalarField& phi() const { return phi_; }

  /// exp(2 phi(x)): the metric coefficient and area density.
  double scale(Point x) const { return std::exp(2.0 * phi_(x)); }

  double inner(Point x, Vec2 a, Vec2 b) const { return scale(x) * a.euclidean_dot(b); }
  double norm(Point x, Vec2 a) const { return std::exp(phi_(x)) * a.euclidean_norm(); }

  /// Flat exactly when phi is constant (harmonic functions on the torus).
  bool is_flat() const { return phi_.is_constant(); }

 private:
  SpectralScalarField phi_;
};

// -- jet-level formulas shared by the pointwise operations and the dynamics --

/// exp(-2 phi) (du/dx1, du/dx2).
inline Vec2 metric_gradient(const Jet& u, const Jet& phi) {
  const double s = std::exp(-2.0 * phi.value);
  return {s * u.d1, s * u.d2};
}

/// exp(-2 phi) div_eucl(exp(2 phi) v) = div_eucl v + 2 grad(phi).v
inline double metric_divergence(const Jet& v1, const Jet& v2, const Jet& phi) {
  return v1.d1 + v2.d2 + 2.0 * (phi.d1 * v1.value + phi.d2 * v2.value);
}

/// Covariant derivative of v along w using the conformal Christoffel symbols
/// G^1_11 = phi_1, G^1_12 = phi_2, G^1_22 = -phi_1,
/// G^2_11 = -phi_2, G^2_12 = phi_1, G^2_22 = phi_2.
inline Vec2 metric_covariant_derivative(const Jet& v1, const Jet& v2, Vec2 w, const Jet& phi) {
  const double p1 = phi.d1;
  const double p2 = phi.d2;
  const double a1 = v1.value;
  const double a2 = v2.value;
  const double r1 = w.c1 * v1.d1 + w.c2 * v1.d2 + p1 * w.c1 * a1 + p2 * (w.c1 * a2 + w.c2 * a1) -
                    p1 * w.c2 * a2;
  const double r2 = w.c1 * v2.d1 + w.c2 * v2.d2 - p2 * w.c1 * a1 + p1 * (w.c1 * a2 + w.c2 * a1) +
                    p2 * w.c2 * a2;
  return {r1, r2};
}

/// K = -exp(-2 phi) Laplacian(phi).
inline double conformal_curvature(const Jet& phi) {
  return -std::exp(-2.0 * phi.value) * (phi.d11 + phi.d22);
}

// -- pointwise operations --

inline double evaluate(const SpectralScalarField& field, Point x) { return field(x); }

inline Vec2 gradient(const SpectralScalarField& field, const ConformalMetric& metric, Point x) {
  return metric_gradient(field.jet(x), metric.phi().jet(x));
}

inline double divergence(const SpectralVectorField& v, const ConformalMetric& metric, Point x) {
  return metric_divergence(v.c1().jet(x), v.c2().jet(x), metric.phi().jet(x));
}

inline double gauss_curvature(const ConformalMetric& metric, Point x) {
  return conformal_curvature(metric.phi().jet(x));
}

inline Vec2 covariant_derivative(const SpectralVectorField& v, Vec2 direction,
                                 const ConformalMetric& metric, Point x) {
  return metric_covariant_derivative(v.c1().jet(x), v.c2().jet(x), direction, metric.phi().jet(x));
}

}  // namespace thermo

#endif  // THERMO_FIELDS_HPP
