#ifndef THERMO_PROJECTION_HPP
#define THERMO_PROJECTION_HPP

// Projection of smooth doubly-periodic functions onto a Fourier band through
// samples on a uniform M x M grid and real 2-D FFTs (FFTW). Grid index
// (i, j) is the point (2 pi i / M, 2 pi j / M), stored row-major.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "thermo/fields.hpp"

namespace thermo {

struct Projection {
  SpectralScalarField field;
  /// Sum of |c_k| over the resolved modes that were not kept (outside the band
  /// or below the drop threshold). Bounds the sup-norm truncation error up to
  /// aliasing from frequencies beyond the grid's Nyquist limit.
  double tail = 0.0;
  int grid = 0;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

inline int pow2_at_least(int n) {
  int m = 1;
  while (m < n) m *= 2;
  return m;
}

/// Plans are created and destroyed under a lock; execution is thread safe.
class FftwPlan {
 public:
  template <class Make>
  explicit FftwPlan(Make&& make) {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_ = make();
  }
  ~FftwPlan() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

}  // namespace detail

/// Grid size used for a band: a power of two, at least 4 L and at least 16.
inline int projection_grid(int bandwidth) { return detail::pow2_at_least(std::max(16, 4 * bandwidth)); }

/// Values of a field on the M x M grid (M > 2 N).
inline std::vector<double> sample_grid(const SpectralScalarField& f, int M) {
  const int N = f.bandwidth();
  if (M <= 2 * N) throw std::invalid_argument("grid too coarse for the field's band");
  const int Mh = M / 2 + 1;
  std::unique_ptr<fftw_complex, detail::FftwFree> in(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * M * Mh)));
  std::unique_ptr<double, detail::FftwFree> out(static_cast<double*>(fftw_malloc(sizeof(double) * M * M)));
  detail::FftwPlan plan([&] { return fftw_plan_dft_c2r_2d(M, M, in.get(), out.get(), FFTW_ESTIMATE); });
  std::fill(in.get()[0], in.get()[0] + 2 * M * Mh, 0.0);
  for (int k1 = -N; k1 <= N; ++k1)
    for (int k2 = 0; k2 <= N; ++k2) {
      const auto c = f.coefficient(k1, k2);
      auto& slot = in.get()[((k1 % M + M) % M) * Mh + k2];
      slot[0] = c.real();
      slot[1] = c.imag();
    }
  plan.execute();
  return std::vector<double>(out.get(), out.get() + static_cast<std::ptrdiff_t>(M) * M);
}

/// Keeps the modes |k_i| <= bandwidth of the sampled function. Coefficients with
/// modulus at most drop * (largest kept modulus) are discarded and counted in
/// the tail; the field is stored at the smallest bandwidth holding the rest.
inline Projection project_samples(const std::vector<double>& values, int M, int bandwidth, double drop = 1e-15) {
  if (bandwidth < 0 || bandwidth > kMaxBandwidth) throw std::invalid_argument("projection bandwidth out of range");
  if (M < 2 * bandwidth + 2) throw std::invalid_argument("projection grid too coarse for the band");
  if (values.size() != static_cast<std::size_t>(M) * M) throw std::invalid_argument("sample array size mismatch");
  const int Mh = M / 2 + 1;
  std::unique_ptr<double, detail::FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * M * M)));
  std::unique_ptr<fftw_complex, detail::FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * M * Mh)));
  detail::FftwPlan plan([&] { return fftw_plan_dft_r2c_2d(M, M, in.get(), out.get(), FFTW_ESTIMATE); });
  std::copy(values.begin(), values.end(), in.get());
  plan.execute();
  const double norm = 1.0 / (static_cast<double>(M) * M);
  auto coef = [&](int k1, int k2) {
    if (k2 >= 0) {
      const auto& o = out.get()[((k1 % M + M) % M) * Mh + k2];
      return std::complex<double>(o[0], o[1]) * norm;
    }
    const auto& o = out.get()[((-k1 % M + M) % M) * Mh + (-k2)];
    return std::conj(std::complex<double>(o[0], o[1])) * norm;
  };

  const int kmax = M / 2 - 1;  // the Nyquist row and column are not resolved
  double largest = 0.0;
  for (int k1 = -bandwidth; k1 <= bandwidth; ++k1)
    for (int k2 = -bandwidth; k2 <= bandwidth; ++k2) largest = std::max(largest, std::abs(coef(k1, k2)));
  const double cut = drop * largest;

  Projection res;
  res.grid = M;
  int used = 0;
  for (int k1 = -kmax; k1 <= kmax; ++k1)
    for (int k2 = -kmax; k2 <= kmax; ++k2) {
      const double a = std::abs(coef(k1, k2));
      const bool in_band = std::abs(k1) <= bandwidth && std::abs(k2) <= bandwidth;
      if (in_band && a > cut)
        used = std::max({used, std::abs(k1), std::abs(k2)});
      else
        res.tail += a;
    }
  std::vector<std::complex<double>> c(static_cast<std::size_t>((2 * used + 1) * (2 * used + 1)));
  for (int k1 = -used; k1 <= used; ++k1)
    for (int k2 = -used; k2 <= used; ++k2) {
      const auto v = coef(k1, k2);
      c[static_cast<std::size_t>((k1 + used) * (2 * used + 1) + (k2 + used))] = std::abs(v) > cut ? v : 0.0;
    }
  res.field = SpectralScalarField::from_coefficients(used, std::move(c));
  return res;
}

/// Projects a pointwise function.
template <class F>
Projection project(F&& fn, int bandwidth, double drop = 1e-15) {
  const int M = projection_grid(bandwidth);
  std::vector<double> v(static_cast<std::size_t>(M) * M);
  const double h = kTwoPi / M;
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) v[static_cast<std::size_t>(i) * M + j] = fn(Point{i * h, j * h});
  return project_samples(v, M, bandwidth, drop);
}

/// Projects a function given by its samples: `samples(M)` returns the values
/// on the M x M grid. The band starts at L0 and doubles (up to the maximum
/// bandwidth) until the tail is at most `target`.
template <class Samples>
Projection project_adaptive(Samples&& samples, int L0, double target = 1e-13, double drop = 1e-15) {
  int L = std::clamp(L0, 1, kMaxBandwidth);
  for (;;) {
    const int M = projection_grid(L);
    Projection p = project_samples(samples(M), M, L, drop);
    if (p.tail <= target || L == kMaxBandwidth) return p;
    L = std::min(kMaxBandwidth, 2 * L);
  }
}

}  // namespace thermo

#endif  // THERMO_PROJECTION_HPP
