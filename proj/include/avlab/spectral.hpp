#pragma once

#include <cmath>
#include <complex>
#include <cstring>
#include <mutex>
#include <numbers>
#include <vector>

#include <fftw3.h>

#include "error.hpp"

namespace avlab::spectral {

using cplx = std::complex<double>;

namespace detail {

// FFTW planning is not thread safe.
inline std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

template <class T>
struct FftwDeleter {
  void operator()(T* p) const { fftw_free(p); }
};

}  // namespace detail

// Periodic N x N grid on [0,1)^2 with real-to-half-complex transforms.
// Physical arrays are row-major with x1 fastest: index i2*N + i1.
// Spectral arrays hold modes j2*(N/2+1) + j1 with k1 = j1, k2 = j2 or j2-N.
class Grid {
 public:
  explicit Grid(int n) : n_(n), nh_(n / 2 + 1) {
    if (n < 4 || n % 2) throw ConfigError("grid size must be even and at least 4");
    real_ = static_cast<double*>(fftw_malloc(sizeof(double) * n_ * n_));
    spec_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_ * nh_));
    std::lock_guard lock(detail::plan_mutex());
    // FFTW_ESTIMATE keeps plans, and hence results, reproducible run to run.
    fwd_ = fftw_plan_dft_r2c_2d(n_, n_, real_, spec_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_2d(n_, n_, spec_, real_, FFTW_ESTIMATE);
    kmax_dealias_ = n_ / 3;
  }
  Grid(const Grid& o) : Grid(o.n_) {}
  Grid& operator=(const Grid&) = delete;
  ~Grid() {
    std::lock_guard lock(detail::plan_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  int n() const { return n_; }
  int nh() const { return nh_; }
  std::size_t real_size() const { return static_cast<std::size_t>(n_) * n_; }
  std::size_t spec_size() const { return static_cast<std::size_t>(n_) * nh_; }
  double dx() const { return 1.0 / n_; }

  int k2_of(int j2) const { return j2 <= n_ / 2 ? j2 : j2 - n_; }

  std::vector<double> real_buffer() const { return std::vector<double>(real_size(), 0.0); }
  std::vector<cplx> spec_buffer() const { return std::vector<cplx>(spec_size(), cplx{}); }

  // Normalized so that the (0,0) coefficient is the spatial mean.
  void forward(const double* in, cplx* out) const {
    std::memcpy(real_, in, sizeof(double) * real_size());
    fftw_execute(fwd_);
    const double s = 1.0 / static_cast<double>(real_size());
    auto* sp = reinterpret_cast<const cplx*>(spec_);
    for (std::size_t i = 0; i < spec_size(); ++i) out[i] = sp[i] * s;
  }

  void inverse(const cplx* in, double* out) const {
    std::memcpy(spec_, in, sizeof(cplx) * spec_size());
    fftw_execute(bwd_);
    std::memcpy(out, real_, sizeof(double) * real_size());
  }

  void forward(const std::vector<double>& in, std::vector<cplx>& out) const {
    out.resize(spec_size());
    forward(in.data(), out.data());
  }
  void inverse(const std::vector<cplx>& in, std::vector<double>& out) const {
    out.resize(real_size());
    inverse(in.data(), out.data());
  }

  bool keep(int j1, int j2) const {
    return j1 <= kmax_dealias_ && std::abs(k2_of(j2)) <= kmax_dealias_;
  }

  // 2/3-rule truncation.
  void dealias(cplx* a) const {
    for (int j2 = 0; j2 < n_; ++j2)
      for (int j1 = 0; j1 < nh_; ++j1)
        if (!keep(j1, j2)) a[j2 * nh_ + j1] = 0.0;
  }
  void dealias(std::vector<cplx>& a) const { dealias(a.data()); }

  // Hermitian symmetry on the self-conjugate lines j1 = 0 and j1 = N/2.
  void enforce_hermitian(cplx* a) const {
    for (int j1 : {0, n_ / 2}) {
      for (int j2 = 1; j2 < n_ / 2; ++j2) {
        cplx& p = a[j2 * nh_ + j1];
        cplx& q = a[(n_ - j2) * nh_ + j1];
        cplx avg = 0.5 * (p + std::conj(q));
        p = avg;
        q = std::conj(avg);
      }
      for (int j2 : {0, n_ / 2}) a[j2 * nh_ + j1].imag(0.0);
    }
  }

  // d/dx_axis in spectral space (axis 0 = x1, axis 1 = x2); Nyquist modes dropped.
  void derivative(const cplx* in, cplx* out, int axis) const {
    const double tp = 2.0 * std::numbers::pi;
    for (int j2 = 0; j2 < n_; ++j2) {
      int k2 = k2_of(j2);
      for (int j1 = 0; j1 < nh_; ++j1) {
        int k = axis == 0 ? j1 : k2;
        bool nyq = j1 == n_ / 2 || j2 == n_ / 2;
        std::size_t i = static_cast<std::size_t>(j2) * nh_ + j1;
        out[i] = nyq ? cplx{} : in[i] * cplx(0.0, tp * k);
      }
    }
  }

  double k_sq(int j1, int j2) const {
    double k2 = k2_of(j2);
    return static_cast<double>(j1) * j1 + k2 * k2;
  }

  // Weight of a half-spectrum entry in full-spectrum sums.
  double hermitian_weight(int j1) const { return (j1 == 0 || j1 == n_ / 2) ? 1.0 : 2.0; }

  // Mean square over the torus from spectral coefficients.
  double l2_sq(const cplx* a) const {
    double s = 0.0;
    for (int j2 = 0; j2 < n_; ++j2)
      for (int j1 = 0; j1 < nh_; ++j1) s += hermitian_weight(j1) * std::norm(a[j2 * nh_ + j1]);
    return s;
  }

  // Mean of |grad f|^2 over the torus.
  double grad_sq(const cplx* a) const {
    const double tp2 = 4.0 * std::numbers::pi * std::numbers::pi;
    double s = 0.0;
    for (int j2 = 0; j2 < n_; ++j2)
      for (int j1 = 0; j1 < nh_; ++j1)
        s += hermitian_weight(j1) * tp2 * k_sq(j1, j2) * std::norm(a[j2 * nh_ + j1]);
    return s;
  }

  // Value of the trigonometric interpolant at an arbitrary point.
  double eval_at(const cplx* a, double x1, double x2) const {
    const double tp = 2.0 * std::numbers::pi;
    double s = 0.0;
    for (int j2 = 0; j2 < n_; ++j2) {
      int k2 = k2_of(j2);
      for (int j1 = 0; j1 < nh_; ++j1) {
        cplx e = std::polar(1.0, tp * (j1 * x1 + k2 * x2));
        s += hermitian_weight(j1) * (a[j2 * nh_ + j1] * e).real();
      }
    }
    return s;
  }

 private:
  int n_, nh_;
  int kmax_dealias_ = 0;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

// b = perp-grad of the streamfunction: (-d2 phi, d1 phi).
struct Velocity {
  std::vector<double> b1, b2;
};

class VelocityBuilder {
 public:
  explicit VelocityBuilder(const Grid& g) : g_(g), hat_(g.spec_buffer()), d_(g.spec_buffer()) {}

  void from_stream(const double* phi, Velocity& v) {
    g_.forward(phi, hat_.data());
    from_stream_hat(hat_.data(), v);
  }

  void from_stream_hat(const cplx* phi_hat, Velocity& v) {
    v.b1.resize(g_.real_size());
    v.b2.resize(g_.real_size());
    g_.derivative(phi_hat, d_.data(), 1);
    g_.inverse(d_.data(), v.b1.data());
    for (auto& x : v.b1) x = -x;
    g_.derivative(phi_hat, d_.data(), 0);
    g_.inverse(d_.data(), v.b2.data());
  }

 private:
  const Grid& g_;
  std::vector<cplx> hat_, d_;
};

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace avlab::spectral
