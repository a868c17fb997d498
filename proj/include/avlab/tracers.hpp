#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "fieldgen.hpp"
#include "rng.hpp"
#include "spectral.hpp"

namespace avlab::tracers {

using json = nlohmann::json;
using spectral::cplx;
using spectral::Grid;

inline double wrap01(double x) { return x - std::floor(x); }

// Pairwise summation in fixed order.
inline double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}
inline double pairwise_sum(const std::vector<double>& v) { return pairwise_sum(v.data(), v.size()); }

enum class Interp { bilinear, bicubic, spectral };

inline Interp interp_from_string(const std::string& s) {
  if (s == "bilinear") return Interp::bilinear;
  if (s == "bicubic") return Interp::bicubic;
  if (s == "spectral") return Interp::spectral;
  throw ConfigError("interpolation must be bilinear, bicubic or spectral, got '" + s + "'");
}

struct SamplerOptions {
  Interp interp = Interp::bilinear;
  // velocity evaluated on a grid refined by zero padding
  int upsample = 1;
  // truncate the velocity to the 2/3 band, as the scalar solver does
  bool dealias = false;
};

// Velocity b = perp-grad phi at arbitrary points, from one streamfunction frame.
class VelocitySampler {
 public:
  VelocitySampler(int n, SamplerOptions opt)
      : n_(n), opt_(opt), coarse_(n), fine_(n * std::max(1, opt.upsample)), m_(n * std::max(1, opt.upsample)) {
    if (opt.upsample < 1) throw ConfigError("upsample must be a positive integer");
    hat_ = coarse_.spec_buffer();
    pad_ = fine_.spec_buffer();
    d_ = fine_.spec_buffer();
    b1_ = fine_.real_buffer();
    b2_ = fine_.real_buffer();
  }

  int resolution() const { return m_; }

  void load(const double* phi) {
    coarse_.forward(phi, hat_.data());
    if (opt_.dealias) coarse_.dealias(hat_);
    std::fill(pad_.begin(), pad_.end(), cplx{});
    const int nh = coarse_.nh(), mh = fine_.nh();
    for (int j2 = 0; j2 < n_; ++j2) {
      int k2 = coarse_.k2_of(j2);
      if (std::abs(k2) == n_ / 2 && opt_.upsample > 1) continue;
      int t2 = k2 >= 0 ? k2 : k2 + m_;
      for (int j1 = 0; j1 < nh; ++j1) {
        if (j1 == n_ / 2 && opt_.upsample > 1) continue;
        pad_[static_cast<std::size_t>(t2) * mh + j1] = hat_[static_cast<std::size_t>(j2) * nh + j1];
      }
    }
    fine_.derivative(pad_.data(), d_.data(), 1);
    if (opt_.interp == Interp::spectral) b1hat_ = d_;
    fine_.inverse(d_.data(), b1_.data());
    for (auto& x : b1_) x = -x;
    fine_.derivative(pad_.data(), d_.data(), 0);
    if (opt_.interp == Interp::spectral) b2hat_ = d_;
    fine_.inverse(d_.data(), b2_.data());
  }

  void load_zero() {
    std::fill(b1_.begin(), b1_.end(), 0.0);
    std::fill(b2_.begin(), b2_.end(), 0.0);
    b1hat_.assign(fine_.spec_size(), cplx{});
    b2hat_.assign(fine_.spec_size(), cplx{});
  }

  std::array<double, 2> operator()(double x1, double x2) const {
    switch (opt_.interp) {
      case Interp::bilinear: return bilinear(x1, x2);
      case Interp::bicubic: return bicubic(x1, x2);
      default:
        return {-fine_.eval_at(b1hat_.data(), x1, x2), fine_.eval_at(b2hat_.data(), x1, x2)};
    }
  }

  double max_speed() const { return std::max(spectral::max_abs(b1_), spectral::max_abs(b2_)); }

 private:
  std::size_t idx(long i1, long i2) const {
    i1 %= m_;
    i2 %= m_;
    if (i1 < 0) i1 += m_;
    if (i2 < 0) i2 += m_;
    return static_cast<std::size_t>(i2) * m_ + static_cast<std::size_t>(i1);
  }

  std::array<double, 2> bilinear(double x1, double x2) const {
    double u = wrap01(x1) * m_, v = wrap01(x2) * m_;
    long i = static_cast<long>(u), j = static_cast<long>(v);
    double fu = u - i, fv = v - j;
    std::size_t a = idx(i, j), b = idx(i + 1, j), c = idx(i, j + 1), d = idx(i + 1, j + 1);
    double w00 = (1 - fu) * (1 - fv), w10 = fu * (1 - fv), w01 = (1 - fu) * fv, w11 = fu * fv;
    return {w00 * b1_[a] + w10 * b1_[b] + w01 * b1_[c] + w11 * b1_[d],
            w00 * b2_[a] + w10 * b2_[b] + w01 * b2_[c] + w11 * b2_[d]};
  }

  static std::array<double, 4> catmull_rom(double t) {
    double t2 = t * t, t3 = t2 * t;
    return {0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t), 0.5 * (t3 - t2)};
  }

  std::array<double, 2> bicubic(double x1, double x2) const {
    double u = wrap01(x1) * m_, v = wrap01(x2) * m_;
    long i = static_cast<long>(u), j = static_cast<long>(v);
    auto wu = catmull_rom(u - i), wv = catmull_rom(v - j);
    double s1 = 0.0, s2 = 0.0;
    for (int q = 0; q < 4; ++q) {
      double r1 = 0.0, r2 = 0.0;
      for (int p = 0; p < 4; ++p) {
        std::size_t k = idx(i - 1 + p, j - 1 + q);
        r1 += wu[p] * b1_[k];
        r2 += wu[p] * b2_[k];
      }
      s1 += wv[q] * r1;
      s2 += wv[q] * r2;
    }
    return {s1, s2};
  }

  int n_;
  SamplerOptions opt_;
  Grid coarse_, fine_;
  int m_;
  std::vector<cplx> hat_, pad_, d_, b1hat_, b2hat_;
  std::vector<double> b1_, b2_;
};

struct BackwardOptions {
  double kappa = 0.0;
  std::uint64_t seed = 0;
  SamplerOptions sampler;
  // frames with identically zero velocity are skipped (pure diffusion)
  bool zero_velocity = false;
};

// Advances unwrapped positions backward from frame `end` to frame `end - nsteps` by
// Euler-Maruyama: X <- X - b(X, t_n) dt + sqrt(2 kappa dt) Z. Tracer i uses RNG index
// first_index + i. observe(step, x1, x2) is called after every step and at step 0.
template <class Observe>
void evolve_backward(const fieldgen::SpaceTimeField& field, std::vector<double>& x1, std::vector<double>& x2,
                     std::size_t end, std::size_t nsteps, const BackwardOptions& opt, std::uint64_t first_index,
                     Observe&& observe) {
  if (opt.kappa < 0.0) throw ConfigError("kappa must be nonnegative");
  if (nsteps > end) throw ConfigError("backward run would start before the stored field span");
  const double dt = field.dt();
  const double noise = std::sqrt(2.0 * opt.kappa * dt);
  VelocitySampler vs(field.n(), opt.sampler);
  rng::CounterRng rng(opt.seed, rng::Stream::tracer);
  std::vector<double> frame(field.frame_values());
  observe(std::size_t{0}, x1, x2);
  for (std::size_t s = 1; s <= nsteps; ++s) {
    std::size_t k = end - (s - 1);
    if (opt.zero_velocity) {
      vs.load_zero();
    } else {
      field.read_frame(k, frame.data());
      vs.load(frame.data());
    }
    for (std::size_t i = 0; i < x1.size(); ++i) {
      auto b = opt.zero_velocity ? std::array<double, 2>{0.0, 0.0} : vs(x1[i], x2[i]);
      auto z = rng.normal2(first_index + i, s);
      x1[i] += -b[0] * dt + noise * z[0];
      x2[i] += -b[1] * dt + noise * z[1];
    }
    observe(s, x1, x2);
  }
}

struct Moments {
  double mean1 = 0.0, mean2 = 0.0;
  // unbiased estimate of E|X - X'|^2 for two independent tracers
  double sigma2 = 0.0;
};

inline Moments moments(const std::vector<double>& x1, const std::vector<double>& x2) {
  const std::size_t n = x1.size();
  if (n < 2) throw ConfigError("variance needs at least two tracers");
  Moments m;
  m.mean1 = pairwise_sum(x1) / n;
  m.mean2 = pairwise_sum(x2) / n;
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = (x1[i] - m.mean1) * (x1[i] - m.mean1) + (x2[i] - m.mean2) * (x2[i] - m.mean2);
  m.sigma2 = 2.0 * pairwise_sum(d) / static_cast<double>(n - 1);
  return m;
}

struct TracerEnsemble {
  double xi1 = 0.0, xi2 = 0.0;
  double tf = 0.0, kappa = 0.0;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  // per backward time s_hat = tf - t
  std::vector<double> s_hat, sigma2, mean1, mean2;
  // unwrapped positions at the final backward time
  std::vector<double> x1, x2;
};

inline TracerEnsemble run_backward(const fieldgen::SpaceTimeField& field, double xi1, double xi2, double tf,
                                   std::size_t count, const BackwardOptions& opt, std::size_t record_every = 1,
                                   double s_max = -1.0) {
  if (count < 2) throw ConfigError("an ensemble needs at least two tracers");
  if (opt.kappa < 0.0) throw ConfigError("kappa must be nonnegative");
  TracerEnsemble e;
  e.xi1 = wrap01(xi1);
  e.xi2 = wrap01(xi2);
  e.tf = tf;
  e.kappa = opt.kappa;
  e.seed = opt.seed;
  e.count = count;
  std::size_t end = field.frame_at(tf);
  std::size_t nsteps = end;
  if (s_max >= 0.0) nsteps = std::min(end, static_cast<std::size_t>(std::llround(s_max / field.dt())));
  e.x1.assign(count, e.xi1);
  e.x2.assign(count, e.xi2);
  record_every = std::max<std::size_t>(1, record_every);
  evolve_backward(field, e.x1, e.x2, end, nsteps, opt, 0, [&](std::size_t s, auto& a, auto& b) {
    if (s % record_every && s != nsteps) return;
    auto m = moments(a, b);
    e.s_hat.push_back(static_cast<double>(s) * field.dt());
    e.sigma2.push_back(m.sigma2);
    e.mean1.push_back(m.mean1);
    e.mean2.push_back(m.mean2);
  });
  return e;
}

inline std::string variance_csv(const TracerEnsemble& e) {
  std::ostringstream os;
  os.precision(12);
  os << "s_hat,sigma2,mean_x1,mean_x2,kappa\n";
  for (std::size_t i = 0; i < e.s_hat.size(); ++i)
    os << e.s_hat[i] << ',' << e.sigma2[i] << ',' << e.mean1[i] << ',' << e.mean2[i] << ',' << e.kappa << '\n';
  return os.str();
}

struct PowerFit {
  double exponent = 0.0;
  double stderr_ = 0.0;
  double prefactor = 0.0;
  std::size_t points = 0;
};

// Least-squares slope of log y against log x over lo <= x <= hi.
inline PowerFit richardson_fit(const std::vector<double>& x, const std::vector<double>& y, double lo, double hi) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] >= lo && x[i] <= hi && x[i] > 0 && y[i] > 0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  const std::size_t n = lx.size();
  if (n < 5) throw ConfigError("fit window holds " + std::to_string(n) + " points, need at least 5");
  double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n, my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  PowerFit f;
  f.exponent = sxy / sxx;
  double c = my - f.exponent * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += std::pow(ly[i] - c - f.exponent * lx[i], 2);
  f.stderr_ = std::sqrt(ss / (n - 2) / sxx);
  f.prefactor = std::exp(c);
  f.points = n;
  return f;
}

inline PowerFit richardson_fit(const TracerEnsemble& e, double lo, double hi) {
  return richardson_fit(e.s_hat, e.sigma2, lo, hi);
}

// Inertial window for the Richardson fit: it opens at the first s_hat where sigma2 exceeds
// `excess` times the pure-diffusion value 8 kappa s_hat and closes at `upper`.
inline std::pair<double, double> inertial_window(const TracerEnsemble& e, double upper, double excess = 2.0) {
  for (std::size_t i = 0; i < e.s_hat.size(); ++i) {
    double s = e.s_hat[i];
    if (s > 0 && s < upper && e.sigma2[i] >= excess * 8 * e.kappa * s) return {s, upper};
  }
  throw NumericalError("variance never leaves the diffusive range before s_hat = " + std::to_string(upper));
}

struct Histogram {
  int bins = 0;
  std::vector<double> mass;  // index by * bins + bx
};

inline Histogram transition_histogram(const std::vector<double>& x1, const std::vector<double>& x2, int bins) {
  if (bins < 1) throw ConfigError("histogram needs at least one bin");
  Histogram h;
  h.bins = bins;
  h.mass.assign(static_cast<std::size_t>(bins) * bins, 0.0);
  for (std::size_t i = 0; i < x1.size(); ++i) {
    int bx = std::min(bins - 1, static_cast<int>(wrap01(x1[i]) * bins));
    int by = std::min(bins - 1, static_cast<int>(wrap01(x2[i]) * bins));
    h.mass[static_cast<std::size_t>(by) * bins + bx] += 1.0;
  }
  for (auto& m : h.mass) m /= static_cast<double>(x1.size());
  return h;
}

inline Histogram transition_histogram(const TracerEnsemble& e, int bins) { return transition_histogram(e.x1, e.x2, bins); }

inline std::string histogram_csv(const Histogram& h) {
  std::ostringstream os;
  os.precision(12);
  os << "bin_x,bin_y,mass\n";
  for (int by = 0; by < h.bins; ++by)
    for (int bx = 0; bx < h.bins; ++bx) os << bx << ',' << by << ',' << h.mass[static_cast<std::size_t>(by) * h.bins + bx] << '\n';
  return os.str();
}

struct FdResult {
  double lhs = 0.0;  // half the mean variance of theta0 at the start points
  double rhs = 0.0;  // kappa times the space-time integral of |grad theta|^2
  double gap = 0.0;
  double stderr_ = 0.0;
  std::size_t endpoints = 0, per_point = 0;
  double z() const { return stderr_ > 0 ? gap / stderr_ : 0.0; }
};

// Endpoints: one jittered point in each cell of a side x side grid.
inline std::vector<std::array<double, 2>> stratified_points(int side, std::uint64_t seed) {
  rng::CounterRng r(seed, rng::Stream::endpoint);
  std::vector<std::array<double, 2>> pts;
  for (int j = 0; j < side; ++j)
    for (int i = 0; i < side; ++i) {
      auto u = r.uniform2(static_cast<std::uint64_t>(j * side + i), 0);
      pts.push_back({(i + u[0]) / side, (j + u[1]) / side});
    }
  return pts;
}

// Monte-Carlo side of the fluctuation-dissipation identity; all endpoints advance together.
inline FdResult fluctuation_dissipation_check(const fieldgen::SpaceTimeField& field,
                                              const std::function<double(double, double)>& theta0, double t,
                                              double dissipated, std::size_t per_point, int side,
                                              const BackwardOptions& opt, double max_stderr = -1.0) {
  if (per_point < 2) throw ConfigError("need at least two tracers per endpoint");
  auto pts = stratified_points(side, opt.seed);
  const std::size_t np = pts.size(), total = np * per_point;
  std::vector<double> x1(total), x2(total);
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t i = 0; i < per_point; ++i) {
      x1[p * per_point + i] = pts[p][0];
      x2[p * per_point + i] = pts[p][1];
    }
  std::size_t end = field.frame_at(t);
  evolve_backward(field, x1, x2, end, end, opt, 0, [](std::size_t, auto&, auto&) {});
  std::vector<double> half_var(np), vals(per_point);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t i = 0; i < per_point; ++i) vals[i] = theta0(wrap01(x1[p * per_point + i]), wrap01(x2[p * per_point + i]));
    double mean = pairwise_sum(vals) / per_point;
    for (auto& v : vals) v = (v - mean) * (v - mean);
    half_var[p] = 0.5 * pairwise_sum(vals) / static_cast<double>(per_point - 1);
  }
  FdResult r;
  r.endpoints = np;
  r.per_point = per_point;
  r.lhs = pairwise_sum(half_var) / np;
  double ss = 0.0;
  for (double v : half_var) ss += (v - r.lhs) * (v - r.lhs);
  r.stderr_ = std::sqrt(ss / (np - 1) / np);
  r.rhs = dissipated;
  r.gap = r.lhs - r.rhs;
  if (max_stderr > 0 && r.stderr_ > max_stderr)
    throw ConfigError("standard error " + std::to_string(r.stderr_) + " exceeds the requested " +
                      std::to_string(max_stderr) + "; raise the tracer count");
  return r;
}

// Single shear v = (2 pi a eps cos(2 pi y / eps), 0) from the origin.
struct ShearResult {
  double ex2 = 0.0, ex2_se = 0.0;  // at t2
  double ey2 = 0.0, ey2_se = 0.0;  // at t2
  double ex2_t1 = 0.0, ex2_t1_se = 0.0;
  double slope_half = 0.0, slope_half_se = 0.0;  // (E X^2(t2) - E X^2(t1)) / (2 (t2 - t1))
  double kappa_eff = 0.0;                       // kappa + a^2 eps^4 / (2 kappa)
};

inline double shear_ex2_closed_form(double a, double eps, double kappa, double t) {
  double w = 4 * std::numbers::pi * std::numbers::pi * kappa / (eps * eps);
  double amp = std::pow(2 * std::numbers::pi * a * eps, 2);
  return 2 * kappa * t +
         amp * (t / w + (2.0 / 3.0) * std::expm1(-w * t) / (w * w) + (1.0 / 12.0) * std::expm1(-4 * w * t) / (w * w));
}

inline double shear_kappa_eff(double a, double eps, double kappa) { return kappa + a * a * std::pow(eps, 4) / (2 * kappa); }

inline ShearResult shear_oracle(double a, double eps, double kappa, double t1, double t2, std::size_t paths,
                                double dt = 0.01, std::uint64_t seed = 1) {
  if (!(t2 > t1 && t1 > 0)) throw ConfigError("shear oracle needs 0 < t1 < t2");
  rng::CounterRng r(seed, rng::Stream::shear);
  const double amp = 2 * std::numbers::pi * a * eps, k = 2 * std::numbers::pi / eps, noise = std::sqrt(2 * kappa * dt);
  const auto n1 = static_cast<std::size_t>(std::llround(t1 / dt)), n2 = static_cast<std::size_t>(std::llround(t2 / dt));
  std::vector<double> x1s(paths), x2s(paths), y2s(paths), diff(paths);
  for (std::size_t p = 0; p < paths; ++p) {
    double x = 0.0, y = 0.0;
    for (std::size_t s = 1; s <= n2; ++s) {
      auto z = r.normal2(p, s);
      x += amp * std::cos(k * y) * dt + noise * z[0];
      // Brownian y is sampled exactly on the grid
      y += noise * z[1];
      if (s == n1) x1s[p] = x * x;
    }
    x2s[p] = x * x;
    y2s[p] = y * y;
    diff[p] = (x2s[p] - x1s[p]) / (2 * (n2 - n1) * dt);
  }
  auto mean_se = [&](std::vector<double>& v) {
    double m = pairwise_sum(v) / v.size();
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - m) * (v[i] - m);
    return std::pair{m, std::sqrt(pairwise_sum(d) / (v.size() - 1) / v.size())};
  };
  ShearResult res;
  std::tie(res.ex2, res.ex2_se) = mean_se(x2s);
  std::tie(res.ey2, res.ey2_se) = mean_se(y2s);
  std::tie(res.ex2_t1, res.ex2_t1_se) = mean_se(x1s);
  std::tie(res.slope_half, res.slope_half_se) = mean_se(diff);
  res.kappa_eff = shear_kappa_eff(a, eps, kappa);
  return res;
}

}  // namespace avlab::tracers
