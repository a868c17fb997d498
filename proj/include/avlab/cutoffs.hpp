#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "error.hpp"

namespace avlab::cutoffs {

inline constexpr double kSupport = 2.0 / 3.0;
inline constexpr double kTargetL2 = 0.9;

// Smooth ramp: 0 for t <= 0, 1 for t >= 1.
inline double f_ramp(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return 1.0 / (1.0 + std::exp((1.0 - 2.0 * t) / (t * (1.0 - t))));
}

// Bump supported on |t| < 2/3.
inline double bump(double t) {
  double r = t / kSupport;
  if (std::abs(r) >= 1.0) return 0.0;
  return std::exp(1.0 / (r * r - 1.0));
}

// Bump normalized by its integer shifts: sums to one over k.
inline double normalized_bump(double s) {
  double n = std::floor(s);
  double den = 0.0;
  for (int j = -1; j <= 2; ++j) den += bump(s - (n + j));
  if (den == 0.0) return 0.0;
  return bump(s) / den;
}

// Shift-equivariant warp: h(t-k) = h(t)-k, h(+-1/3) = +-1/3, h(+-2/3) = +-2/3,
// monotone for |c| < 1.
inline double warp(double t, double c) {
  constexpr double w = 6.0 * std::numbers::pi;
  return t + c * std::sin(w * t) / w;
}

namespace detail {

template <class F>
double integrate(F f, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  return gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

// Integral of g^2 over the support, split at +-1/3 where the warp pins.
template <class G>
double l2_sq(G g) {
  auto sq = [&](double t) { double v = g(t); return v * v; };
  return integrate(sq, -kSupport, -1.0 / 3.0) + integrate(sq, -1.0 / 3.0, 1.0 / 3.0) +
         integrate(sq, 1.0 / 3.0, kSupport);
}

}  // namespace detail

// Time cutoffs for one field level, with the single-bump profile fixed at build time.
class Family {
 public:
  // Warp strength chosen so that the profile has squared L2 norm 9/10.
  double warp_c = 0.0;
  // Time dilation that gives the unwarped profile squared L2 norm 9/10.
  double alpha_stretch = 0.0;

  double zeta(double t) const { return normalized_bump(warp(t, warp_c)); }

  // Dilated variant: squared norm 9/10 but shifts no longer sum to one.
  double zeta_dilated(double t) const { return normalized_bump(alpha_stretch * t); }

  double zeta_mk(double tau, int k, double t) const { return zeta(t / tau - k); }

  // Slab cutoff around l*tau_pp: one on the inner core, zero within tau_p of the slab edge.
  double zetahat_ml(double tau_p, double tau_pp, long l, double t) const {
    double u = (t - static_cast<double>(l) * tau_pp) / tau_p;
    double h = tau_pp / (2.0 * tau_p);
    return f_ramp(h - 1.0 - u) * f_ramp(h - 1.0 + u);
  }

  double l2_sq() const {
    return detail::l2_sq([this](double t) { return zeta(t); });
  }
};

inline Family build_zeta() {
  Family fam;
  double base = detail::l2_sq([](double t) { return normalized_bump(t); });
  fam.alpha_stretch = base / kTargetL2;

  auto resid = [](double c) {
    return detail::l2_sq([c](double t) { return normalized_bump(warp(t, c)); }) - kTargetL2;
  };
  boost::uintmax_t iters = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(50);
  auto [lo, hi] = boost::math::tools::toms748_solve(resid, 0.0, 0.99, tol, iters);
  if (iters >= 200) throw NumericalError("cutoff warp root did not converge");
  fam.warp_c = 0.5 * (lo + hi);
  return fam;
}

inline const Family& default_family() {
  static const Family fam = build_zeta();
  return fam;
}

}  // namespace avlab::cutoffs
