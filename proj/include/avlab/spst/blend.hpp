#pragma once

// Switching blends of two selecting families, and reparametrizations
// eps = g(s) of the regularization parameter.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "../error.hpp"
#include "examples.hpp"
#include "measure.hpp"

namespace avlab::spst {

using boost::math::quadrature::gauss_kronrod;

inline double c_theta(double theta) { return std::sin(std::numbers::pi * (theta - 0.5)); }

// 1/2 + 1/2 tanh(s (sin 2 pi s + c)); its long-run average is theta
inline double a_theta(double s, double theta) {
  return 0.5 + 0.5 * std::tanh(s * (std::sin(2 * std::numbers::pi * s) + c_theta(theta)));
}

// (1/S) int_0^S a_theta, split at the zero crossings of sin 2 pi s + c. Near a
// crossing z the integrand is a tanh step of width ~1/(2 pi z sqrt(1 - c^2)), so
// each piece is graded geometrically away from both ends.
inline double long_run_mean(double theta, double S) {
  if (!(theta > 0 && theta < 1)) throw ConfigError("theta must lie in (0, 1)");
  double c = c_theta(theta);
  double z0 = std::asin(-c) / (2 * std::numbers::pi);  // sin(2 pi z0) = -c
  std::vector<double> cuts{0.0};
  for (long k = 0; k <= static_cast<long>(S) + 1; ++k)
    for (double z : {k + z0, k + 0.5 - z0})
      if (z > 0 && z < S) cuts.push_back(z);
  cuts.push_back(S);
  std::sort(cuts.begin(), cuts.end());
  auto f = [theta](double s) { return a_theta(s, theta); };
  const double slope = 2 * std::numbers::pi * std::sqrt(1 - c * c);
  double sum = 0;
  std::vector<double> sub, right;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double lo = cuts[i], hi = cuts[i + 1];
    if (!(hi > lo)) continue;
    double mid = 0.5 * (lo + hi);
    sub.assign({lo});
    for (double w = 1 / (std::max(lo, 1.0) * slope); lo + w < mid; w *= 2) sub.push_back(lo + w);
    sub.push_back(mid);
    right.clear();
    for (double w = 1 / (std::max(hi, 1.0) * slope); hi - w > mid; w *= 2) right.push_back(hi - w);
    sub.insert(sub.end(), right.rbegin(), right.rend());
    sub.push_back(hi);
    for (std::size_t k = 0; k + 1 < sub.size(); ++k) sum += gauss_kronrod<double, 15>::integrate(f, sub[k], sub[k + 1], 0);
  }
  return sum / S;
}

// A strictly monotone reparametrization with closed-form derivatives and inverse.
// log_abs holds log|g|, log|g'|, log|g''| for laws whose values underflow; when
// empty the logs are taken of the plain values.
struct Reparam {
  std::function<double(double)> g, dg, d2g, inverse;
  std::string name;
  std::array<std::function<double(double)>, 3> log_abs{};

  double log_of(int k, double r) const {
    if (log_abs[k]) return log_abs[k](r);
    double v = k == 0 ? g(r) : k == 1 ? dg(r) : d2g(r);
    return std::log(std::abs(v));
  }
};

// r^-a
inline Reparam power_law(double a) {
  if (!(a > 0)) throw ConfigError("power law needs a > 0");
  Reparam g{[a](double r) { return std::pow(r, -a); }, [a](double r) { return -a * std::pow(r, -a - 1); },
            [a](double r) { return a * (a + 1) * std::pow(r, -a - 2); }, [a](double e) { return std::pow(e, -1 / a); },
            "r^-" + std::to_string(a)};
  g.log_abs = {[a](double r) { return -a * std::log(r); },
               [a](double r) { return std::log(a) - (a + 1) * std::log(r); },
               [a](double r) { return std::log(a * (a + 1)) - (a + 2) * std::log(r); }};
  return g;
}

// e^-r
inline Reparam exponential_decay() {
  Reparam g{[](double r) { return std::exp(-r); }, [](double r) { return -std::exp(-r); },
            [](double r) { return std::exp(-r); }, [](double e) { return -std::log(e); }, "exp(-r)"};
  auto minus = [](double r) { return -r; };
  g.log_abs = {minus, minus, minus};
  return g;
}

// r^b, an increasing inner time change
inline Reparam power_time(double b) {
  if (!(b > 0)) throw ConfigError("time change needs b > 0");
  return {[b](double r) { return std::pow(r, b); }, [b](double r) { return b * std::pow(r, b - 1); },
          [b](double r) { return b * (b - 1) * std::pow(r, b - 2); }, [b](double e) { return std::pow(e, 1 / b); },
          "r^" + std::to_string(b)};
}

// outer(inner(r)) by the chain rule
inline Reparam compose(const Reparam& outer, const Reparam& inner) {
  return {[=](double r) { return outer.g(inner.g(r)); },
          [=](double r) { return outer.dg(inner.g(r)) * inner.dg(r); },
          [=](double r) {
            double d = inner.dg(r);
            return outer.d2g(inner.g(r)) * d * d + outer.dg(inner.g(r)) * inner.d2g(r);
          },
          [=](double e) { return inner.inverse(outer.inverse(e)); }, outer.name + " o " + inner.name};
}

// f_theta(., eps) = a f_x + (1 - a) f_y with a = a_theta(g^-1(eps))
inline Family blend_regularization(const Family& fx, const Family& fy, double theta, const Reparam& g = power_law(1)) {
  if (!(theta > 0 && theta < 1)) throw ConfigError("theta must lie in (0, 1)");
  if (fx.dim != fy.dim) throw ConfigError("blended families differ in dimension");
  if (fx.stochastic() || fy.stochastic()) throw ConfigError("blends take deterministic families");
  Family f;
  f.dim = fx.dim;
  f.name = "blend(" + fx.name + ", " + fy.name + ", " + std::to_string(theta) + ")";
  f.f = [=](const State& x, double eps, State& dx) {
    double a = a_theta(g.inverse(eps), theta);
    State u(x.size()), v(x.size());
    fx.f(x, eps, u);
    fy.f(x, eps, v);
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = a * u[i] + (1 - a) * v[i];
  };
  return f;
}

// ---- membership in the algebraic class ----

struct ConditionTrace {
  std::vector<double> R, value;
  double slope = 0;  // log-log slope over the upper half of the grid
  bool bounded = false;
};

struct ReparamReport {
  std::string name;
  ConditionTrace ratio, tail, cesaro;
  bool member = false;
  // Birkhoff comparison, filled when a curve is supplied
  std::vector<double> leb, leb_half, birk, birk_double, tolerance;
  bool agree = false;
};

inline ConditionTrace bounded_trace(std::vector<double> R, std::vector<double> v, double ceiling) {
  ConditionTrace t{std::move(R), std::move(v), 0, false};
  std::size_t n = t.R.size(), h = n / 2;
  double mx = 0, my = 0;
  bool finite = true;
  for (std::size_t i = h; i < n; ++i) {
    if (!(t.value[i] > 0) || !std::isfinite(t.value[i])) finite = false;
    mx += std::log(t.R[i]);
    my += std::log(std::max(t.value[i], 1e-300));
  }
  mx /= (n - h);
  my /= (n - h);
  double sxx = 0, sxy = 0;
  for (std::size_t i = h; i < n; ++i) {
    double dx = std::log(t.R[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(std::max(t.value[i], 1e-300)) - my);
  }
  t.slope = sxy / sxx;
  double hi = *std::max_element(t.value.begin(), t.value.end());
  t.bounded = finite && std::abs(t.slope) < 0.1 && hi < ceiling;
  return t;
}

// Evaluates the three asymptotic conditions on a log grid of R in [r0, horizon].
inline ReparamReport reparam_classes(const Reparam& g, double horizon = 1e4, double r0 = 1.0, int points = 25,
                                     double ceiling = 1e3) {
  ReparamReport rep;
  rep.name = g.name;
  std::vector<double> R, q1, q2, q3;
  boost::math::quadrature::exp_sinh<double> tail_q;
  for (int i = 0; i < points; ++i) {
    double r = r0 * std::pow(horizon / r0, double(i) / (points - 1));
    R.push_back(r);
    double lg = g.log_of(0, r);
    q1.push_back(r * std::exp(g.log_of(1, r) - lg));
    // tail and Cesaro integrands formed in log space
    double tail = tail_q.integrate([&](double tau) { return tau * std::exp(g.log_of(2, tau) - lg); }, r,
                                   std::numeric_limits<double>::infinity());
    q2.push_back(tail);
    auto ces = [&](double tau) { return std::exp(g.log_of(0, tau) + g.log_of(2, tau) - 2 * g.log_of(1, tau)); };
    q3.push_back(gauss_kronrod<double, 61>::integrate(ces, 0.0, r, 30, 1e-10) / r);
  }
  rep.ratio = bounded_trace(R, q1, ceiling);
  rep.tail = bounded_trace(R, q2, ceiling);
  rep.cesaro = bounded_trace(R, q3, ceiling);
  rep.member = rep.ratio.bounded && rep.tail.bounded && rep.cesaro.bounded;
  return rep;
}

namespace detail {
// first and second moments of every coordinate
inline std::vector<double> battery(const EmpiricalMeasure& m) {
  std::vector<double> out;
  for (int a = 0; a < m.dim; ++a) {
    out.push_back(mean(m, a));
    out.push_back(average(m, [a](const State& p) { return p[a] * p[a]; }));
  }
  return out;
}

// law of curve(g(r)) for r uniform on [0, R]
inline EmpiricalMeasure birkhoff(const Curve& c, const Reparam& g, double R, std::size_t n, std::uint64_t seed) {
  Curve cg{c.dim, [&](double r) { return c(g.g(r)); }, c.name};
  return pushforward(cg, R, n, seed);
}
}  // namespace detail

// Membership plus a comparison of Lebesgue moments at eps against Birkhoff moments
// on [0, g^-1(eps)]; the tolerance sums both truncation estimates and sampling error.
inline ReparamReport reparam_check(const Curve& c, const Reparam& g, double eps, std::size_t samples = 20000,
                                   double horizon = 1e4) {
  auto rep = reparam_classes(g, horizon);
  double R = g.inverse(eps);
  auto L1 = pushforward(c, eps, samples, 11), L2 = pushforward(c, eps / 2, samples, 12);
  auto B1 = detail::birkhoff(c, g, R, samples, 13), B2 = detail::birkhoff(c, g, 2 * R, samples, 14);
  rep.leb = detail::battery(L1);
  rep.leb_half = detail::battery(L2);
  rep.birk = detail::battery(B1);
  rep.birk_double = detail::battery(B2);
  rep.agree = true;
  for (std::size_t k = 0; k < rep.leb.size(); ++k) {
    double tol = std::abs(rep.leb[k] - rep.leb_half[k]) + std::abs(rep.birk[k] - rep.birk_double[k]) +
                 3.0 / std::sqrt(static_cast<double>(samples));
    rep.tolerance.push_back(tol);
    if (std::abs(rep.leb_half[k] - rep.birk_double[k]) > tol) rep.agree = false;
  }
  return rep;
}

}  // namespace avlab::spst
