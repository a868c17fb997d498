#pragma once

// Regularized vector-field families, their curves eps -> Phi_t[f(., eps)] x0,
// noise-regularized ensembles and blowup-time estimation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "../error.hpp"
#include "../rng.hpp"
#include "measure.hpp"
#include "ode.hpp"

namespace avlab::spst {

using FamilyRhs = std::function<void(const State& x, double eps, State& dx)>;

struct Family {
  int dim = 1;
  FamilyRhs f;
  // additive noise amplitude per eps; empty for deterministic regularizations
  std::function<double(double)> noise;
  std::string name;
  bool stochastic() const { return static_cast<bool>(noise); }
};

struct RegularizationCurve {
  Family family;
  State x0;
  double t = 1.0;
  OdeOptions ode;

  State operator()(double eps) const {
    if (!(eps > 0)) throw ConfigError("curve evaluation needs eps > 0");
    if (family.stochastic()) throw ConfigError(family.name + " is noise-regularized; use an ensemble");
    Rhs r = [&](const State& x, State& dx, double) { family.f(x, eps, dx); };
    try {
      return solve(r, x0, 0.0, t, ode);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " (eps = " + std::to_string(eps) + ")");
    }
  }

  Curve curve() const {
    RegularizationCurve self = *this;
    return Curve{static_cast<int>(x0.size()), [self](double e) { return self(e); }, family.name};
  }
};

inline State eval_curve(const RegularizationCurve& c, double eps) { return c(eps); }

// Euler-Maruyama ensemble of dX = f(X, eps) dt + noise(eps) dW.
inline EmpiricalMeasure sde_ensemble(const Family& fam, const State& x0, double t, double eps, std::size_t paths,
                                     std::uint64_t seed = 1, double dt_max = 1e-3) {
  if (!fam.stochastic()) throw ConfigError(fam.name + " has no noise term");
  if (!(eps > 0)) throw ConfigError("ensemble needs eps > 0");
  double dt = std::min(dt_max, eps / 10);
  long steps = std::max(1L, static_cast<long>(std::ceil(t / dt)));
  dt = t / steps;
  const double amp = fam.noise(eps) * std::sqrt(dt);
  rng::CounterRng r(seed, rng::Stream::sde);
  EmpiricalMeasure m;
  m.dim = fam.dim;
  m.eps = eps;
  m.sampler = "euler-maruyama";
  State x, dx(x0.size());
  for (std::size_t p = 0; p < paths; ++p) {
    x = x0;
    for (long k = 0; k < steps; ++k) {
      fam.f(x, eps, dx);
      auto z = r.normal2(p, static_cast<std::uint64_t>(k));
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i] * dt + amp * z[i];
    }
    m.x.push_back(x);
  }
  m.w.assign(paths, 1.0 / static_cast<double>(paths));
  return m;
}

// ---- the shipped examples ----

struct ExampleParams {
  // ex1: omega1, omega2_atoms, omega2_weak, omega3, const
  std::string omega = "omega1";
  double omega_value = 1.0;  // for "const"
  double cst = 0.0;          // phase in omega2_atoms
  double c = 0.5;            // ex2 start -c^2
  double T = 1.0;            // ex2 waiting time
  bool noise = false;        // ex2: additive noise instead of the strip
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double mu = 1.0, sigma = 4.0;
  double t_obs = std::numeric_limits<double>::quiet_NaN();
  State x0;
};

struct Example {
  std::string name;
  Family family;
  Rhs inviscid;
  State x0;
  double t = 1.0;
  // distance to the closure of the singular set
  std::function<double(const State&)> singular_distance;
  // absolute time of x0 when the system is a clock-augmented 1-D problem
  double clock_offset = 0.0;

  RegularizationCurve curve(OdeOptions o = {}) const { return {family, x0, t, o}; }
};

inline double omega_of(const ExampleParams& p, double eps) {
  if (p.omega == "omega1") return std::sin(1 / eps);
  if (p.omega == "omega2_atoms") return 0.5 + std::sin(1 / eps + p.cst);
  if (p.omega == "omega2_weak") return std::sin(std::log(1 / eps));
  if (p.omega == "omega3") return 1 - eps + std::sin(1 / eps);
  if (p.omega == "const") return p.omega_value;
  throw ConfigError("unknown omega '" + p.omega + "'");
}

// cube-root family, blended to a linear field inside |x| <= eps
inline double ex1_rhs(double x, double eps, double om) {
  if (std::abs(x) > eps) return std::cbrt(x);
  double y = x / eps, ay = std::abs(y);
  double xi = 3 * y * y - 2 * ay * ay * ay;
  return std::cbrt(eps) * (xi * std::cbrt(y) + (1 - xi) * (om + y) / 2);
}

// Stagnation strip of width eps T at height eps around the square-root singularity.
inline double ex2_rhs(double x, double eps, double T) {
  double e2 = eps * eps;
  if (x <= -e2) return std::sqrt(std::abs(x));
  if (x <= eps * T - e2) return eps;
  return std::sqrt(x - eps * T + 2 * e2);
}

inline State ex3_rhs(const State& x, double alpha) {
  double r = std::hypot(x[0], x[1]);
  if (r == 0) return {0.0, 0.0};
  double y1 = x[0] / r, y2 = x[1] / r;
  double rad = y1 + y2, tan = y1 * y2 * y2;
  double ra = std::pow(r, alpha);
  return {ra * (y1 * rad + y2 * tan), ra * (y2 * rad - y1 * tan)};
}

inline double signed_power(double s, double alpha) { return s == 0 ? 0.0 : std::copysign(std::pow(std::abs(s), alpha), s); }

// distance from x1 to the closed set where (-1)^j sin(2 pi x1) >= 0
inline double ex4_segment_gap(double x1, long j) {
  double u = x1 - std::floor(x1);
  if (j % 2 == 0) return u <= 0.5 ? 0.0 : std::min(u - 0.5, 1 - u);
  return u >= 0.5 ? 0.0 : std::min(0.5 - u, u);
}

inline double ex4_distance(const State& x, double sigma) {
  double row = 2 * sigma * x[1];
  long j0 = static_cast<long>(std::floor(row));
  double best = std::numeric_limits<double>::infinity();
  for (long j = j0 - 1; j <= j0 + 2; ++j) {
    double y = j / (2 * sigma);
    best = std::min(best, std::hypot(ex4_segment_gap(x[0], j), x[1] - y));
  }
  return best;
}

inline Example example_fields(const std::string& name, ExampleParams p = {}) {
  Example ex;
  ex.name = name;
  auto pick = [&](double v) { return std::isnan(p.t_obs) ? v : p.t_obs; };
  if (name == "ex1" || name == "ex1_sde") {
    ex.x0 = p.x0.empty() ? State{0.0} : p.x0;
    ex.t = pick(1.0);
    ex.inviscid = [](const State& x, State& dx, double) { dx[0] = std::cbrt(x[0]); };
    ex.singular_distance = [](const State& x) { return std::abs(x[0]); };
    if (name == "ex1") {
      omega_of(p, 0.1);
      ex.family = {1, [p](const State& x, double e, State& dx) { dx[0] = ex1_rhs(x[0], e, omega_of(p, e)); }, {},
                   "ex1/" + p.omega};
    } else {
      ex.family = {1, [](const State& x, double, State& dx) { dx[0] = std::cbrt(x[0]); },
                   [](double e) { return std::sqrt(2 * e); }, "ex1_sde"};
    }
    return ex;
  }
  if (name == "ex2") {
    double c = p.c, T = p.T;
    ex.x0 = p.x0.empty() ? State{-c * c} : p.x0;
    ex.t = pick(2 * std::abs(c) + T + 1);
    ex.inviscid = [](const State& x, State& dx, double) { dx[0] = std::sqrt(std::abs(x[0])); };
    ex.singular_distance = [](const State& x) { return std::abs(x[0]); };
    if (p.noise)
      ex.family = {1, [](const State& x, double, State& dx) { dx[0] = std::sqrt(std::abs(x[0])); },
                   [](double e) { return std::sqrt(e); }, "ex2/noise"};
    else
      ex.family = {1, [T](const State& x, double e, State& dx) { dx[0] = ex2_rhs(x[0], e, T); }, {}, "ex2/strip"};
    return ex;
  }
  if (name == "ex3") {
    double a = std::isnan(p.alpha) ? 1.0 / 3.0 : p.alpha;
    if (!(a > 0 && a < 1)) throw ConfigError("ex3 needs alpha in (0, 1)");
    ex.x0 = p.x0.empty() ? State{-0.25, 0.1} : p.x0;
    ex.t = pick(1.5);
    auto f = [a](const State& x, State& dx) { dx = ex3_rhs(x, a); };
    ex.inviscid = [f](const State& x, State& dx, double) { f(x, dx); };
    ex.singular_distance = [](const State& x) { return std::hypot(x[0], x[1]); };
    ex.family = {2, [f](const State& x, double, State& dx) { f(x, dx); }, [](double e) { return std::sqrt(e); },
                 "ex3"};
    return ex;
  }
  if (name == "ex4") {
    double a = std::isnan(p.alpha) ? 0.5 : p.alpha, mu = p.mu, sg = p.sigma;
    if (!(a > 0 && a < 1)) throw ConfigError("ex4 needs alpha in (0, 1)");
    if (!(sg > 0)) throw ConfigError("ex4 needs sigma > 0");
    ex.x0 = p.x0.empty() ? State{0.1, 0.05} : p.x0;
    ex.t = pick(50.0);
    if (mu != 0) ex.clock_offset = ex.x0[0] / mu;
    auto f = [a, mu, sg](const State& x, State& dx) {
      dx[0] = mu;
      dx[1] = signed_power(std::sin(2 * std::numbers::pi * sg * x[1]), a) * std::sin(2 * std::numbers::pi * x[0]);
    };
    ex.inviscid = [f](const State& x, State& dx, double) { f(x, dx); };
    ex.singular_distance = [sg](const State& x) { return ex4_distance(x, sg); };
    ex.family = {2, [f](const State& x, double, State& dx) { f(x, dx); }, [](double e) { return std::sqrt(e); },
                 "ex4"};
    return ex;
  }
  throw ConfigError("unknown example '" + name + "' (expected ex1, ex1_sde, ex2, ex3 or ex4)");
}

struct BlowupEstimate {
  // elapsed time from x0 and the same on the example's own clock
  double elapsed = std::numeric_limits<double>::quiet_NaN();
  double t_star = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> levels, crossings;
};

// Integrates the inviscid field and extrapolates the times at which the distance
// to the singular set falls through a geometric ladder of levels.
inline BlowupEstimate blowup_time(const Example& ex, double horizon = 10.0, int rungs = 8, double ratio = 0.1,
                                  OdeOptions o = {}) {
  BlowupEstimate b;
  double d0 = ex.singular_distance(ex.x0);
  if (d0 == 0) {
    b.elapsed = 0;
    b.t_star = ex.clock_offset;
    return b;
  }
  for (int j = 1; j <= rungs; ++j) b.levels.push_back(d0 * std::pow(ratio, j));
  b.crossings = crossing_times(ex.inviscid, ex.x0, 0.0, horizon, ex.singular_distance, b.levels, o);
  b.elapsed = aitken_limit(b.crossings);
  b.t_star = b.elapsed + ex.clock_offset;
  return b;
}

}  // namespace avlab::spst
