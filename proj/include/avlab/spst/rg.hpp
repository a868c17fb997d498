#pragma once

// Renormalization-group toy for the cube-root field from x0 = 0 at t = 1: a
// linear escape flow inside the ball of radius delta fixes the exit time, and
// the outer flow carries the exit state to the selected value.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "../error.hpp"
#include "ode.hpp"

namespace avlab::spst {

// Right end of the set of states reachable at t = 1.
inline double extremal_state() { return std::pow(2.0 / 3.0, 1.5); }

// Required exit time for the selected state chi.
inline double exit_time_for(double chi) {
  double a = extremal_state();
  if (!(std::abs(chi) <= a)) throw ConfigError("selected state outside the reachable interval");
  return 1.0 - std::pow(std::abs(chi) / a, 2.0 / 3.0);
}

struct RgPoint {
  double tau = 0, delta = 0, sigma = 0;
  double t_exit = 0, t_exit_closed = 0;
  double state = 0, state_closed = 0;
  // RG flow of the label y
  double rg_state = 0;
};

struct RgToy {
  double chi = 0, T_star = 0, y = 0;
  std::vector<RgPoint> series;
};

inline RgToy rg_toy(double chi, const std::vector<double>& taus, double y = 0.0,
                    std::function<double(double)> delta = [](double tau) { return std::exp(-tau); },
                    OdeOptions o = {}) {
  RgToy r;
  r.chi = chi;
  r.y = y;
  r.T_star = exit_time_for(chi);
  const double side = chi < 0 ? -1.0 : 1.0;
  double last = std::numeric_limits<double>::infinity();
  for (double tau : taus) {
    RgPoint p;
    p.tau = tau;
    p.delta = delta(tau);
    if (!(p.delta > 0) || p.delta > last) throw ConfigError("delta law must be positive and non-increasing");
    last = p.delta;
    p.rg_state = chi + (y - chi) * std::exp(-tau);
    if (r.T_star == 0) {
      // infinite escape speed: leave at once
      p.sigma = side * std::numeric_limits<double>::infinity();
      p.t_exit = p.t_exit_closed = 0;
    } else {
      p.sigma = side * p.delta / std::expm1(r.T_star);
      p.t_exit_closed = std::log1p(p.delta / std::abs(p.sigma));
      // Phi' = Phi + sigma from 0, in units of delta so the tolerances are scale free
      const double k = p.sigma / p.delta;
      Rhs h = [k](const State& u, State& du, double) { du[0] = u[0] + k; };
      auto t = crossing_times(h, {0.0}, 0.0, 10.0 + 2 * r.T_star, [](const State& u) { return 1 - std::abs(u[0]); },
                              {0.0}, o);
      if (!std::isfinite(t[0])) throw NumericalError("escape flow never left the ball");
      p.t_exit = t[0];
    }
    // outer flow x' = x^(1/3) from the exit point
    double x0 = side * p.delta;
    p.state_closed = side * std::pow(std::cbrt(p.delta * p.delta) + 2.0 / 3.0 * (1 - p.t_exit), 1.5);
    if (p.t_exit < 1) {
      OdeOptions oo = o;
      oo.atol = std::min(o.atol, 1e-3 * p.delta);
      Rhs g = [](const State& x, State& dx, double) { dx[0] = std::cbrt(x[0]); };
      p.state = solve(g, {x0}, p.t_exit, 1.0, oo)[0];
    } else {
      p.state = x0;
    }
    r.series.push_back(p);
  }
  return r;
}

// ---- several selectable states ----

struct Basin {
  double lo, hi, root;
};

// Generator -prod(phi - rho_k) prod(phi - s_k): roots attract, saddles repel.
struct MorseSmale {
  std::vector<double> roots, saddles;

  MorseSmale(std::vector<double> r, std::vector<double> s) : roots(std::move(r)), saddles(std::move(s)) {
    if (roots.empty() || saddles.size() + 1 != roots.size()) throw ConfigError("need n roots and n-1 saddles");
    double a = extremal_state();
    if (roots.front() < -a || roots.back() > a) throw ConfigError("roots must lie in the reachable interval");
    for (std::size_t k = 0; k < saddles.size(); ++k)
      if (!(roots[k] < saddles[k] && saddles[k] < roots[k + 1])) throw ConfigError("roots and saddles must interleave");
  }

  double generator(double phi) const {
    double p = -1;
    for (double r : roots) p *= (phi - r);
    for (double s : saddles) p *= (phi - s);
    return p;
  }

  std::vector<Basin> basins() const {
    std::vector<Basin> b;
    for (std::size_t k = 0; k < roots.size(); ++k)
      b.push_back({k == 0 ? -std::numeric_limits<double>::infinity() : saddles[k - 1],
                   k + 1 == roots.size() ? std::numeric_limits<double>::infinity() : saddles[k], roots[k]});
    return b;
  }

  // state reached by the RG flow from label y after time tau
  double flow(double y, double tau, OdeOptions o = {}) const {
    Rhs g = [this](const State& x, State& dx, double) { dx[0] = generator(x[0]); };
    return solve(g, {y}, 0.0, tau, o)[0];
  }
};

}  // namespace avlab::spst
