#pragma once

// Adaptive Dormand-Prince integration (Boost.Odeint) with a step budget,
// dense-output threshold crossings and Aitken extrapolation of hitting times.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>
#include <boost/numeric/odeint.hpp>

#include "../error.hpp"

namespace avlab::spst {

using State = std::vector<double>;
using Rhs = std::function<void(const State& x, State& dx, double t)>;

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  // 0 leaves the step unbounded
  double max_dt = 0.0;
  long max_steps = 5'000'000;
};

namespace detail {
namespace odeint = boost::numeric::odeint;
using Dopri = odeint::runge_kutta_dopri5<State>;

inline bool finite(const State& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}
}  // namespace detail

// x(t1) from x(t0).
inline State solve(const Rhs& f, State x, double t0, double t1, const OdeOptions& o = {}) {
  namespace odeint = detail::odeint;
  if (!(t1 >= t0)) throw ConfigError("integration runs forward only");
  if (t1 == t0) return x;
  double span = t1 - t0;
  double cap = o.max_dt > 0 ? o.max_dt : span;
  auto st = odeint::make_controlled(o.atol, o.rtol, cap, detail::Dopri());
  double t = t0, dt = std::min(cap, 1e-3 * span);
  long tries = 0;
  while (t < t1) {
    if (t + dt > t1) dt = t1 - t;
    st.try_step(f, x, t, dt);
    if (++tries > o.max_steps) throw NumericalError("ODE step budget exhausted at t = " + std::to_string(t));
    if (!(dt > 1e-15 * std::max(1.0, std::abs(t)))) throw NumericalError("ODE step size underflow at t = " + std::to_string(t));
  }
  if (!detail::finite(x)) throw NumericalError("ODE solution is not finite");
  return x;
}

// First times at which dist(x(t)) drops to each level (levels strictly decreasing).
// Unreached levels give NaN.
inline std::vector<double> crossing_times(const Rhs& f, State x, double t0, double t_end,
                                          const std::function<double(const State&)>& dist,
                                          const std::vector<double>& levels, const OdeOptions& o = {}) {
  namespace odeint = detail::odeint;
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] < levels[i - 1])) throw ConfigError("crossing levels must decrease");
  std::vector<double> out(levels.size(), std::numeric_limits<double>::quiet_NaN());
  std::size_t next = 0;
  while (next < levels.size() && dist(x) <= levels[next]) out[next++] = t0;
  if (next == levels.size()) return out;
  double span = t_end - t0;
  double cap = o.max_dt > 0 ? o.max_dt : span;
  auto st = odeint::make_dense_output(o.atol, o.rtol, cap, detail::Dopri());
  st.initialize(x, t0, std::min(cap, 1e-3 * span));
  State y(x.size());
  long steps = 0;
  while (next < levels.size() && st.current_time() < t_end) {
    auto [ta, tb] = st.do_step(f);
    if (++steps > o.max_steps) throw NumericalError("ODE step budget exhausted at t = " + std::to_string(tb));
    if (!detail::finite(st.current_state())) throw NumericalError("ODE solution is not finite");
    double d_end = dist(st.current_state());
    double lo = ta;
    while (next < levels.size() && d_end <= levels[next]) {
      const double lev = levels[next];
      auto g = [&](double t) {
        st.calc_state(t, y);
        return dist(y) - lev;
      };
      double glo = g(lo);
      double tc;
      if (glo <= 0) {
        tc = lo;
      } else {
        boost::uintmax_t it = 100;
        auto r = boost::math::tools::toms748_solve(g, lo, tb, glo, d_end - lev,
                                                   boost::math::tools::eps_tolerance<double>(50), it);
        tc = 0.5 * (r.first + r.second);
      }
      if (tc <= t_end) out[next] = tc;
      lo = tc;
      ++next;
    }
  }
  return out;
}

// Aitken delta-squared on the last three finite entries; exact for geometric approach.
inline double aitken_limit(const std::vector<double>& seq) {
  std::vector<double> v;
  for (double s : seq)
    if (std::isfinite(s)) v.push_back(s);
  if (v.size() < 3) return std::numeric_limits<double>::quiet_NaN();
  double a = v[v.size() - 3], b = v[v.size() - 2], c = v.back();
  double den = (c - b) - (b - a);
  if (den == 0) return c;
  return c - (c - b) * (c - b) / den;
}

}  // namespace avlab::spst
