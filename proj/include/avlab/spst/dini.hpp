#pragma once

// Finite-resolution detector for non-Lipschitz singular sets: upper Dini-type
// difference quotients against a modulus, plus a forward probe for the set of
// points that reach the detected set in finite time.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "../error.hpp"
#include "ode.hpp"

namespace avlab::spst {

using VectorField = std::function<void(const State& x, State& dx)>;

enum class Modulus { identity, z_log };

inline Modulus modulus_from_string(const std::string& s) {
  if (s == "identity") return Modulus::identity;
  if (s == "zlog" || s == "z_log") return Modulus::z_log;
  throw ConfigError("unknown modulus '" + s + "' (expected identity or zlog)");
}

inline double modulus(Modulus m, double z) { return m == Modulus::identity ? z : z * std::log(1 / z); }

struct DiniOptions {
  int directions = 8;  // in the plane; the line uses +-1
  Modulus omega = Modulus::identity;
  double threshold = 100.0;
  // t = 2^-j for j in [j_min, j_max]; the estimate is the max over the last `tail` of them
  int j_min = 4, j_max = 24, tail = 3;
};

struct DiniScan {
  std::vector<State> flagged;
  std::vector<double> estimate;  // best quotient at each flagged point
  std::size_t scanned = 0;
};

inline std::vector<State> unit_directions(int dim, int count) {
  if (dim == 1) return {{1.0}, {-1.0}};
  if (dim != 2) throw ConfigError("the scanner handles dimensions one and two");
  std::vector<State> v;
  for (int k = 0; k < count; ++k) {
    double th = 2 * std::numbers::pi * k / count;
    v.push_back({std::cos(th), std::sin(th)});
  }
  return v;
}

// <f(x + t v) - f(x), v> / Omega(t)
inline double dini_quotient(const VectorField& f, const State& x, const State& v, double t, Modulus m) {
  State y = x, fx(x.size()), fy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += t * v[i];
  f(x, fx);
  f(y, fy);
  double s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (fy[i] - fx[i]) * v[i];
  return s / modulus(m, t);
}

inline double dini_estimate(const VectorField& f, const State& x, const State& v, const DiniOptions& o) {
  double best = -std::numeric_limits<double>::infinity();
  for (int j = std::max(o.j_min, o.j_max - o.tail + 1); j <= o.j_max; ++j)
    best = std::max(best, dini_quotient(f, x, v, std::ldexp(1.0, -j), o.omega));
  return best;
}

inline DiniScan dini_scan(const VectorField& f, const std::vector<State>& points, const DiniOptions& o = {}) {
  if (o.omega == Modulus::z_log && o.j_min < 2) throw ConfigError("z log(1/z) needs t < 1/e");
  DiniScan s;
  if (points.empty()) return s;
  auto dirs = unit_directions(static_cast<int>(points[0].size()), o.directions);
  for (auto& x : points) {
    double best = -std::numeric_limits<double>::infinity();
    for (auto& v : dirs) best = std::max(best, dini_estimate(f, x, v, o));
    ++s.scanned;
    if (best > o.threshold) {
      s.flagged.push_back(x);
      s.estimate.push_back(best);
    }
  }
  return s;
}

// Tensor grid over a box, inclusive of both ends.
inline std::vector<State> grid_points(const State& lo, const State& hi, const std::vector<int>& counts) {
  if (lo.size() != hi.size() || lo.size() != counts.size() || lo.empty() || lo.size() > 2)
    throw ConfigError("grid box must be one or two dimensional");
  auto axis = [&](std::size_t a) {
    std::vector<double> v;
    int n = counts[a];
    if (n < 2) throw ConfigError("grid needs at least two points per axis");
    for (int i = 0; i < n; ++i) v.push_back(lo[a] + (hi[a] - lo[a]) * i / (n - 1));
    return v;
  };
  std::vector<State> pts;
  auto ax = axis(0);
  if (lo.size() == 1) {
    for (double a : ax) pts.push_back({a});
  } else {
    auto ay = axis(1);
    for (double b : ay)
      for (double a : ax) pts.push_back({a, b});
  }
  return pts;
}

// Euclidean distance to a finite point set.
inline double distance_to(const std::vector<State>& set, const State& x) {
  double best = std::numeric_limits<double>::infinity();
  for (auto& p : set) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (p[i] - x[i]) * (p[i] - x[i]);
    best = std::min(best, s);
  }
  return std::sqrt(best);
}

struct StableSetProbe {
  bool reaches = false;
  double time = std::numeric_limits<double>::quiet_NaN();
};

// Does the forward orbit of x0 come within tol of the set before the horizon?
inline StableSetProbe probe_stable_set(const VectorField& f, const State& x0, double horizon,
                                       const std::function<double(const State&)>& dist, double tol,
                                       OdeOptions o = {}) {
  Rhs r = [&](const State& x, State& dx, double) { f(x, dx); };
  auto t = crossing_times(r, x0, 0.0, horizon, dist, {tol}, o);
  StableSetProbe p;
  p.reaches = std::isfinite(t[0]);
  p.time = t[0];
  return p;
}

}  // namespace avlab::spst
