#pragma once

// Weighted empirical measures in one or two dimensions, stratified pushforward
// of uniform parameter samples, and 1-Wasserstein distances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "../error.hpp"
#include "../rng.hpp"
#include "ode.hpp"

namespace avlab::spst {

// A parameter-to-state map; dimension fixed.
struct Curve {
  int dim = 1;
  std::function<State(double)> eval;
  std::string name;
  State operator()(double eps) const { return eval(eps); }
};

struct EmpiricalMeasure {
  int dim = 1;
  std::vector<State> x;
  std::vector<double> w;
  // where the samples came from
  double eps = 0.0;
  std::string sampler;

  std::size_t size() const { return x.size(); }

  void normalize() {
    double s = 0;
    for (double v : w) {
      if (!(v >= 0)) throw ConfigError("negative measure weight");
      s += v;
    }
    if (!(s > 0)) throw ConfigError("measure has no mass");
    for (double& v : w) v /= s;
  }
};

inline EmpiricalMeasure dirac(const State& p) {
  EmpiricalMeasure m;
  m.dim = static_cast<int>(p.size());
  m.x = {p};
  m.w = {1.0};
  m.sampler = "dirac";
  return m;
}

// Sorted summation: bitwise independent of sample order.
inline double sorted_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0;
  for (double a : v) s += a;
  return s;
}

// <mu, F>
inline double average(const EmpiricalMeasure& m, const std::function<double(const State&)>& F) {
  std::vector<double> t(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) t[i] = m.w[i] * F(m.x[i]);
  return sorted_sum(std::move(t));
}

inline double mean(const EmpiricalMeasure& m, int axis = 0) {
  return average(m, [axis](const State& p) { return p[axis]; });
}

// weighted variance of one coordinate, Bessel-corrected for equal weights
inline double variance(const EmpiricalMeasure& m, int axis = 0) {
  double mu = mean(m, axis);
  double v = average(m, [&](const State& p) { return (p[axis] - mu) * (p[axis] - mu); });
  std::size_t n = m.size();
  return n > 1 ? v * n / (n - 1) : 0.0;
}

// Stratified uniform samples on [0, eps]: one jittered point per stratum.
// An optional reparametrization h maps them to h(s) before evaluation.
inline std::vector<double> stratified_parameters(double eps, std::size_t n, std::uint64_t seed,
                                                 const std::function<double(double)>& h = {}) {
  if (!(eps > 0)) throw ConfigError("pushforward needs eps > 0");
  if (n < 100) throw ConfigError("pushforward needs at least 100 samples");
  rng::CounterRng r(seed, rng::Stream::classify);
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = r.uniform2(i, 0)[0];
    s[i] = eps * (static_cast<double>(i) + u) / static_cast<double>(n);
    if (h) s[i] = h(s[i]);
  }
  return s;
}

inline EmpiricalMeasure pushforward(const Curve& c, double eps, std::size_t n, std::uint64_t seed = 1,
                                    const std::function<double(double)>& h = {}) {
  EmpiricalMeasure m;
  m.dim = c.dim;
  m.eps = eps;
  m.sampler = h ? "stratified+reweighted" : "stratified";
  for (double s : stratified_parameters(eps, n, seed, h)) {
    State p = c(s);
    if (static_cast<int>(p.size()) != c.dim) throw ConfigError("curve returned the wrong dimension");
    m.x.push_back(std::move(p));
  }
  m.w.assign(m.x.size(), 1.0 / static_cast<double>(m.x.size()));
  return m;
}

// Exact W1 between weighted point sets on the line: integral of |F - G|.
inline double w1_line(std::vector<std::pair<double, double>> a, std::vector<std::pair<double, double>> b) {
  std::vector<std::pair<double, double>> ev;
  ev.reserve(a.size() + b.size());
  for (auto& p : a) ev.emplace_back(p.first, p.second);
  for (auto& p : b) ev.emplace_back(p.first, -p.second);
  std::sort(ev.begin(), ev.end());
  double cdf = 0, w = 0;
  for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
    cdf += ev[i].second;
    w += std::abs(cdf) * (ev[i + 1].first - ev[i].first);
  }
  return w;
}

inline std::vector<std::pair<double, double>> projected(const EmpiricalMeasure& m, double c, double s) {
  std::vector<std::pair<double, double>> v(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    double p = m.x[i][0] * c + (m.dim > 1 ? m.x[i][1] * s : 0.0);
    v[i] = {p, m.w[i]};
  }
  return v;
}

// Exact in one dimension; averaged over fixed directions in the plane.
inline double wasserstein1(const EmpiricalMeasure& a, const EmpiricalMeasure& b, int directions = 64) {
  if (a.dim != b.dim) throw ConfigError("measures live in different dimensions");
  if (a.dim == 1) return w1_line(projected(a, 1, 0), projected(b, 1, 0));
  if (a.dim != 2) throw ConfigError("W1 is shipped for dimensions one and two");
  double s = 0;
  for (int k = 0; k < directions; ++k) {
    double th = std::numbers::pi * k / directions;
    s += w1_line(projected(a, std::cos(th), std::sin(th)), projected(b, std::cos(th), std::sin(th)));
  }
  return s / directions;
}

}  // namespace avlab::spst
