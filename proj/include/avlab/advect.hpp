#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "fieldgen.hpp"
#include "spectral.hpp"

namespace avlab::advect {

using json = nlohmann::json;
using spectral::cplx;
using spectral::Grid;
using spectral::Velocity;

struct ScalarState {
  int n = 0;
  double t = 0.0;
  double kappa = 0.0;
  std::vector<cplx> hat;
  // mean removed from the datum at initialization
  double removed_mean = 0.0;
};

// Scalar from grid samples; the mean is removed and the spectrum truncated to the 2/3 band.
inline ScalarState init_from_samples(const Grid& g, const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) throw ConfigError("initial datum has non-finite values");
  ScalarState s;
  s.n = g.n();
  g.forward(v, s.hat);
  s.removed_mean = s.hat[0].real();
  s.hat[0] = 0.0;
  g.dealias(s.hat);
  g.enforce_hermitian(s.hat.data());
  return s;
}

inline ScalarState init_from_function(const Grid& g, const std::function<double(double, double)>& f) {
  const int n = g.n();
  auto v = g.real_buffer();
  for (int i2 = 0; i2 < n; ++i2)
    for (int i1 = 0; i1 < n; ++i1) v[i2 * n + i1] = f(i1 / double(n), i2 / double(n));
  return init_from_samples(g, v);
}

// Datum specs: "cos1sin2" (default), "mode:k1,k2", "const:c", "random:kmax,seed".
inline ScalarState init_scalar(const std::string& expr, int n) {
  Grid g(n);
  constexpr double tp = 2.0 * std::numbers::pi;
  auto arg = [&](const std::string& prefix) { return expr.substr(prefix.size()); };
  if (expr.empty() || expr == "cos1sin2")
    return init_from_function(g, [](double x1, double x2) { return std::cos(tp * x1) * std::sin(tp * x2); });
  if (expr.rfind("mode:", 0) == 0) {
    int k1 = 0, k2 = 0;
    char comma = 0;
    std::istringstream is(arg("mode:"));
    if (!(is >> k1 >> comma >> k2) || comma != ',') throw ConfigError("bad datum '" + expr + "', expected mode:k1,k2");
    return init_from_function(g, [=](double x1, double x2) { return std::cos(tp * (k1 * x1 + k2 * x2)); });
  }
  if (expr.rfind("const:", 0) == 0) {
    double c = std::stod(arg("const:"));
    return init_from_function(g, [=](double, double) { return c; });
  }
  if (expr.rfind("random:", 0) == 0) {
    int kmax = 0;
    std::uint64_t seed = 0;
    char comma = 0;
    std::istringstream is(arg("random:"));
    if (!(is >> kmax >> comma >> seed) || comma != ',' || kmax < 1)
      throw ConfigError("bad datum '" + expr + "', expected random:kmax,seed");
    if (kmax > n / 3) throw ConfigError("random datum band exceeds the dealiased band of the grid");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    ScalarState s;
    s.n = n;
    s.hat = g.spec_buffer();
    for (int j2 = 0; j2 < n; ++j2)
      for (int j1 = 0; j1 <= kmax; ++j1) {
        int k2 = g.k2_of(j2);
        if (std::abs(k2) > kmax || (j1 == 0 && k2 == 0)) continue;
        double a = z(rng), b = z(rng);
        s.hat[j2 * g.nh() + j1] = cplx(a, b) / (1.0 + j1 * j1 + k2 * k2);
      }
    g.enforce_hermitian(s.hat.data());
    return s;
  }
  throw ConfigError("unknown initial datum '" + expr + "'");
}

inline std::vector<double> to_physical(const Grid& g, const ScalarState& s) {
  auto v = g.real_buffer();
  g.inverse(s.hat, v);
  return v;
}

// phi_1..phi_3 of the exponential integrator, Taylor series near zero.
struct PhiFunctions {
  double e, p1, p2, p3;
};

inline PhiFunctions phi_functions(double z) {
  PhiFunctions f{};
  f.e = std::exp(z);
  if (std::abs(z) < 0.5) {
    // phi_j(z) = sum_k z^k / (k+j)!
    double p1 = 0, p2 = 0, p3 = 0, zk = 1.0;
    double fact1 = 1.0, fact2 = 2.0, fact3 = 6.0;
    for (int k = 0; k < 20; ++k) {
      p1 += zk / fact1;
      p2 += zk / fact2;
      p3 += zk / fact3;
      zk *= z;
      fact1 *= k + 2;
      fact2 *= k + 3;
      fact3 *= k + 4;
    }
    f.p1 = p1;
    f.p2 = p2;
    f.p3 = p3;
  } else {
    double em1 = std::expm1(z);
    f.p1 = em1 / z;
    f.p2 = (em1 - z) / (z * z);
    f.p3 = (em1 - z - 0.5 * z * z) / (z * z * z);
  }
  return f;
}

// Velocity provider from stored streamfunction frames; b is truncated to the 2/3 band so that
// the transport term conserves the discrete L2 norm exactly.
class FieldVelocity {
 public:
  explicit FieldVelocity(const fieldgen::SpaceTimeField& f)
      : f_(f), g_(f.n()), vb_(g_), frame_(g_.real_buffer()), hat_(g_.spec_buffer()) {}

  void operator()(double t, Velocity& v) {
    std::size_t k = f_.frame_at(t);
    for (auto& c : cache_)
      if (c.first == k) {
        v = c.second;
        return;
      }
    f_.read_frame(k, frame_.data());
    g_.forward(frame_.data(), hat_.data());
    g_.dealias(hat_);
    auto& slot = cache_[next_];
    next_ = (next_ + 1) % cache_.size();
    slot.first = k;
    vb_.from_stream_hat(hat_.data(), slot.second);
    v = slot.second;
  }

  // Frame-hold lookup for substeps between stored frames.
  double hold_time(double t) const {
    double u = (t - f_.header().t0) / f_.dt();
    return f_.header().t0 + std::floor(u + 1e-9) * f_.dt();
  }

 private:
  const fieldgen::SpaceTimeField& f_;
  Grid g_;
  spectral::VelocityBuilder vb_;
  std::vector<double> frame_;
  std::vector<cplx> hat_;
  std::array<std::pair<std::size_t, Velocity>, 2> cache_{
      {{static_cast<std::size_t>(-1), {}}, {static_cast<std::size_t>(-1), {}}}};
  std::size_t next_ = 0;
};

// Exponential Adams-Bashforth 3 for d theta/dt = kappa Lap theta - b.grad theta.
// The first two steps use ETD2RK so that the global order stays three.
class EtdSolver {
 public:
  EtdSolver(const Grid& g, double kappa, double h) : g_(g), kappa_(kappa), h_(h) {
    if (kappa < 0.0) throw ConfigError("kappa must be nonnegative");
    const double c = 4.0 * std::numbers::pi * std::numbers::pi * kappa;
    coef_.resize(g.spec_size());
    for (int j2 = 0; j2 < g.n(); ++j2)
      for (int j1 = 0; j1 < g.nh(); ++j1) coef_[j2 * g.nh() + j1] = phi_functions(-c * g.k_sq(j1, j2) * h);
    d_ = g.spec_buffer();
    tmp_ = g.spec_buffer();
    dx_ = g.real_buffer();
    dy_ = g.real_buffer();
  }

  double h() const { return h_; }

  // -P(b.grad theta) in spectral space.
  void transport(const std::vector<cplx>& hat, const Velocity& b, std::vector<cplx>& out) {
    g_.derivative(hat.data(), d_.data(), 0);
    g_.inverse(d_.data(), dx_.data());
    g_.derivative(hat.data(), d_.data(), 1);
    g_.inverse(d_.data(), dy_.data());
    for (std::size_t i = 0; i < dx_.size(); ++i) dx_[i] = -(b.b1[i] * dx_[i] + b.b2[i] * dy_[i]);
    out.resize(g_.spec_size());
    g_.forward(dx_.data(), out.data());
    g_.dealias(out);
    out[0] = 0.0;
    g_.enforce_hermitian(out.data());
  }

  template <class VelocityFn>
  void step(ScalarState& s, VelocityFn& vel, bool zero_velocity = false) {
    const std::size_t S = g_.spec_size();
    if (zero_velocity) {
      for (std::size_t i = 0; i < S; ++i) s.hat[i] *= coef_[i].e;
      s.t += h_;
      ++steps_;
      return;
    }
    vel(s.t, b_);
    std::vector<cplx> nn;
    transport(s.hat, b_, nn);
    if (steps_ < 2) {
      // ETD2RK
      std::vector<cplx> a(S);
      for (std::size_t i = 0; i < S; ++i) a[i] = coef_[i].e * s.hat[i] + h_ * coef_[i].p1 * nn[i];
      vel(s.t + h_, b_);
      transport(a, b_, tmp_);
      for (std::size_t i = 0; i < S; ++i) s.hat[i] = a[i] + h_ * coef_[i].p2 * (tmp_[i] - nn[i]);
    } else {
      const auto& n1 = hist_[0];
      const auto& n2 = hist_[1];
      for (std::size_t i = 0; i < S; ++i) {
        const auto& c = coef_[i];
        cplx d1 = nn[i] - n1[i];
        cplx d2 = nn[i] - 2.0 * n1[i] + n2[i];
        s.hat[i] = c.e * s.hat[i] + h_ * (c.p1 * nn[i] + c.p2 * d1 + (c.p3 + 0.5 * c.p2) * d2);
      }
    }
    hist_[1] = std::move(hist_[0]);
    hist_[0] = std::move(nn);
    g_.enforce_hermitian(s.hat.data());
    s.hat[0] = 0.0;
    s.t += h_;
    ++steps_;
  }

 private:
  const Grid& g_;
  double kappa_, h_;
  std::vector<PhiFunctions> coef_;
  std::vector<cplx> d_, tmp_;
  std::vector<double> dx_, dy_;
  std::array<std::vector<cplx>, 2> hist_;
  Velocity b_;
  long steps_ = 0;
};

struct Diagnostics {
  double kappa = 0.0;
  std::vector<double> t, l2_sq, rate, cum_diss;
};

inline void record(const Grid& g, const ScalarState& s, Diagnostics& d) {
  d.t.push_back(s.t);
  d.l2_sq.push_back(g.l2_sq(s.hat.data()));
  d.rate.push_back(2.0 * s.kappa * g.grad_sq(s.hat.data()));
}

// Cumulative integral of uniformly sampled data, fourth-order accurate.
inline std::vector<double> cumulative_integral(const std::vector<double>& y, double h) {
  const std::size_t n = y.size();
  std::vector<double> c(n, 0.0);
  if (n < 2) return c;
  if (n < 4) {
    for (std::size_t i = 1; i < n; ++i) c[i] = c[i - 1] + 0.5 * h * (y[i - 1] + y[i]);
    return c;
  }
  for (std::size_t i = 1; i < n; ++i) {
    double inc;
    if (i == 1)
      inc = h / 24.0 * (9 * y[0] + 19 * y[1] - 5 * y[2] + y[3]);
    else if (i == n - 1)
      inc = h / 24.0 * (9 * y[n - 1] + 19 * y[n - 2] - 5 * y[n - 3] + y[n - 4]);
    else
      inc = h / 24.0 * (-y[i - 2] + 13 * y[i - 1] + 13 * y[i] - y[i + 1]);
    c[i] = c[i - 1] + inc;
  }
  return c;
}

struct RunOptions {
  double t_end = 0.5;
  // scalar substeps per field step, with frame hold
  int refine = 1;
  bool zero_velocity = false;
  // called with (step, states) at step 0 and after every step
  std::function<void(std::size_t, const std::vector<ScalarState>&)> observe;
};

// Advances several diffusivities together, sharing each velocity frame.
template <class VelocityFn>
std::vector<Diagnostics> run_scalar(const Grid& g, VelocityFn& vel, std::vector<ScalarState>& states, double h,
                                    std::size_t nsteps, bool zero_velocity = false,
                                    const std::function<void(std::size_t, const std::vector<ScalarState>&)>& observe = {}) {
  std::vector<Diagnostics> out(states.size());
  std::vector<EtdSolver> solvers;
  solvers.reserve(states.size());
  for (std::size_t j = 0; j < states.size(); ++j) {
    if (states[j].kappa < 0.0) throw ConfigError("kappa must be nonnegative");
    solvers.emplace_back(g, states[j].kappa, h);
    out[j].kappa = states[j].kappa;
    record(g, states[j], out[j]);
  }
  if (observe) observe(0, states);
  for (std::size_t n = 0; n < nsteps; ++n) {
    for (std::size_t j = 0; j < states.size(); ++j) {
      solvers[j].step(states[j], vel, zero_velocity);
      record(g, states[j], out[j]);
      double e = out[j].l2_sq.back();
      if (!std::isfinite(e))
        throw NumericalError("non-finite scalar at step " + std::to_string(n + 1) + " (kappa " +
                             std::to_string(states[j].kappa) + ")");
    }
    if (observe) observe(n + 1, states);
  }
  for (auto& d : out) d.cum_diss = cumulative_integral(d.rate, h);
  return out;
}

inline std::vector<Diagnostics> run_scalar(const fieldgen::SpaceTimeField& field, std::vector<ScalarState>& states,
                                           const RunOptions& opt) {
  if (opt.refine < 1) throw ConfigError("refine must be a positive integer");
  if (opt.t_end > field.header().tf + 1e-12)
    throw ConfigError("t_end " + std::to_string(opt.t_end) + " exceeds the stored field span");
  for (auto& s : states)
    if (s.n != field.n()) throw ConfigError("scalar and field grids differ");
  Grid g(field.n());
  FieldVelocity fv(field);
  auto hold = [&](double t, Velocity& v) { fv(fv.hold_time(t), v); };
  double h = field.dt() / opt.refine;
  auto nsteps = static_cast<std::size_t>(std::llround(opt.t_end / h));
  if (opt.refine == 1) return run_scalar(g, fv, states, h, nsteps, opt.zero_velocity, opt.observe);
  return run_scalar(g, hold, states, h, nsteps, opt.zero_velocity, opt.observe);
}

// Relative mismatch of the energy equality at the final time.
inline double energy_residual(const Diagnostics& d) {
  double e0 = d.l2_sq.front();
  return std::abs(e0 - d.l2_sq.back() - d.cum_diss.back()) / e0;
}

struct RateSummary {
  double kappa = 0.0;
  double max_rate = 0.0;
  double mean_rate = 0.0;
  double l2_final = 0.0;
};

struct Report {
  std::vector<RateSummary> per_kappa;
  double t1 = 0.0, tf = 0.0;
  // mean rate at the smallest kappa over that at the largest; unset for one kappa
  std::optional<double> rate_ratio;
  std::optional<bool> anomalous;
  bool resampled = false;
};

inline double interp_linear(const std::vector<double>& x, const std::vector<double>& y, double t) {
  if (t <= x.front()) return y.front();
  if (t >= x.back()) return y.back();
  auto it = std::upper_bound(x.begin(), x.end(), t);
  std::size_t i = static_cast<std::size_t>(it - x.begin());
  double w = (t - x[i - 1]) / (x[i] - x[i - 1]);
  return (1 - w) * y[i - 1] + w * y[i];
}

// Summaries over [t1, tf]; runs on other time grids are resampled linearly onto the first.
inline Report dissipation_report(std::vector<Diagnostics>& runs, double t1, double threshold = 0.5) {
  if (runs.empty()) throw ConfigError("no runs to report");
  Report r;
  r.t1 = t1;
  r.tf = runs[0].t.back();
  const auto& ref = runs[0].t;
  for (auto& d : runs) {
    if (d.t != ref) {
      Diagnostics res;
      res.kappa = d.kappa;
      res.t = ref;
      for (double t : ref) {
        res.l2_sq.push_back(interp_linear(d.t, d.l2_sq, t));
        res.rate.push_back(interp_linear(d.t, d.rate, t));
        res.cum_diss.push_back(interp_linear(d.t, d.cum_diss, t));
      }
      d = std::move(res);
      r.resampled = true;
    }
    RateSummary s;
    s.kappa = d.kappa;
    s.l2_final = d.l2_sq.back();
    int cnt = 0;
    for (std::size_t i = 0; i < d.t.size(); ++i)
      if (d.t[i] >= t1 - 1e-12) {
        s.max_rate = std::max(s.max_rate, d.rate[i]);
        s.mean_rate += d.rate[i];
        ++cnt;
      }
    if (cnt == 0) throw ConfigError("report window starts after the end of the run");
    s.mean_rate /= cnt;
    r.per_kappa.push_back(s);
  }
  if (runs.size() >= 2) {
    auto lo = std::min_element(r.per_kappa.begin(), r.per_kappa.end(), [](auto& a, auto& b) { return a.kappa < b.kappa; });
    auto hi = std::max_element(r.per_kappa.begin(), r.per_kappa.end(), [](auto& a, auto& b) { return a.kappa < b.kappa; });
    r.rate_ratio = lo->mean_rate / hi->mean_rate;
    r.anomalous = *r.rate_ratio > threshold;
  }
  return r;
}

inline std::string to_csv(const std::vector<Diagnostics>& runs, std::size_t every = 1) {
  std::ostringstream os;
  os.precision(12);
  os << "t,kappa,l2_sq,rate,cum_diss\n";
  for (auto& d : runs)
    for (std::size_t i = 0; i < d.t.size(); ++i)
      if (i % every == 0 || i + 1 == d.t.size())
        os << d.t[i] << ',' << d.kappa << ',' << d.l2_sq[i] << ',' << d.rate[i] << ',' << d.cum_diss[i] << '\n';
  return os.str();
}

inline json to_json(const Report& r) {
  json j;
  j["t1"] = r.t1;
  j["tf"] = r.tf;
  j["resampled"] = r.resampled;
  j["per_kappa"] = json::array();
  for (auto& s : r.per_kappa)
    j["per_kappa"].push_back(
        {{"kappa", s.kappa}, {"max_rate", s.max_rate}, {"mean_rate", s.mean_rate}, {"l2_final", s.l2_final}});
  j["rate_ratio"] = r.rate_ratio ? json(*r.rate_ratio) : json(nullptr);
  j["anomalous"] = r.anomalous ? json(*r.anomalous) : json(nullptr);
  return j;
}

}  // namespace avlab::advect
