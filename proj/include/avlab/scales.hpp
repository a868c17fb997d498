#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"

namespace avlab::scales {

using json = nlohmann::json;

// Hölder and scale-separation exponents of the construction.
struct Exponents {
  double alpha = 0.0;
  double beta = 1.0;
  double q = 0.0;
  double delta = 0.0;
  double gamma = 0.0;
  bool q_infinite = false;
};

inline double gamma_from_alpha(double alpha) {
  return (1.0 + alpha) * (1.0 - 3.0 * alpha) / (5.0 * alpha + 1.0);
}

inline Exponents derive_exponents_beta(double beta) {
  if (!(beta >= 1.0 && beta <= 4.0 / 3.0))
    throw ConfigError("beta must lie in [1, 4/3] (interior (1, 4/3) for a non-degenerate field), got " +
                      std::to_string(beta));
  Exponents e;
  e.beta = beta;
  e.alpha = beta - 1.0;
  if (beta == 1.0) {
    e.q = std::numeric_limits<double>::infinity();
    e.q_infinite = true;
    e.delta = 1.0 / 16.0;
    e.gamma = 1.0;
    return e;
  }
  e.q = beta / (4.0 * (beta - 1.0));
  e.delta = (e.q - 1.0) * (e.q - 1.0) / (4.0 * (e.q + 1.0) * (4.0 * e.q - 1.0));
  e.gamma = beta * (e.q - 1.0) / (e.q + 1.0);
  return e;
}

inline Exponents derive_exponents_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0 / 3.0))
    throw ConfigError("alpha must lie in [0, 1/3], got " + std::to_string(alpha));
  return derive_exponents_beta(alpha + 1.0);
}

// Richardson exponent of backward tracer dispersion for a C^alpha field.
inline double richardson_exponent(double alpha) {
  return 1.0 + (1.0 + alpha + gamma_from_alpha(alpha)) / (1.0 - alpha);
}

// Obukhov–Corrsin regularity threshold.
inline double obukhov_corrsin(double alpha) { return (1.0 - alpha) / 2.0; }

enum class Mode { hypergeometric, geometric };

inline std::string to_string(Mode m) { return m == Mode::geometric ? "geometric" : "hypergeometric"; }

inline Mode mode_from_string(const std::string& s) {
  if (s == "hypergeometric") return Mode::hypergeometric;
  if (s == "geometric") return Mode::geometric;
  throw ConfigError("mode must be 'hypergeometric' or 'geometric', got '" + s + "'");
}

struct Schedule {
  Exponents ex;
  double Lambda = 2.5;
  int M = 1;
  Mode mode = Mode::hypergeometric;
  bool geometric_hyper_eps0 = false;
  std::vector<std::uint64_t> eps_inv;
  std::vector<double> eps, a, tau, tau_p, tau_pp;

  double eps_ratio_bound() const;
};

namespace detail {

constexpr double kMaxExactInteger = 9007199254740992.0;  // 2^53

inline double hyper_eps_inv(double Lambda, double q, int m) {
  return std::ceil(std::pow(Lambda, std::pow(q, m) / (q - 1.0)));
}

}  // namespace detail

inline Schedule build_schedule(const Exponents& ex, double Lambda, int M, Mode mode,
                               bool geometric_hyper_eps0 = false) {
  if (!(Lambda > 1.0)) throw ConfigError("Lambda must exceed 1");
  if (M < 1) throw ConfigError("M must be at least 1");
  bool hyper_needed = mode == Mode::hypergeometric || geometric_hyper_eps0;
  if (hyper_needed && !(ex.q > 1.0 && std::isfinite(ex.q)))
    throw ConfigError("hypergeometric scales need finite q > 1 (beta strictly inside (1, 4/3))");

  Schedule s;
  s.ex = ex;
  s.Lambda = Lambda;
  s.M = M;
  s.mode = mode;
  s.geometric_hyper_eps0 = geometric_hyper_eps0;

  auto raw = [&](int m) -> double {
    if (mode == Mode::hypergeometric) return detail::hyper_eps_inv(Lambda, ex.q, m);
    if (m == 0) return geometric_hyper_eps0 ? detail::hyper_eps_inv(Lambda, ex.q, 0) : 1.0;
    return std::ceil(std::pow(Lambda, m));
  };

  for (int m = 0; m <= M; ++m) {
    double v = raw(m);
    if (!std::isfinite(v) || v > detail::kMaxExactInteger) {
      int feasible = m - 1;
      throw ConfigError("level " + std::to_string(m) +
                        " unreachable: 1/eps exceeds the exactly representable integer range; "
                        "largest feasible M = " + std::to_string(feasible));
    }
    s.eps_inv.push_back(static_cast<std::uint64_t>(v));
  }
  // A hypergeometric eps[0] under geometric levels is a reference scale only and may be finer than eps[1].
  int first = (mode == Mode::geometric && geometric_hyper_eps0) ? 2 : 1;
  for (int m = first; m <= M; ++m)
    if (s.eps_inv[m] <= s.eps_inv[m - 1])
      throw ConfigError("eps must strictly decrease; level " + std::to_string(m) + " repeats the previous scale");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int m = 0; m <= M; ++m) {
    double e = 1.0 / static_cast<double>(s.eps_inv[m]);
    s.eps.push_back(e);
    s.a.push_back(std::pow(e, ex.beta - 2.0));
    if (m == 0) {
      s.tau.push_back(nan);
      s.tau_p.push_back(nan);
      s.tau_pp.push_back(nan);
      continue;
    }
    double fl = std::floor(s.a[m - 1] / std::pow(e, 2.0 * ex.delta));
    if (fl < 1.0) throw ConfigError("tau'' undefined at level " + std::to_string(m) + ": a_{m-1} eps_m^{-2 delta} < 1");
    double tpp = 1.0 / (4.0 * fl);
    double tp = tpp / (3.0 * (4.0 * std::ceil(std::pow(e, -ex.delta)) + 1.0));
    s.tau_pp.push_back(tpp);
    s.tau_p.push_back(tp);
    s.tau.push_back(tp);
  }
  return s;
}

// max over m of eps[m+1] / eps[m]^q; stays O(1) for hypergeometric scales.
inline double Schedule::eps_ratio_bound() const {
  double r = 0.0;
  for (int m = 0; m < M; ++m) r = std::max(r, eps[m + 1] / std::pow(eps[m], ex.q));
  return r;
}

// ---- constraint report ----

enum class Verdict { pass, marginal, fail };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::marginal: return "marginal";
    default: return "fail";
  }
}

// A quantity that should be much smaller than one.
struct Ratio {
  std::string name;
  double value = 0.0;
  Verdict verdict = Verdict::pass;
};

struct LevelReport {
  int m = 0;
  std::vector<Ratio> ratios;
};

struct ConstraintReport {
  double kappa = 0.0;
  double slack = 10.0;
  std::vector<LevelReport> levels;
  bool all_pass() const {
    for (auto& l : levels)
      for (auto& r : l.ratios)
        if (r.verdict != Verdict::pass) return false;
    return true;
  }
};

inline Verdict judge(double ratio, double slack) {
  // A relative tolerance keeps exact equalities from flipping on rounding.
  double tol = 1e-12;
  if (ratio <= 1.0 / slack * (1.0 + tol)) return Verdict::pass;
  if (ratio <= 1.0 + tol) return Verdict::marginal;
  return Verdict::fail;
}

inline ConstraintReport validate_constraints(const Schedule& s, double kappa, double slack = 10.0) {
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  ConstraintReport rep;
  rep.kappa = kappa;
  rep.slack = slack;
  for (int m = 1; m <= s.M; ++m) {
    LevelReport lr;
    lr.m = m;
    auto add = [&](std::string name, double v) { lr.ratios.push_back({std::move(name), v, judge(v, slack)}); };
    add("tau/tau_p", s.tau[m] / s.tau_p[m]);
    add("tau_p/tau_pp", s.tau_p[m] / s.tau_pp[m]);
    add("tau_pp*a_prev", s.tau_pp[m] * s.a[m - 1]);
    add("a*eps^3/(kappa*eps_prev)", s.a[m] * std::pow(s.eps[m], 3) / (kappa * s.eps[m - 1]));
    add("eps^2/(kappa*tau)", s.eps[m] * s.eps[m] / (kappa * s.tau[m]));
    rep.levels.push_back(std::move(lr));
  }
  return rep;
}

// ---- serialization ----

inline json to_json(const Exponents& e) {
  auto num = [](double v) -> json { return std::isfinite(v) ? json(v) : json("inf"); };
  return json{{"alpha", e.alpha}, {"beta", e.beta}, {"q", num(e.q)}, {"delta", e.delta}, {"gamma", e.gamma}};
}

inline json to_json(const Schedule& s) {
  auto arr = [](const std::vector<double>& v) {
    json j = json::array();
    for (double x : v) j.push_back(std::isfinite(x) ? json(x) : json(nullptr));
    return j;
  };
  json j = to_json(s.ex);
  j["Lambda"] = s.Lambda;
  j["M"] = s.M;
  j["mode"] = to_string(s.mode);
  if (s.mode == Mode::geometric) j["geometric_hyper_eps0"] = s.geometric_hyper_eps0;
  j["eps_inv"] = s.eps_inv;
  j["a"] = arr(s.a);
  j["tau"] = arr(s.tau);
  j["tau_p"] = arr(s.tau_p);
  j["tau_pp"] = arr(s.tau_pp);
  return j;
}

inline Schedule schedule_from_json(const json& j) {
  Exponents ex = derive_exponents_beta(j.at("beta").get<double>());
  return build_schedule(ex, j.at("Lambda").get<double>(), j.at("M").get<int>(),
                        mode_from_string(j.at("mode").get<std::string>()),
                        j.value("geometric_hyper_eps0", false));
}

inline json to_json(const ConstraintReport& r) {
  json levels = json::array();
  for (auto& l : r.levels) {
    json jl{{"m", l.m}};
    for (auto& x : l.ratios) jl[x.name] = {{"value", x.value}, {"verdict", to_string(x.verdict)}};
    levels.push_back(jl);
  }
  return json{{"kappa", r.kappa}, {"slack", r.slack}, {"levels", levels}};
}

}  // namespace avlab::scales
