#pragma once

// Heuristic Strong / Weak / Dirac / delta-LSP classifier over dyadic eps levels.
// Verdicts always carry the moment tables they were derived from.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "../error.hpp"
#include "measure.hpp"

namespace avlab::spst {

enum class Verdict { strong, weak, dirac_selection, delta_lsp, inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::strong: return "Strong";
    case Verdict::weak: return "Weak";
    case Verdict::dirac_selection: return "DiracSelection";
    case Verdict::delta_lsp: return "DeltaLSP";
    default: return "Inconclusive";
  }
}

struct LevelStats {
  double eps = 0;
  std::vector<double> mean;
  // total variance (trace of the covariance) and its sampling error
  double var = 0, var_se = 0;
  // fraction of mass in each half of the observed range, first coordinate
  double upper_mass = 0;
};

struct Atom {
  double location = 0, weight = 0;
};

struct SubsequenceProbe {
  std::vector<double> eps_a, eps_b;
  std::vector<double> value_a, value_b;  // first coordinate along each subsequence
  double limit_a = 0, limit_b = 0, gap = 0;
  bool separated = false;
};

struct ClassifyOptions {
  double eps0 = 0.1;
  int levels = 10;
  std::size_t samples = 2000;
  std::uint64_t seed = 1;
  // fractions of the observable range
  double tol_nd = 1e-2, tol_osc = 1e-2;
  // tail decay exponent of the variance that counts as vanishing
  double vanishing_slope = 0.25;
  // optional declared subsequence pair (eps values, decreasing)
  std::vector<double> subseq_a, subseq_b;
};

struct SpStVerdict {
  Verdict verdict = Verdict::inconclusive;
  std::string reason;
  std::vector<LevelStats> levels;
  double range = 0;  // spread of the first coordinate over all samples
  double tol_nd = 0, tol_osc = 0, noise = 0;
  double osc_excess = 0, last_step = 0, decay_slope = 0;
  std::vector<Atom> atoms;  // one-dimensional curves only, at the finest level
  SubsequenceProbe probe;
};

inline LevelStats level_stats(const EmpiricalMeasure& m, double lo, double hi) {
  LevelStats s;
  s.eps = m.eps;
  const double n = static_cast<double>(m.size());
  double m4 = 0;
  std::vector<double> dev2(m.size(), 0.0);
  for (int a = 0; a < m.dim; ++a) {
    double mu = mean(m, a);
    s.mean.push_back(mu);
    for (std::size_t i = 0; i < m.size(); ++i) dev2[i] += (m.x[i][a] - mu) * (m.x[i][a] - mu);
  }
  s.var = sorted_sum(dev2) / std::max(1.0, n - 1);
  std::vector<double> q(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) q[i] = dev2[i] * dev2[i];
  m4 = sorted_sum(q) / n;
  s.var_se = std::sqrt(std::max(0.0, m4 - s.var * s.var) / n);
  double mid = 0.5 * (lo + hi);
  s.upper_mass = average(m, [mid](const State& p) { return p[0] > mid ? 1.0 : 0.0; });
  return s;
}

// Two-cluster split of a one-dimensional sample; medians and masses.
inline std::vector<Atom> two_atoms(const EmpiricalMeasure& m) {
  std::vector<double> v;
  for (auto& p : m.x) v.push_back(p[0]);
  std::sort(v.begin(), v.end());
  double c0 = v.front(), c1 = v.back();
  std::size_t cut = v.size() / 2;
  for (int it = 0; it < 100; ++it) {
    double mid = 0.5 * (c0 + c1);
    std::size_t k = static_cast<std::size_t>(std::upper_bound(v.begin(), v.end(), mid) - v.begin());
    if (k == 0 || k == v.size()) {
      cut = k;
      break;
    }
    double n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < k; ++i) n0 += v[i];
    for (std::size_t i = k; i < v.size(); ++i) n1 += v[i];
    c0 = n0 / k;
    c1 = n1 / (v.size() - k);
    if (k == cut) break;
    cut = k;
  }
  auto median = [&](std::size_t a, std::size_t b) { return 0.5 * (v[a + (b - a - 1) / 2] + v[a + (b - a) / 2]); };
  std::vector<Atom> out;
  const double n = static_cast<double>(v.size());
  if (cut > 0) out.push_back({median(0, cut), cut / n});
  if (cut < v.size()) out.push_back({median(cut, v.size()), (v.size() - cut) / n});
  return out;
}

inline SpStVerdict classify_spst(const Curve& c, ClassifyOptions opt = {}) {
  if (opt.levels < 6) throw ConfigError("classification needs at least 6 dyadic levels");
  SpStVerdict r;
  std::vector<EmpiricalMeasure> ms;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int j = 0; j < opt.levels; ++j) {
    double eps = std::ldexp(opt.eps0, -j);
    ms.push_back(pushforward(c, eps, opt.samples, opt.seed * 1000003ull + static_cast<std::uint64_t>(j)));
    for (auto& p : ms.back().x) {
      lo = std::min(lo, p[0]);
      hi = std::max(hi, p[0]);
    }
  }
  SubsequenceProbe& pr = r.probe;
  pr.eps_a = opt.subseq_a;
  pr.eps_b = opt.subseq_b;
  for (double e : pr.eps_a) pr.value_a.push_back(c(e)[0]);
  for (double e : pr.eps_b) pr.value_b.push_back(c(e)[0]);
  for (double v : pr.value_a) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : pr.value_b) lo = std::min(lo, v), hi = std::max(hi, v);

  r.range = hi - lo;
  // the largest variance a law on the observed range can have
  double var_scale = 0.25 * r.range * r.range;
  r.tol_nd = opt.tol_nd * var_scale;
  r.tol_osc = opt.tol_osc * var_scale;
  for (auto& m : ms) r.levels.push_back(level_stats(m, lo, hi));

  // tail: the finest half of the levels
  const int J = opt.levels, first = J - (J + 1) / 2;
  double tv = 0, se2 = 0;
  for (int j = first + 1; j < J; ++j) tv += std::abs(r.levels[j].var - r.levels[j - 1].var);
  for (int j = first; j < J; ++j) se2 += r.levels[j].var_se * r.levels[j].var_se;
  r.noise = 3 * std::sqrt(se2);
  r.osc_excess = tv - std::abs(r.levels[J - 1].var - r.levels[first].var);
  r.last_step = std::abs(r.levels[J - 1].var - r.levels[J - 2].var);
  {
    double mx = 0, my = 0, n = 0;
    for (int j = first; j < J; ++j) {
      mx += std::log(r.levels[j].eps);
      my += std::log(std::max(r.levels[j].var, 1e-300));
      ++n;
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (int j = first; j < J; ++j) {
      double dx = std::log(r.levels[j].eps) - mx;
      sxx += dx * dx;
      sxy += dx * (std::log(std::max(r.levels[j].var, 1e-300)) - my);
    }
    r.decay_slope = sxy / sxx;
  }
  if (!pr.value_a.empty() && !pr.value_b.empty()) {
    auto tail_mean = [](const std::vector<double>& v) {
      std::size_t k = std::max<std::size_t>(1, v.size() / 2);
      double s = 0;
      for (std::size_t i = v.size() - k; i < v.size(); ++i) s += v[i];
      return s / k;
    };
    pr.limit_a = tail_mean(pr.value_a);
    pr.limit_b = tail_mean(pr.value_b);
    pr.gap = std::abs(pr.limit_a - pr.limit_b);
    pr.separated = pr.gap > std::max(std::sqrt(r.tol_nd), 1e-12);
  }
  if (ms.back().dim == 1) r.atoms = two_atoms(ms.back());

  const double terminal = r.levels.back().var;
  const double osc_tol = r.tol_osc + r.noise;
  if (r.osc_excess > osc_tol) {
    r.verdict = Verdict::weak;
    r.reason = "variance oscillates across the finest levels";
  } else if (terminal < r.tol_nd || r.decay_slope >= opt.vanishing_slope) {
    if (pr.separated) {
      r.verdict = Verdict::delta_lsp;
      r.reason = "variance vanishes while the declared subsequences keep separated limits";
    } else {
      r.verdict = Verdict::dirac_selection;
      r.reason = "variance vanishes";
    }
    if (r.atoms.size() > 1) {
      // report the dominant atom only
      auto it = std::max_element(r.atoms.begin(), r.atoms.end(), [](auto& a, auto& b) { return a.weight < b.weight; });
      r.atoms = {*it};
    }
  } else if (r.last_step <= osc_tol) {
    r.verdict = Verdict::strong;
    r.reason = "variance sequence settles on a non-degenerate value";
  } else {
    r.verdict = Verdict::inconclusive;
    r.reason = "variance neither settles, vanishes, nor oscillates within tolerance";
  }
  return r;
}

inline nlohmann::json to_json(const SpStVerdict& v) {
  using nlohmann::json;
  json lv = json::array();
  for (auto& l : v.levels)
    lv.push_back({{"eps", l.eps}, {"mean", l.mean}, {"var", l.var}, {"var_se", l.var_se}, {"upper_mass", l.upper_mass}});
  json at = json::array();
  for (auto& a : v.atoms) at.push_back({{"location", a.location}, {"weight", a.weight}});
  json j{{"classification", to_string(v.verdict)},
         {"reason", v.reason},
         {"levels", lv},
         {"atoms", at},
         {"evidence",
          {{"range", v.range},
           {"tol_nd", v.tol_nd},
           {"tol_osc", v.tol_osc},
           {"noise", v.noise},
           {"osc_excess", v.osc_excess},
           {"last_step", v.last_step},
           {"decay_slope", v.decay_slope}}}};
  if (!v.probe.eps_a.empty())
    j["subsequences"] = {{"eps_a", v.probe.eps_a}, {"eps_b", v.probe.eps_b},     {"value_a", v.probe.value_a},
                         {"value_b", v.probe.value_b}, {"limit_a", v.probe.limit_a}, {"limit_b", v.probe.limit_b},
                         {"separated", v.probe.separated}};
  return j;
}

}  // namespace avlab::spst
