#pragma once

// Littlewood-Paley block amplitudes sup_x |Delta_j u| and the Besov-type norm
// sup_j 2^(j sigma) sup_x |Delta_j u| on the periodic collocation grid.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cutoffs.hpp"
#include "error.hpp"
#include "spectral.hpp"

namespace avlab::besov {

using json = nlohmann::json;
using spectral::cplx;
using spectral::Grid;

constexpr double kInner = 0.75, kOuter = 4.0 / 3.0;

// Smooth radial cutoff: 1 for s <= 3/4, 0 for s >= 4/3.
inline double low_pass(double s) { return 1.0 - cutoffs::f_ramp((s - kInner) / (kOuter - kInner)); }

// Block j >= 0 lives on 2^j [3/4, 8/3] (integer wavenumber units) and equals 1 on 2^j [4/3, 3/2].
inline double block_weight(int j, double k) {
  if (j < 0) return low_pass(k);
  double s = std::ldexp(k, -j);
  return low_pass(s / 2) - low_pass(s);
}

inline bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

struct Amplitudes {
  double low = 0.0;
  std::vector<double> block;  // j = 0..top
  // whatever lies beyond the top block's inner cutoff
  double remainder = 0.0;
};

class Analyzer {
 public:
  explicit Analyzer(int n) : g_(n) {
    if (!power_of_two(n) || n < 8) throw ConfigError("Besov analysis needs a power-of-two grid of at least 8");
    top_ = static_cast<int>(std::floor(std::log2(n / 3.0)));
    const std::size_t ns = g_.spec_size();
    radius_.resize(ns);
    for (int j2 = 0; j2 < n; ++j2)
      for (int j1 = 0; j1 < g_.nh(); ++j1) radius_[static_cast<std::size_t>(j2) * g_.nh() + j1] = std::sqrt(g_.k_sq(j1, j2));
    buf_ = g_.spec_buffer();
    phys_ = g_.real_buffer();
  }

  int top() const { return top_; }
  const Grid& grid() const { return g_; }

  // weight of band b: -1 low, 0..top blocks, top+1 remainder
  double weight(int b, double k) const {
    if (b <= top_) return block_weight(b, k);
    return 1.0 - low_pass(std::ldexp(k, -(top_ + 1)));
  }

  // Band b of a spectrum, back in physical space.
  std::vector<double> band(const std::vector<cplx>& hat, int b) const {
    for (std::size_t i = 0; i < hat.size(); ++i) buf_[i] = hat[i] * weight(b, radius_[i]);
    g_.inverse(buf_.data(), phys_.data());
    return phys_;
  }

  Amplitudes amplitudes(const std::vector<cplx>& hat) const {
    if (hat.size() != g_.spec_size()) throw ConfigError("spectrum does not match the analyzer grid");
    for (auto& c : hat)
      if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) throw NumericalError("non-finite input to Besov analysis");
    Amplitudes a;
    a.low = spectral::max_abs(band(hat, -1));
    for (int j = 0; j <= top_; ++j) a.block.push_back(spectral::max_abs(band(hat, j)));
    a.remainder = spectral::max_abs(band(hat, top_ + 1));
    return a;
  }

  Amplitudes amplitudes_physical(const std::vector<double>& u) const {
    if (u.size() != g_.real_size()) throw ConfigError("sample does not match the analyzer grid");
    for (double v : u)
      if (!std::isfinite(v)) throw NumericalError("non-finite input to Besov analysis");
    std::vector<cplx> hat;
    g_.forward(u, hat);
    return amplitudes(hat);
  }

 private:
  Grid g_;
  int top_ = 0;
  std::vector<double> radius_;
  mutable std::vector<cplx> buf_;
  mutable std::vector<double> phys_;
};

inline double norm(const Amplitudes& a, double sigma) {
  double r = 0.0;
  for (std::size_t j = 0; j < a.block.size(); ++j) r = std::max(r, std::exp2(j * sigma) * a.block[j]);
  return r;
}

inline double besov_norm(const std::vector<double>& u, int n, double sigma) {
  return norm(Analyzer(n).amplitudes_physical(u), sigma);
}

// ---- scans over diffusivity ----

struct Snapshot {
  double t = 0.0;
  Amplitudes amp;
};

struct Series {
  double kappa = 0.0;
  std::vector<Snapshot> snaps;  // increasing t
};

struct BesovScan {
  std::vector<double> sigma, kappa, times;
  double t_s = 0.0;
  // norm[k][i][s]: kappa k, snapshot i, sigma s
  std::vector<std::vector<std::vector<double>>> value;
  // running sup over t <= t_s: sup_norm[k][s]
  std::vector<std::vector<double>> sup_norm;
  // d log sup_norm / d log(1/kappa) per sigma; empty for fewer than three kappas
  std::vector<double> kappa_slope;
  // first time the norm exceeds (1 + onset_tol) times its initial value, per kappa and sigma; +inf if never
  std::vector<std::vector<double>> onset;
  double sigma_c = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<double> sigma_grid(const std::string& spec) {
  double a, b, c;
  char s1, s2;
  std::istringstream is(spec);
  if (!(is >> a >> s1 >> b >> s2 >> c) || s1 != ':' || s2 != ':' || !(b > 0) || c < a)
    throw ConfigError("sigma grid must read start:step:stop, got '" + spec + "'");
  std::vector<double> v;
  for (int i = 0; a + i * b <= c + 1e-9 * b; ++i) v.push_back(a + i * b);
  return v;
}

struct ScanOptions {
  double t_s = std::numeric_limits<double>::infinity();
  double onset_tol = 0.1;
  // slope marking growth with decreasing kappa
  double slope_threshold = 0.05;
};

inline BesovScan regularity_scan(const std::vector<Series>& runs, const std::vector<double>& sigma, ScanOptions opt = {}) {
  if (runs.empty()) throw ConfigError("no runs to scan");
  BesovScan s;
  s.sigma = sigma;
  s.t_s = opt.t_s;
  for (auto& r : runs) {
    if (r.snaps.empty()) throw ConfigError("run without snapshots");
    if (r.snaps.size() != runs[0].snaps.size()) throw ConfigError("runs must share snapshot times");
    s.kappa.push_back(r.kappa);
  }
  for (auto& sn : runs[0].snaps) s.times.push_back(sn.t);
  for (auto& r : runs) {
    std::vector<std::vector<double>> per;
    std::vector<double> sup(sigma.size(), 0.0), on(sigma.size(), std::numeric_limits<double>::infinity());
    for (auto& sn : r.snaps) {
      std::vector<double> row;
      for (std::size_t k = 0; k < sigma.size(); ++k) {
        double v = norm(sn.amp, sigma[k]);
        row.push_back(v);
        if (sn.t <= opt.t_s) sup[k] = std::max(sup[k], v);
      }
      per.push_back(row);
    }
    for (std::size_t k = 0; k < sigma.size(); ++k)
      for (std::size_t i = 0; i < per.size(); ++i)
        if (per[i][k] > (1 + opt.onset_tol) * per[0][k]) {
          on[k] = r.snaps[i].t;
          break;
        }
    s.value.push_back(per);
    s.sup_norm.push_back(sup);
    s.onset.push_back(on);
  }
  if (runs.size() >= 3) {
    for (std::size_t k = 0; k < sigma.size(); ++k) {
      double mx = 0, my = 0;
      const std::size_t n = runs.size();
      for (std::size_t r = 0; r < n; ++r) {
        mx += -std::log(s.kappa[r]);
        my += std::log(s.sup_norm[r][k]);
      }
      mx /= n;
      my /= n;
      double sxx = 0, sxy = 0;
      for (std::size_t r = 0; r < n; ++r) {
        double dx = -std::log(s.kappa[r]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(s.sup_norm[r][k]) - my);
      }
      s.kappa_slope.push_back(sxx > 0 ? sxy / sxx : 0.0);
    }
    for (std::size_t k = 0; k < sigma.size(); ++k)
      if (s.kappa_slope[k] > opt.slope_threshold) {
        if (k == 0) {
          s.sigma_c = sigma[0];
        } else {
          double a = s.kappa_slope[k - 1], b = s.kappa_slope[k];
          s.sigma_c = sigma[k - 1] + (opt.slope_threshold - a) / (b - a) * (sigma[k] - sigma[k - 1]);
        }
        break;
      }
  }
  return s;
}

inline std::string to_csv(const BesovScan& s) {
  std::ostringstream os;
  os.precision(12);
  os << "kappa,t,sigma,norm,sup_norm\n";
  for (std::size_t r = 0; r < s.kappa.size(); ++r)
    for (std::size_t i = 0; i < s.value[r].size(); ++i)
      for (std::size_t k = 0; k < s.sigma.size(); ++k)
        os << s.kappa[r] << ',' << s.times[i] << ',' << s.sigma[k] << ',' << s.value[r][i][k]
           << ',' << s.sup_norm[r][k] << '\n';
  return os.str();
}

inline json to_json(const BesovScan& s) {
  json j{{"sigma", s.sigma}, {"kappa", s.kappa}, {"kappa_slope", s.kappa_slope}};
  j["sigma_c"] = std::isfinite(s.sigma_c) ? json(s.sigma_c) : json(nullptr);
  json on = json::array();
  for (auto& row : s.onset) {
    json r = json::array();
    for (double v : row) r.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    on.push_back(r);
  }
  j["onset"] = on;
  return j;
}

}  // namespace avlab::besov
