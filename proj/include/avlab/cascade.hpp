#pragma once

// Renormalized-diffusivity recursion kappa_{m-1} = kappa_m + c0 eps_m^(2 beta) / kappa_m in
// arbitrary precision. The homogenization kernel itself is not computable here, so every
// sequence uses this surrogate map.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/mpfr.hpp>
#include <json.hpp>

#include "error.hpp"
#include "scales.hpp"

namespace avlab::cascade {

using Real = boost::multiprecision::mpfr_float;
using json = nlohmann::json;

inline int digits_for_bits(int bits) { return static_cast<int>(std::ceil(bits * 0.30102999566398120)) + 1; }

// Sets the working precision for Reals created inside the scope. Not thread-safe: the
// backend keeps one process-wide default.
class Precision {
 public:
  explicit Precision(int bits) : saved_(Real::default_precision()) {
    if (bits < 64) throw ConfigError("precision must be at least 64 bits");
    static std::once_flag once;
    std::call_once(once, [] { mpfr_set_emax(mpfr_get_emax_max()); mpfr_set_emin(mpfr_get_emin_min()); });
    Real::default_precision(static_cast<unsigned>(digits_for_bits(bits)));
  }
  ~Precision() { Real::default_precision(saved_); }
  Precision(const Precision&) = delete;
  Precision& operator=(const Precision&) = delete;

  static long current_bits() {
    Real x = 1;
    return static_cast<long>(mpfr_get_prec(x.backend().data()));
  }

 private:
  unsigned saved_;
};

inline bool finite_positive(const Real& x) { return boost::multiprecision::isfinite(x) && x > 0; }

inline std::string to_decimal(const Real& x, int digits = 0) {
  std::ostringstream os;
  os << std::setprecision(digits > 0 ? digits : static_cast<int>(x.precision())) << std::scientific << x;
  return os.str();
}

inline double log10_of(const Real& x) { return static_cast<double>(boost::multiprecision::log10(x)); }

// Scales in arbitrary precision: eps[m]^-1 = ceil(Lambda^(q^m/(q-1))) or ceil(Lambda^m).
struct Levels {
  Real beta, Lambda, q, c0;
  int M = 0;
  scales::Mode mode = scales::Mode::hypergeometric;
  std::vector<Real> eps, eps_inv;
  // forcing c0 eps_m^(2 beta)
  std::vector<Real> forcing;
};

// Shortest round-trip decimal, so 1.2 enters as 1.2 and not as its binary neighbour.
inline Real from_double(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return Real(std::string(buf, r.ptr));
}

inline Levels make_levels(double beta, double Lambda, int M, scales::Mode mode, bool geometric_hyper_eps0 = false,
                          double c0_num = 9.0, double c0_den = 80.0) {
  if (!(Lambda > 1.0)) throw ConfigError("Lambda must exceed 1");
  if (M < 1) throw ConfigError("at least one level is required");
  if (!(c0_num >= 0.0 && c0_den > 0.0)) throw ConfigError("c0 must be nonnegative");
  Levels L;
  L.beta = from_double(beta);
  L.Lambda = from_double(Lambda);
  L.c0 = from_double(c0_num) / from_double(c0_den);
  L.M = M;
  L.mode = mode;
  bool hyper = mode == scales::Mode::hypergeometric || geometric_hyper_eps0;
  if (beta > 1.0 && beta < 4.0 / 3.0)
    L.q = L.beta / (4 * (L.beta - 1));
  else if (hyper)
    throw ConfigError("hypergeometric scales need beta strictly inside (1, 4/3)");
  else
    L.q = 0;
  for (int m = 0; m <= M; ++m) {
    Real inv;
    if (mode == scales::Mode::hypergeometric || (m == 0 && geometric_hyper_eps0))
      inv = boost::multiprecision::ceil(boost::multiprecision::pow(L.Lambda, boost::multiprecision::pow(L.q, m) / (L.q - 1)));
    else
      inv = boost::multiprecision::ceil(boost::multiprecision::pow(L.Lambda, m));
    if (!boost::multiprecision::isfinite(inv))
      throw NumericalError("scale overflow at level " + std::to_string(m) + " (beta=" + std::to_string(beta) +
                           ", Lambda=" + std::to_string(Lambda) + ")");
    L.eps_inv.push_back(inv);
    L.eps.push_back(1 / inv);
    Real f = L.c0 * boost::multiprecision::pow(L.eps.back(), 2 * L.beta);
    if (!boost::multiprecision::isfinite(f) || (L.c0 > 0 && !(f > 0))) throw NumericalError("forcing underflow at level " + std::to_string(m));
    L.forcing.push_back(f);
  }
  return L;
}

inline Levels make_levels(const scales::Schedule& s) {
  return make_levels(s.ex.beta, s.Lambda, s.M, s.mode, s.geometric_hyper_eps0);
}

// Centre of the admissible interval I_m, sqrt(c0) eps_m^(2 beta/(q+1)).
inline Real envelope(const Levels& L, int m) {
  return boost::multiprecision::sqrt(L.c0) * boost::multiprecision::pow(L.eps[m], 2 * L.beta / (L.q + 1));
}

// sqrt(c0) eps_m^(2 q beta/(q+1)), the scale kappa_m settles to from an admissible start.
inline Real settled_scale(const Levels& L, int m) {
  return boost::multiprecision::sqrt(L.c0) * boost::multiprecision::pow(L.eps[m], 2 * L.q * L.beta / (L.q + 1));
}

struct Interval {
  Real lo, hi;
  bool contains(const Real& x) const { return x >= lo && x <= hi; }
};

inline Interval admissible_interval(const Levels& L, int m) {
  Real e = envelope(L, m);
  return {e / 2, 2 * e};
}

struct Sequence {
  // kappa[m] for m = 0..M
  std::vector<Real> kappa;
  int M = 0;
  const Real& k0() const { return kappa[0]; }
};

inline Sequence iterate_backward(const Levels& L, const Real& kappa_M, int M = -1) {
  if (M < 0) M = L.M;
  if (M > L.M) throw ConfigError("start level beyond the schedule");
  if (!(kappa_M > 0)) throw ConfigError("starting diffusivity must be positive");
  Sequence s;
  s.M = M;
  s.kappa.assign(M + 1, Real(0));
  s.kappa[M] = kappa_M;
  for (int m = M; m >= 1; --m) {
    s.kappa[m - 1] = s.kappa[m] + L.forcing[m] / s.kappa[m];
    if (!finite_positive(s.kappa[m - 1])) throw NumericalError("diffusivity overflow at level " + std::to_string(m - 1));
  }
  return s;
}

// z_{m-1} = g_m (z_m + 1/z_m), g_m = (eps_m/eps_{m-1})^beta; kappa_m = sqrt(c0) eps_m^beta z_m.
inline std::vector<Real> rescaled_map(const Levels& L, const Real& z_M, int M = -1) {
  if (M < 0) M = L.M;
  if (!(z_M > 0)) throw ConfigError("z must be positive");
  std::vector<Real> z(M + 1, Real(0));
  z[M] = z_M;
  for (int m = M; m >= 1; --m) {
    Real g = boost::multiprecision::pow(L.eps[m] / L.eps[m - 1], L.beta);
    z[m - 1] = g * (z[m] + 1 / z[m]);
  }
  return z;
}

inline Real kappa_from_z(const Levels& L, int m, const Real& z) {
  return boost::multiprecision::sqrt(L.c0) * boost::multiprecision::pow(L.eps[m], L.beta) * z;
}

// Small-kappa limit for geometric scales: Lambda^(-beta m) sqrt(c0/(Lambda^beta - 1)).
inline Real geometric_fixed_point(const Real& Lambda, const Real& beta, int m, const Real& c0 = Real(9) / 80) {
  return boost::multiprecision::pow(Lambda, -beta * m) * boost::multiprecision::sqrt(c0 / (boost::multiprecision::pow(Lambda, beta) - 1));
}

// ---- kappa0 scans ----

struct ScanRow {
  Real kappa, kappa0;
  int M = 0;  // level whose admissible centre lies nearest to kappa (log scale)
};

struct ScanSummary {
  double limsup = 0, liminf = 0, median = 0;
  double std_log10 = 0;
  // number of interior local extrema of kappa0 along the grid
  int turns = 0;
  double lo_log10 = 0, hi_log10 = 0;  // window, log10 kappa
  std::size_t samples = 0;
  bool oscillating(double rel = 0.1) const { return (limsup - liminf) > rel * median && turns >= 2; }
};

inline int nearest_level(const Levels& L, const Real& kappa) {
  double lk = log10_of(kappa);
  int best = 0;
  double bd = 1e300;
  for (int m = 0; m <= L.M; ++m) {
    double d = std::abs(log10_of(envelope(L, m)) - lk);
    if (d < bd) bd = d, best = m;
  }
  return best;
}

// kappa0 over a log-uniform kappa grid in [10^lo, 10^hi]; every pass starts at level M.
inline std::vector<ScanRow> scan_window(const Levels& L, const Real& log10_lo, const Real& log10_hi, int samples) {
  if (samples < 3) throw ConfigError("a scan needs at least three samples");
  if (!(log10_hi > log10_lo)) throw ConfigError("empty scan window");
  // the grid spacing must stay resolvable against |log kappa| at working precision
  Real step = (log10_hi - log10_lo) / (samples - 1);
  Real scale = boost::multiprecision::max(boost::multiprecision::abs(log10_lo), boost::multiprecision::abs(log10_hi));
  long bits = Precision::current_bits();
  double need = std::log2(static_cast<double>(scale / step)) + 32;
  if (need > bits)
    throw ConfigError("precision insufficient for this zoom depth: need about " + std::to_string(static_cast<long>(std::ceil(need))) +
                      " bits, have " + std::to_string(bits));
  std::vector<ScanRow> rows;
  rows.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    Real lk = log10_lo + step * i;
    Real kappa = boost::multiprecision::pow(Real(10), lk);
    auto seq = iterate_backward(L, kappa);
    rows.push_back({kappa, seq.k0(), nearest_level(L, kappa)});
  }
  return rows;
}

inline ScanSummary summarize(const std::vector<ScanRow>& rows) {
  ScanSummary s;
  s.samples = rows.size();
  std::vector<double> v, lg;
  for (auto& r : rows) {
    v.push_back(static_cast<double>(r.kappa0));
    lg.push_back(log10_of(r.kappa0));
  }
  s.limsup = *std::max_element(v.begin(), v.end());
  s.liminf = *std::min_element(v.begin(), v.end());
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  std::size_t n = sorted.size();
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double mean = 0;
  for (double x : lg) mean += x;
  mean /= n;
  double ss = 0;
  for (double x : lg) ss += (x - mean) * (x - mean);
  s.std_log10 = std::sqrt(ss / std::max<std::size_t>(1, n - 1));
  // extrema of the sampled function; flat stretches below 1e-12 relative are ignored
  int prev = 0;
  for (std::size_t i = 1; i < n; ++i) {
    double d = lg[i] - lg[i - 1];
    int sg = std::abs(d) < 1e-12 * std::max(1.0, std::abs(lg[i])) ? 0 : (d > 0 ? 1 : -1);
    if (sg != 0) {
      if (prev != 0 && sg != prev) ++s.turns;
      prev = sg;
    }
  }
  s.lo_log10 = log10_of(rows.front().kappa);
  s.hi_log10 = log10_of(rows.back().kappa);
  return s;
}

struct ScanOptions {
  int samples = 400;
  int zooms = 3;
  // each zoom keeps 1/zoom_factor of the previous window (in log kappa), centred
  double zoom_factor = 8.0;
  // window: between the admissible centres of levels first_level and last_level
  int first_level = -1;
  int last_level = -1;
};

struct Scan {
  std::vector<std::vector<ScanRow>> windows;  // [0] is the base window
  std::vector<ScanSummary> summaries;
};

inline Scan scan_kappa0(const Levels& L, ScanOptions opt = {}) {
  if (L.mode != scales::Mode::hypergeometric) throw ConfigError("kappa0 scans need hypergeometric scales");
  if (opt.zooms < 0) throw ConfigError("zoom count must be nonnegative");
  if (!(opt.zoom_factor > 1.0)) throw ConfigError("zoom factor must exceed 1");
  int last = opt.last_level < 0 ? L.M - 1 : opt.last_level;
  int first = opt.first_level < 0 ? std::max(0, last - 3) : opt.first_level;
  if (!(0 <= first && first < last && last <= L.M)) throw ConfigError("scan levels out of range");
  Real lo = boost::multiprecision::log10(envelope(L, last)), hi = boost::multiprecision::log10(envelope(L, first));
  Scan out;
  for (int z = 0; z <= opt.zooms; ++z) {
    out.windows.push_back(scan_window(L, lo, hi, opt.samples));
    out.summaries.push_back(summarize(out.windows.back()));
    Real mid = (lo + hi) / 2, half = (hi - lo) / (2 * opt.zoom_factor);
    lo = mid - half;
    hi = mid + half;
  }
  return out;
}

inline std::string scan_csv(const Scan& s) {
  std::ostringstream os;
  os << "zoom,kappa,M,kappa0,log10_kappa0\n";
  for (std::size_t z = 0; z < s.windows.size(); ++z)
    for (auto& r : s.windows[z]) {
      os << z << ',' << to_decimal(r.kappa) << ',' << r.M << ',' << to_decimal(r.kappa0) << ',';
      os << std::setprecision(17) << log10_of(r.kappa0) << '\n';
    }
  return os.str();
}

inline json to_json(const ScanSummary& s) {
  return json{{"limsup", s.limsup}, {"liminf", s.liminf}, {"median", s.median}, {"std_log10", s.std_log10},
              {"turns", s.turns}, {"log10_lo", s.lo_log10}, {"log10_hi", s.hi_log10}, {"samples", s.samples},
              {"oscillating", s.oscillating()}};
}

// ---- critical beta ----

struct BetaProbe {
  double beta = 0;
  double q = 0;
  // largest |log10(kappa0 / sqrt(c0) eps_0^beta)| over unconstrained starts, at two depths
  double excursion_shallow = 0, excursion_deep = 0;
  bool unbounded = false;
};

struct ProbeOptions {
  int shallow = 10, deep = 18;
  int samples = 200;
  int bits = 256;
};

// Starts kappa_M = sqrt(c0) eps_M^beta z_M with log z_M uniform over [log g_M, -log g_M], the
// whole band between neighbouring levels. Unbounded if the excursion keeps growing with depth.
inline BetaProbe probe_beta(double Lambda, double beta, const ProbeOptions& opt = {}) {
  Precision p(opt.bits);
  BetaProbe r;
  r.beta = beta;
  r.q = beta / (4 * (beta - 1));
  auto excursion = [&](int M) {
    auto L = make_levels(beta, Lambda, M, scales::Mode::hypergeometric);
    Real ref = boost::multiprecision::sqrt(L.c0) * boost::multiprecision::pow(L.eps[0], L.beta);
    Real lg = L.beta * boost::multiprecision::log(L.eps[M] / L.eps[M - 1]);  // log g_M < 0
    double worst = 0;
    for (int i = 0; i < opt.samples; ++i) {
      Real u = Real(2 * i + 1) / (2 * opt.samples);  // (0, 1)
      Real z = boost::multiprecision::exp(lg * (1 - 2 * u));
      Real k0;
      try {
        k0 = iterate_backward(L, kappa_from_z(L, M, z)).k0();
      } catch (const NumericalError&) {
        return std::numeric_limits<double>::infinity();
      }
      worst = std::max(worst, std::abs(log10_of(k0 / ref)));
    }
    return worst;
  };
  r.excursion_shallow = excursion(opt.shallow);
  r.excursion_deep = excursion(opt.deep);
  r.unbounded = !(r.excursion_deep < 2.0 * r.excursion_shallow + 1.0);
  return r;
}

struct BetaBracket {
  double lo = 0, hi = 0;  // lo unbounded, hi bounded
  std::vector<BetaProbe> probes;
  double estimate() const { return 0.5 * (lo + hi); }
};

inline BetaBracket critical_beta(double Lambda, double lo = 1.10, double hi = 1.20, double width = 0.004,
                                 const ProbeOptions& opt = {}) {
  BetaBracket b;
  auto plo = probe_beta(Lambda, lo, opt), phi = probe_beta(Lambda, hi, opt);
  b.probes = {plo, phi};
  if (!plo.unbounded || phi.unbounded)
    throw NumericalError("critical beta is not bracketed by [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  while (hi - lo > width) {
    double mid = 0.5 * (lo + hi);
    auto pm = probe_beta(Lambda, mid, opt);
    b.probes.push_back(pm);
    (pm.unbounded ? lo : hi) = mid;
  }
  b.lo = lo;
  b.hi = hi;
  return b;
}

// ---- alternating start ----

struct AlternationReport {
  Sequence seq;
  // |kappa_{m-1} / centre_m - tau^((-1)^m)| for m = 1..M (index m)
  std::vector<double> deviation;
};

inline AlternationReport alternating_sequence(const Levels& L, const Real& tau, int M = -1) {
  if (M < 0) M = L.M;
  if (tau < Real(0.5) || tau > Real(2)) throw ConfigError("tau must lie in [1/2, 2]");
  auto power = [&](int m) { return m % 2 ? Real(1 / tau) : tau; };
  AlternationReport r;
  r.seq = iterate_backward(L, envelope(L, M) * power(M), M);
  r.deviation.assign(M + 1, 0.0);
  for (int m = 1; m <= M; ++m)
    r.deviation[m] = static_cast<double>(boost::multiprecision::abs(r.seq.kappa[m - 1] / envelope(L, m) - power(m)));
  return r;
}

// max(kappa_m(tau)/kappa_m(tau'), inverse) per level.
inline std::vector<double> alternation_ratio(const Levels& L, const Real& tau, const Real& tau2, int M = -1) {
  auto a = alternating_sequence(L, tau, M), b = alternating_sequence(L, tau2, M);
  std::vector<double> r;
  for (std::size_t m = 0; m < a.seq.kappa.size(); ++m) {
    Real x = a.seq.kappa[m] / b.seq.kappa[m];
    r.push_back(static_cast<double>(boost::multiprecision::max(x, 1 / x)));
  }
  return r;
}

// ---- generalised admissible sets ----

struct GeneralizedAdmissible {
  int k = 0;
  // roots of F_{M-k+1} o ... o F_M (b) = 1, F_m(s) = sigma_m s + 1/s
  Real b_large, b_small;
  // starting diffusivities gamma_M b for the two roots
  Real a_large, a_small;
  Interval interval;
};

inline Real sigma_of(const Levels& L, int m) {
  return boost::multiprecision::pow(L.eps[m], 2 * L.beta * (L.q - 1) / (L.q + 1));
}

inline GeneralizedAdmissible generalized_admissible(const Levels& L, int k, double A) {
  const int M = L.M;
  if (k < 1 || k > M - 1) throw ConfigError("level count k must lie in [1, M-1]");
  if (!(A > 1.0)) throw ConfigError("slack A must exceed 1");
  // invert one map at a time: sigma s^2 - target s + 1 = 0
  auto roots = [&](int m, const Real& target, bool large) {
    Real sg = sigma_of(L, m);
    Real disc = target * target - 4 * sg;
    if (disc < 0)
      throw NumericalError("no root bracket at level " + std::to_string(m) + " (degenerate sigma)");
    Real sq = boost::multiprecision::sqrt(disc);
    // the small root in the cancellation-free form
    return large ? Real((target + sq) / (2 * sg)) : Real(2 / (target + sq));
  };
  GeneralizedAdmissible g;
  g.k = k;
  Real tl = 1, ts = 1;
  for (int m = M - k + 1; m <= M; ++m) {
    tl = roots(m, tl, true);
    ts = roots(m, ts, m != M);
  }
  g.b_large = tl;
  g.b_small = ts;
  g.a_large = settled_scale(L, M) * tl;
  g.a_small = settled_scale(L, M) * ts;
  Real qk = boost::multiprecision::pow(L.q, k - 1);
  Real c = boost::multiprecision::sqrt(L.c0) * boost::multiprecision::pow(L.eps[M], 2 * L.beta / (qk * (L.q + 1)));
  g.interval = {c / A, c * A};
  return g;
}

// Composite F_{M-k+1} o ... o F_M, for checking roots.
inline Real composite_map(const Levels& L, int k, const Real& b) {
  Real s = b;
  for (int m = L.M; m >= L.M - k + 1; --m) s = sigma_of(L, m) * s + 1 / s;
  return s;
}

}  // namespace avlab::cascade
