#pragma once

// A curve equal to gamma0 off a union of exponentially thin intervals
// accumulating at 0 and equal to gamma1 at their centers: the pushforward of
// Leb_eps goes to a Dirac mass while a subsequence keeps the other value.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "../cutoffs.hpp"
#include "../error.hpp"
#include "classify.hpp"
#include "measure.hpp"

namespace avlab::spst {

class DeltaLspCurve {
 public:
  // plateau: fraction of each interval on which the curve equals gamma1
  DeltaLspCurve(double gamma0, double gamma1, double a, double plateau = 0.9)
      : g0_(gamma0), g1_(gamma1), a_(a), plateau_(plateau) {
    if (gamma0 == gamma1) throw ConfigError("the two values must differ");
    if (!(a > 0)) throw ConfigError("a must be positive");
    if (!(plateau > 0 && plateau < 1)) throw ConfigError("plateau fraction must lie in (0, 1)");
    for (long n = 1; n <= kTable; ++n) {
      centers_[n] = std::pow(static_cast<double>(n), -1 / a);
      widths_[n] = std::exp(-static_cast<double>(n));
    }
  }

  // the n-th interval is centered at n^(-1/a), so [0, eps] holds those with n >= eps^-a
  double center(long n) const {
    return n <= kTable ? centers_[n] : std::pow(static_cast<double>(n), -1 / a_);
  }
  double half_width(long n) const { return n <= kTable ? widths_[n] : std::exp(-static_cast<double>(n)); }

  // first interval index at level eps
  long first_index(double eps) const { return std::max(1L, static_cast<long>(std::floor(std::pow(eps, -a_) * (1 + 1e-12)))); }

  // |K_eps| summed over n >= N(eps), closed form
  double k_measure(double eps) const {
    long N = first_index(eps);
    return 2 * std::exp(-static_cast<double>(N - 1)) / (std::exp(1.0) - 1);
  }

  double profile_at(double s, long n) const {
    double d = s - center(n), w = half_width(n);
    if (d == 0) return 1;
    return w > 0 ? profile(d / w) : 0.0;
  }

  double profile(double u) const {
    u = std::abs(u);
    if (u >= 1) return 0;
    if (u <= plateau_) return 1;
    return 1 - cutoffs::f_ramp((u - plateau_) / (1 - plateau_));
  }

  double bump_mass(double s) const {
    double m = 0;
    long nc = static_cast<long>(std::llround(std::pow(s, -a_)));
    for (long n = 1; n <= kTable; ++n) m = std::max(m, profile_at(s, n));
    for (long n = std::max(kTable + 1, nc - 3); n <= nc + 3; ++n) m = std::max(m, profile_at(s, n));
    return m;
  }

  double operator()(double s) const { return g0_ + (g1_ - g0_) * bump_mass(s); }

  Curve curve() const {
    DeltaLspCurve self = *this;
    return Curve{1, [self](double s) { return State{self(s)}; }, "delta-lsp"};
  }

  // W1(gamma_# Leb_eps, delta_gamma0) by quadrature, piece by piece between interval
  // edges; intervals narrower than 1e-18 eps are dropped.
  double w1_to_base(double eps) const {
    std::vector<long> active;
    std::vector<double> cuts{0.0, eps};
    for (long n = 1;; ++n) {
      double c = center(n), w = half_width(n);
      if (c + w < 0.0 || w < 1e-18 * eps) {
        if (c < eps) break;
        continue;
      }
      if (c - w > eps) continue;
      active.push_back(n);
      for (double z : {c - w, c - plateau_ * w, c + plateau_ * w, c + w})
        if (z > 0 && z < eps) cuts.push_back(z);
    }
    std::sort(cuts.begin(), cuts.end());
    double sum = 0;
    std::vector<long> here;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      double lo = cuts[i], hi = cuts[i + 1];
      if (!(hi > lo)) continue;
      here.clear();
      for (long n : active)
        if (center(n) - half_width(n) < hi && center(n) + half_width(n) > lo) here.push_back(n);
      if (here.empty()) continue;
      auto f = [&](double s) {
        double m = 0;
        for (long n : here) m = std::max(m, profile_at(s, n));
        return m;
      };
      sum += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 8, 1e-12);
    }
    return std::abs(g1_ - g0_) * sum / eps;
  }

  // eps at interval centers and halfway between consecutive centers
  std::vector<double> on_subsequence(long from, long count) const {
    std::vector<double> e;
    for (long n = from; n < from + count; ++n) e.push_back(center(n));
    return e;
  }
  std::vector<double> off_subsequence(long from, long count) const {
    std::vector<double> e;
    for (long n = from; n < from + count; ++n) e.push_back(0.5 * (center(n) + center(n + 1)));
    return e;
  }

  double gamma0() const { return g0_; }
  double gamma1() const { return g1_; }
  double a() const { return a_; }

 private:
  static constexpr long kTable = 60;
  double g0_, g1_, a_, plateau_;
  std::array<double, kTable + 1> centers_{}, widths_{};
};

struct DeltaLspDemo {
  std::vector<double> eps, w1, closed_form;  // closed form: |gamma1 - gamma0| |K_eps| / eps
  double rate_slope = 0;                     // d log w1 / d log closed_form
  SpStVerdict verdict;
};

inline DeltaLspDemo delta_lsp_demo(double gamma0, double gamma1, double a, const std::vector<long>& indices,
                                   ClassifyOptions opt = {}) {
  DeltaLspCurve c(gamma0, gamma1, a);
  DeltaLspDemo d;
  for (long n : indices) {
    double e = c.center(n);
    d.eps.push_back(e);
    d.w1.push_back(c.w1_to_base(e));
    d.closed_form.push_back(std::abs(gamma1 - gamma0) * c.k_measure(e) / e);
  }
  if (d.eps.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < d.eps.size(); ++i) {
      mx += std::log(d.closed_form[i]);
      my += std::log(d.w1[i]);
    }
    mx /= d.eps.size();
    my /= d.eps.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < d.eps.size(); ++i) {
      double dx = std::log(d.closed_form[i]) - mx;
      sxx += dx * dx;
      sxy += dx * (std::log(d.w1[i]) - my);
    }
    d.rate_slope = sxy / sxx;
  }
  if (opt.subseq_a.empty()) {
    long from = c.first_index(std::ldexp(opt.eps0, -(opt.levels - 1))) + 1;
    opt.subseq_a = c.on_subsequence(from, 8);
    opt.subseq_b = c.off_subsequence(from, 8);
  }
  d.verdict = classify_spst(c.curve(), opt);
  return d;
}

}  // namespace avlab::spst
