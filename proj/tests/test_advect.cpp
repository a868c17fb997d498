#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "avlab/advect.hpp"

using namespace avlab;
using namespace avlab::advect;

namespace {

constexpr double kPi = std::numbers::pi;

scales::Schedule table_schedule(int M) {
  return scales::build_schedule(scales::derive_exponents_beta(1.2), 2.5, M, scales::Mode::hypergeometric);
}

// Uniform translation b = (c(t), 0) with c = u0 cos(2 pi t).
struct Translation {
  const Grid& g;
  double u0 = 0.6;
  void operator()(double t, Velocity& v) const {
    v.b1.assign(g.real_size(), u0 * std::cos(2 * kPi * t));
    v.b2.assign(g.real_size(), 0.0);
  }
  double displacement(double t) const { return u0 * std::sin(2 * kPi * t) / (2 * kPi); }
};

double translation_error(int nsteps) {
  const int n = 16;
  const double kappa = 2e-3, T = 0.5;
  Grid g(n);
  Translation tr{g};
  std::vector<ScalarState> st{init_scalar("random:5,3", n)};
  st[0].kappa = kappa;
  auto h0 = st[0].hat;
  run_scalar(g, tr, st, T / nsteps, nsteps);
  double err = 0.0, norm = 0.0;
  const double C = tr.displacement(T);
  for (int j2 = 0; j2 < n; ++j2)
    for (int j1 = 0; j1 < g.nh(); ++j1) {
      std::size_t i = j2 * g.nh() + j1;
      double k2 = g.k2_of(j2);
      cplx exact = h0[i] * std::exp(cplx(-4 * kPi * kPi * kappa * (j1 * j1 + k2 * k2) * T, -2 * kPi * j1 * C));
      err += std::norm(st[0].hat[i] - exact);
      norm += std::norm(exact);
    }
  return std::sqrt(err / norm);
}

}  // namespace

TEST(Phi, SeriesAndDirectAgree) {
  auto f0 = phi_functions(0.0);
  EXPECT_DOUBLE_EQ(f0.p1, 1.0);
  EXPECT_DOUBLE_EQ(f0.p2, 0.5);
  EXPECT_DOUBLE_EQ(f0.p3, 1.0 / 6.0);
  auto a = phi_functions(-0.4999999), b = phi_functions(-0.5000001);
  EXPECT_NEAR(a.p1, b.p1, 1e-7);
  EXPECT_NEAR(a.p2, b.p2, 1e-7);
  EXPECT_NEAR(a.p3, b.p3, 1e-7);
  auto c = phi_functions(-3.0);
  EXPECT_NEAR(c.p1, (std::exp(-3.0) - 1) / -3.0, 1e-15);
  EXPECT_NEAR(c.p3, (std::exp(-3.0) - 1 + 3 - 4.5) / -27.0, 1e-15);
}

TEST(Init, DefaultDatumHasFourModes) {
  auto s = init_scalar("cos1sin2", 32);
  Grid g(32);
  int count = 0;
  for (int j2 = 0; j2 < 32; ++j2)
    for (int j1 = 0; j1 < g.nh(); ++j1)
      if (std::abs(s.hat[j2 * g.nh() + j1]) > 1e-14) count += (j1 == 0 || j1 == 16) ? 1 : 2;
  EXPECT_EQ(count, 4);
  EXPECT_NEAR(g.l2_sq(s.hat.data()), 0.25, 1e-15);
}

TEST(Init, ConstantZeroedAndRandomReproducible) {
  auto c = init_scalar("const:2.5", 16);
  EXPECT_NEAR(c.removed_mean, 2.5, 1e-14);
  for (auto v : c.hat) EXPECT_LT(std::abs(v), 1e-14);
  auto r1 = init_scalar("random:4,11", 16), r2 = init_scalar("random:4,11", 16), r3 = init_scalar("random:4,12", 16);
  EXPECT_EQ(r1.hat, r2.hat);
  EXPECT_NE(r1.hat, r3.hat);
  EXPECT_THROW(init_scalar("bogus", 16), ConfigError);
  EXPECT_THROW(init_scalar("random:9,1", 16), ConfigError);
}

TEST(Heat, PerModeExactDecay) {
  const int n = 32;
  Grid g(n);
  auto zero = [&](double, Velocity& v) {
    v.b1.assign(g.real_size(), 0.0);
    v.b2.assign(g.real_size(), 0.0);
  };
  for (bool shortcut : {true, false}) {
    std::vector<ScalarState> st{init_scalar("random:10,5", n)};
    st[0].kappa = 3e-3;
    auto h0 = st[0].hat;
    const double h = 1.0 / 500, T = 0.4;
    run_scalar(g, zero, st, h, 200, shortcut);
    double worst = 0.0;
    for (int j2 = 0; j2 < n; ++j2)
      for (int j1 = 0; j1 < g.nh(); ++j1) {
        std::size_t i = j2 * g.nh() + j1;
        cplx exact = h0[i] * std::exp(-4 * kPi * kPi * 3e-3 * g.k_sq(j1, j2) * T);
        worst = std::max(worst, std::abs(st[0].hat[i] - exact));
      }
    EXPECT_LT(worst, 1e-12);
  }
}

TEST(Heat, RateLinearInKappa) {
  const int n = 16;
  Grid g(n);
  auto zero = [&](double, Velocity&) {};
  std::vector<ScalarState> st;
  for (double k : {1e-4, 1e-5}) {
    st.push_back(init_scalar("mode:1,0", n));
    st.back().kappa = k;
  }
  auto d = run_scalar(g, zero, st, 0.01, 50, true);
  for (auto& run : d) {
    for (std::size_t i = 0; i < run.t.size(); ++i) {
      double lam = 4 * kPi * kPi * run.kappa;
      double exact = 2 * run.kappa * 4 * kPi * kPi * 0.5 * std::exp(-2 * lam * run.t[i]);
      EXPECT_NEAR(run.rate[i], exact, 1e-12 * exact);
    }
  }
  auto rep = dissipation_report(d, 0.2);
  ASSERT_TRUE(rep.rate_ratio);
  EXPECT_NEAR(*rep.rate_ratio, 0.1, 1e-3);
  EXPECT_FALSE(*rep.anomalous);
}

TEST(Solver, ThirdOrderOnManufacturedSolution) {
  double e1 = translation_error(40), e2 = translation_error(80), e3 = translation_error(160);
  double s1 = std::log2(e1 / e2), s2 = std::log2(e2 / e3);
  EXPECT_GE(s1, 2.7) << e1 << " " << e2;
  EXPECT_GE(s2, 2.7) << e2 << " " << e3;
}

TEST(Solver, RejectsNegativeKappa) {
  Grid g(8);
  EXPECT_THROW(EtdSolver(g, -1.0, 0.1), ConfigError);
}

TEST(Report, SingleKappaAndResampling) {
  Diagnostics a, b;
  a.kappa = 1e-3;
  b.kappa = 1e-4;
  for (int i = 0; i <= 10; ++i) {
    a.t.push_back(0.1 * i);
    a.l2_sq.push_back(1.0);
    a.rate.push_back(2.0);
    a.cum_diss.push_back(0.2 * i);
  }
  std::vector<Diagnostics> one{a};
  auto r1 = dissipation_report(one, 0.5);
  EXPECT_FALSE(r1.rate_ratio);
  EXPECT_FALSE(r1.anomalous);
  for (int i = 0; i <= 20; ++i) {
    b.t.push_back(0.05 * i);
    b.l2_sq.push_back(1.0);
    b.rate.push_back(1.5);
    b.cum_diss.push_back(0.075 * i);
  }
  std::vector<Diagnostics> two{a, b};
  auto r2 = dissipation_report(two, 0.5);
  EXPECT_TRUE(r2.resampled);
  EXPECT_EQ(two[1].t.size(), 11u);
  EXPECT_NEAR(*r2.rate_ratio, 0.75, 1e-14);
  EXPECT_TRUE(*r2.anomalous);
  auto csv = to_csv(two);
  EXPECT_EQ(csv.substr(0, 27), "t,kappa,l2_sq,rate,cum_diss");
}

TEST(Quadrature, CumulativeIntegralFourthOrder) {
  auto err = [](int n) {
    std::vector<double> y(n + 1);
    double h = 1.0 / n;
    for (int i = 0; i <= n; ++i) y[i] = std::exp(std::sin(3.0 * i * h));
    auto c = cumulative_integral(y, h);
    // reference by fine composite Simpson
    int m = 20000;
    double s = 0.0, hh = 1.0 / m;
    for (int i = 0; i <= m; ++i) s += std::exp(std::sin(3.0 * i * hh)) * (i == 0 || i == m ? 1 : (i % 2 ? 4 : 2));
    return std::abs(c.back() - s * hh / 3);
  };
  EXPECT_GT(std::log2(err(40) / err(80)), 3.7);
}

namespace {

// Independent reference: RK4 in time, separable naive DFT in space, closed-form level-one velocity.
class NaiveSpectral {
 public:
  explicit NaiveSpectral(int n) : n_(n), tw_(n) {
    for (int k = 0; k < n; ++k) tw_[k] = std::polar(1.0, -2 * kPi * k / n);
  }
  int wave(int j) const { return j <= n_ / 2 ? j : j - n_; }
  bool band(int j1, int j2) const { return std::abs(wave(j1)) <= n_ / 3 && std::abs(wave(j2)) <= n_ / 3; }

  // full complex spectrum, index j2*n + j1, normalized forward
  std::vector<cplx> forward(const std::vector<cplx>& u) const { return transform(u, false); }
  std::vector<cplx> inverse(const std::vector<cplx>& u) const { return transform(u, true); }

 private:
  std::vector<cplx> transform(const std::vector<cplx>& u, bool inv) const {
    std::vector<cplx> tmp(u.size()), out(u.size());
    for (int r = 0; r < n_; ++r)
      for (int k = 0; k < n_; ++k) {
        cplx s{};
        for (int j = 0; j < n_; ++j) {
          cplx w = tw_[(k * j) % n_];
          s += u[r * n_ + j] * (inv ? std::conj(w) : w);
        }
        tmp[r * n_ + k] = s;
      }
    for (int c = 0; c < n_; ++c)
      for (int k = 0; k < n_; ++k) {
        cplx s{};
        for (int j = 0; j < n_; ++j) {
          cplx w = tw_[(k * j) % n_];
          s += tmp[j * n_ + c] * (inv ? std::conj(w) : w);
        }
        out[k * n_ + c] = inv ? s : s / double(n_ * n_);
      }
    return out;
  }
  int n_;
  std::vector<cplx> tw_;
};

}  // namespace

TEST(Oracle, MatchesNaiveRk4OnFirstLevelField) {
  const int n = 64;
  const double kappa = 1e-3, T = 0.02;
  auto s = table_schedule(1);
  auto gs = fieldgen::default_grid(s, T, n, s.tau[1] / 256.0);
  auto field = fieldgen::build_field(s, gs).field;
  std::vector<ScalarState> st{init_scalar("cos1sin2", n)};
  st[0].kappa = kappa;
  RunOptions opt;
  opt.t_end = T;
  run_scalar(field, st, opt);
  Grid g(n);
  auto fast = to_physical(g, st[0]);

  const auto& fam = cutoffs::default_family();
  NaiveSpectral ns(n);
  const double amp = s.a[1] * s.eps[1] * s.eps[1], w = 2 * kPi / s.eps[1];
  auto rhs = [&](const std::vector<cplx>& uh, double t) {
    auto act = fieldgen::active_shear(fam, s, 1, t);
    long l = fieldgen::slab_of(t, s.tau_pp[1]);
    double hat = fam.zetahat_ml(s.tau_p[1], s.tau_pp[1], l, t);
    std::vector<cplx> d1(uh.size()), d2(uh.size());
    for (int j2 = 0; j2 < n; ++j2)
      for (int j1 = 0; j1 < n; ++j1) {
        std::size_t i = j2 * n + j1;
        bool nyq = j1 == n / 2 || j2 == n / 2;
        d1[i] = nyq ? 0.0 : uh[i] * cplx(0, 2 * kPi * ns.wave(j1));
        d2[i] = nyq ? 0.0 : uh[i] * cplx(0, 2 * kPi * ns.wave(j2));
      }
    auto p1 = ns.inverse(d1), p2 = ns.inverse(d2);
    std::vector<cplx> prod(uh.size());
    for (int i2 = 0; i2 < n; ++i2)
      for (int i1 = 0; i1 < n; ++i1) {
        double x1 = i1 / double(n), x2 = i2 / double(n);
        double b1 = -hat * act.w2 * amp * w * std::cos(w * x2);
        double b2 = hat * act.w1 * amp * w * std::cos(w * x1);
        std::size_t i = i2 * n + i1;
        prod[i] = -(b1 * p1[i].real() + b2 * p2[i].real());
      }
    auto ph = ns.forward(prod);
    for (int j2 = 0; j2 < n; ++j2)
      for (int j1 = 0; j1 < n; ++j1) {
        std::size_t i = j2 * n + j1;
        double k2 = double(ns.wave(j1)) * ns.wave(j1) + double(ns.wave(j2)) * ns.wave(j2);
        ph[i] = ns.band(j1, j2) ? ph[i] - 4 * kPi * kPi * kappa * k2 * uh[i] : 0.0;
      }
    ph[0] = 0.0;
    return ph;
  };
  std::vector<cplx> u(n * n);
  for (int i2 = 0; i2 < n; ++i2)
    for (int i1 = 0; i1 < n; ++i1) u[i2 * n + i1] = std::cos(2 * kPi * i1 / n) * std::sin(2 * kPi * i2 / n);
  auto uh = ns.forward(u);
  const int steps = static_cast<int>(std::lround(T / (4 * gs.dt)));
  const double h = T / steps;
  auto axpy = [](const std::vector<cplx>& a, const std::vector<cplx>& b, double c) {
    std::vector<cplx> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + c * b[i];
    return r;
  };
  for (int k = 0; k < steps; ++k) {
    double t = k * h;
    auto k1 = rhs(uh, t);
    auto k2 = rhs(axpy(uh, k1, h / 2), t + h / 2);
    auto k3 = rhs(axpy(uh, k2, h / 2), t + h / 2);
    auto k4 = rhs(axpy(uh, k3, h), t + h);
    for (std::size_t i = 0; i < uh.size(); ++i) uh[i] += h / 6 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  auto slow = ns.inverse(uh);
  double err = 0.0, norm = 0.0;
  for (std::size_t i = 0; i < fast.size(); ++i) {
    err += std::pow(fast[i] - slow[i].real(), 2);
    norm += std::pow(slow[i].real(), 2);
  }
  EXPECT_LT(std::sqrt(err / norm), 1e-6);
}

TEST(FieldRun, EnergyEqualityMeanAndMonotoneDecay) {
  // the cutoffs switch within a few recipe steps, so the time step is refined well below tau/8
  const int n = 64;
  const double T = 0.1;
  auto s = table_schedule(1);
  auto gs = fieldgen::default_grid(s, T, n, s.tau[1] / 128.0);
  auto field = fieldgen::build_field(s, gs).field;
  std::vector<ScalarState> st{init_scalar("cos1sin2", n), init_scalar("cos1sin2", n)};
  st[0].kappa = 1e-3;
  st[1].kappa = 1e-4;
  RunOptions opt;
  opt.t_end = T;
  auto d = run_scalar(field, st, opt);
  for (auto& run : d) {
    EXPECT_LT(energy_residual(run), 1e-6) << run.kappa;
    for (std::size_t i = 1; i < run.l2_sq.size(); ++i) EXPECT_LE(std::sqrt(run.l2_sq[i]), std::sqrt(run.l2_sq[i - 1]) + 1e-12);
  }
  EXPECT_LT(std::abs(st[0].hat[0]), 1e-13);
  // the shear speeds up dissipation relative to pure diffusion
  double heat = 0.25 * (1 - std::exp(-2 * 4 * kPi * kPi * 2 * 1e-3 * T));
  EXPECT_GT(d[0].cum_diss.back(), heat);
  opt.t_end = 0.11;
  EXPECT_THROW(run_scalar(field, st, opt), ConfigError);
}

TEST(FieldRun, RecipeStepResidualShrinksWithStep) {
  auto s = table_schedule(1);
  auto residual = [&](double div) {
    auto gs = fieldgen::default_grid(s, 0.1, 64, s.tau[1] / div);
    auto field = fieldgen::build_field(s, gs).field;
    std::vector<ScalarState> st{init_scalar("cos1sin2", 64)};
    st[0].kappa = 1e-3;
    RunOptions opt;
    opt.t_end = 0.1;
    return energy_residual(run_scalar(field, st, opt)[0]);
  };
  double r8 = residual(8), r16 = residual(16), r32 = residual(32);
  EXPECT_LT(r8, 5e-3);
  EXPECT_GT(std::log2(r8 / r16), 2.0);
  EXPECT_GT(std::log2(r16 / r32), 2.0);
}

TEST(FieldRun, RefinementWithFrameHold) {
  auto s = table_schedule(1);
  auto gs = fieldgen::default_grid(s, 0.05);
  auto field = fieldgen::build_field(s, gs).field;
  std::vector<ScalarState> a{init_scalar("cos1sin2", 64)}, b{init_scalar("cos1sin2", 64)};
  a[0].kappa = b[0].kappa = 1e-3;
  RunOptions opt;
  opt.t_end = 0.05;
  auto da = run_scalar(field, a, opt);
  opt.refine = 2;
  auto db = run_scalar(field, b, opt);
  EXPECT_EQ(db[0].t.size(), 2 * da[0].t.size() - 1);
  EXPECT_NEAR(db[0].t.back(), 0.05, 1e-12);
  // piecewise-constant divergence-free velocity keeps the energy equality up to the step error
  EXPECT_LT(energy_residual(db[0]), 2 * energy_residual(da[0]));
}
