#include <gtest/gtest.h>

#include <cmath>

#include "avlab/scales.hpp"

using namespace avlab::scales;

TEST(Exponents, InteriorValues) {
  auto e = derive_exponents_beta(1.2);
  EXPECT_NEAR(e.alpha, 0.2, 1e-15);
  EXPECT_NEAR(e.q, 1.5, 1e-14);
  EXPECT_NEAR(e.delta, 0.005, 1e-15);
  EXPECT_NEAR(e.gamma, 0.24, 1e-14);
}

TEST(Exponents, UpperEndpoint) {
  auto e = derive_exponents_beta(4.0 / 3.0);
  EXPECT_NEAR(e.q, 1.0, 1e-14);
  EXPECT_NEAR(e.gamma, 0.0, 1e-14);
  EXPECT_NEAR(e.delta, 0.0, 1e-14);
}

TEST(Exponents, LowerEndpointReportsInfinity) {
  auto e = derive_exponents_beta(1.0);
  EXPECT_TRUE(e.q_infinite);
  EXPECT_TRUE(std::isinf(e.q));
  EXPECT_DOUBLE_EQ(e.delta, 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(e.gamma, 1.0);
  // the closed forms approach these values
  auto near = derive_exponents_beta(1.0 + 1e-9);
  EXPECT_NEAR(near.delta, 1.0 / 16.0, 1e-6);
  EXPECT_NEAR(near.gamma, 1.0, 1e-6);
}

TEST(Exponents, OutOfRangeRejected) {
  EXPECT_THROW(derive_exponents_beta(1.4), avlab::ConfigError);
  EXPECT_THROW(derive_exponents_beta(0.9), avlab::ConfigError);
  EXPECT_THROW(derive_exponents_alpha(0.5), avlab::ConfigError);
}

TEST(Exponents, GammaTwoWaysAgree) {
  for (double alpha = 0.01; alpha < 1.0 / 3.0; alpha += 0.01) {
    auto e = derive_exponents_alpha(alpha);
    double alt = gamma_from_alpha(alpha);
    EXPECT_NEAR(e.gamma, alt, 1e-12 * std::max(1.0, std::abs(alt))) << alpha;
    auto eb = derive_exponents_beta(alpha + 1.0);
    EXPECT_DOUBLE_EQ(e.q, eb.q);
    EXPECT_DOUBLE_EQ(e.delta, eb.delta);
  }
}

TEST(Exponents, RichardsonFormula) {
  EXPECT_NEAR(richardson_exponent(1.0 / 3.0), 3.0, 1e-14);
  // beta = 1.2: gamma = 0.24, nu = 1 + 1.44/0.8
  EXPECT_NEAR(richardson_exponent(0.2), 2.8, 1e-14);
  EXPECT_NEAR(obukhov_corrsin(0.2), 0.4, 1e-15);
}

TEST(Schedule, HypergeometricTable) {
  auto s = build_schedule(derive_exponents_beta(1.2), 2.5, 3, Mode::hypergeometric);
  EXPECT_EQ(s.eps_inv[0], 7u);
  EXPECT_EQ(s.eps_inv[1], 16u);
  EXPECT_EQ(s.eps_inv[2], 62u);
  EXPECT_EQ(s.eps_inv[3], 486u);
  // hand evaluation of the tau recipe
  EXPECT_DOUBLE_EQ(s.tau_pp[1], 1.0 / 16.0);
  EXPECT_DOUBLE_EQ(s.tau_pp[2], 1.0 / 36.0);
  EXPECT_DOUBLE_EQ(s.tau_pp[3], 1.0 / 112.0);
  EXPECT_DOUBLE_EQ(s.tau_p[1], 1.0 / 432.0);
  EXPECT_DOUBLE_EQ(s.tau_p[2], 1.0 / 972.0);
  EXPECT_DOUBLE_EQ(s.tau_p[3], 1.0 / 3024.0);
  for (int m = 1; m <= 3; ++m) {
    EXPECT_EQ(s.tau[m], s.tau_p[m]);
    EXPECT_LE(s.tau_p[m], s.tau_pp[m]);
    EXPECT_LT(s.tau_pp[m] * s.a[m - 1], 1.0);
    EXPECT_NEAR(s.a[m], std::pow(static_cast<double>(s.eps_inv[m]), 0.8), 1e-12 * s.a[m]);
  }
  EXPECT_NEAR(s.tau[3] / 8.0, 4.13e-5, 1e-7);
}

TEST(Schedule, Geometric) {
  auto ex = derive_exponents_beta(1.2);
  auto s = build_schedule(ex, 4.0, 2, Mode::geometric);
  EXPECT_EQ(s.eps_inv[0], 1u);
  EXPECT_DOUBLE_EQ(s.eps[2], 1.0 / 16.0);
  auto h = build_schedule(ex, 4.0, 2, Mode::geometric, true);
  EXPECT_EQ(h.eps_inv[0], static_cast<std::uint64_t>(std::ceil(std::pow(4.0, 2.0))));
}

TEST(Schedule, UnreachableLevelNamesFeasibleM) {
  auto ex = derive_exponents_beta(1.2);
  try {
    build_schedule(ex, 2.5, 8, Mode::hypergeometric);
    FAIL() << "expected overflow";
  } catch (const avlab::ConfigError& e) {
    std::string w = e.what();
    EXPECT_NE(w.find("unreachable"), std::string::npos);
    EXPECT_NE(w.find("largest feasible M = 7"), std::string::npos) << w;
  }
}

TEST(Schedule, HypergeometricFasterThanGeometric) {
  auto s = build_schedule(derive_exponents_beta(1.25), 4.0, 3, Mode::hypergeometric);
  double r = s.eps_ratio_bound();
  EXPECT_GT(r, 0.25);
  // ceilings inflate eps[m]^-1 by at most one
  double slack = 1.0;
  for (int m = 0; m < s.M; ++m) slack = std::max(slack, std::pow(1.0 + s.eps[m], s.ex.q));
  EXPECT_LE(r, slack * (1.0 + 1e-12));
  for (int m = 1; m < s.M; ++m) EXPECT_LT(s.eps[m + 1] / s.eps[m], s.eps[m] / s.eps[m - 1]);
}

TEST(Schedule, JsonRoundTrip) {
  auto s = build_schedule(derive_exponents_beta(1.2), 2.5, 3, Mode::hypergeometric);
  auto j = to_json(s);
  for (auto key : {"alpha", "beta", "q", "delta", "gamma", "Lambda", "M", "mode", "eps_inv", "a", "tau", "tau_p",
                   "tau_pp"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_TRUE(j["tau"][0].is_null());
  auto back = schedule_from_json(j);
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

TEST(Constraints, MarginalAtEquality) {
  auto s = build_schedule(derive_exponents_beta(1.2), 2.5, 2, Mode::hypergeometric);
  // choose kappa so that a eps^3/kappa equals eps_prev at m = 1
  double kappa = s.a[1] * std::pow(s.eps[1], 3) / s.eps[0];
  auto rep = validate_constraints(s, kappa);
  auto& r = rep.levels[0].ratios[3];
  EXPECT_EQ(r.name, "a*eps^3/(kappa*eps_prev)");
  EXPECT_NEAR(r.value, 1.0, 1e-14);
  EXPECT_EQ(r.verdict, Verdict::marginal);
}

TEST(Constraints, TableParametersReport) {
  auto s = build_schedule(derive_exponents_beta(1.2), 2.5, 3, Mode::hypergeometric);
  auto rep = validate_constraints(s, 1e-5);
  ASSERT_EQ(rep.levels.size(), 3u);
  // tau = tau_p by construction, so that ratio is always marginal
  for (auto& l : rep.levels) EXPECT_EQ(l.ratios[0].verdict, Verdict::marginal);
  EXPECT_FALSE(to_json(rep).dump().empty());
}

TEST(Constraints, HugeKappaMixed) {
  auto s = build_schedule(derive_exponents_beta(1.2), 2.5, 2, Mode::hypergeometric);
  auto rep = validate_constraints(s, 100.0);
  for (auto& l : rep.levels) {
    EXPECT_EQ(l.ratios[4].verdict, Verdict::pass);
    EXPECT_EQ(l.ratios[3].verdict, Verdict::pass);
  }
  EXPECT_FALSE(rep.all_pass());
  EXPECT_THROW(validate_constraints(s, -1.0), avlab::ConfigError);
}
