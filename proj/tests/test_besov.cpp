#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "avlab/besov.hpp"
#include "avlab/rng.hpp"

using namespace avlab;
using namespace avlab::besov;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> sample(int n, const std::function<double(double, double)>& f) {
  std::vector<double> u(static_cast<std::size_t>(n) * n);
  for (int i2 = 0; i2 < n; ++i2)
    for (int i1 = 0; i1 < n; ++i1) u[i2 * n + i1] = f(double(i1) / n, double(i2) / n);
  return u;
}

// lacunary series with Holder exponent h, modes up to n/3
std::vector<double> lacunary(int n, double h) {
  return sample(n, [&](double x1, double x2) {
    double s = 0;
    for (int p = 0; (1 << p) <= n / 3; ++p) s += std::exp2(-p * h) * (std::cos(2 * kPi * (1 << p) * x1) + std::sin(2 * kPi * (1 << p) * x2));
    return s;
  });
}

}  // namespace

TEST(Besov, MultiplierSupport) {
  for (int j = 0; j < 6; ++j) {
    double c = std::ldexp(1.0, j);
    EXPECT_EQ(block_weight(j, 0.74 * c), 0.0);
    EXPECT_EQ(block_weight(j, 2.67 * c), 0.0);
    EXPECT_DOUBLE_EQ(block_weight(j, 1.34 * c), 1.0);
    EXPECT_DOUBLE_EQ(block_weight(j, 1.49 * c), 1.0);
    EXPECT_GT(block_weight(j, 1.0 * c), 0.0);
  }
  // partition: the low block plus all dyadic blocks sum to one
  for (double k = 0; k < 200; k += 0.37) {
    double s = block_weight(-1, k);
    for (int j = 0; j < 12; ++j) s += block_weight(j, k);
    EXPECT_NEAR(s, 1.0, 1e-14) << k;
  }
}

TEST(Besov, SingleModeClosedForm) {
  const int n = 64;
  auto u = sample(n, [](double x1, double) { return std::sin(2 * kPi * 12 * x1); });
  Analyzer an(n);
  EXPECT_EQ(an.top(), 4);
  auto a = an.amplitudes_physical(u);
  for (double s : {0.0, 0.3, 0.7, 1.0}) EXPECT_NEAR(norm(a, s), std::exp2(3 * s), 1e-10 * std::exp2(3 * s)) << s;
  for (int j = 0; j <= an.top(); ++j)
    if (j != 3) {
      EXPECT_LT(a.block[j], 1e-12);
    }
  EXPECT_LT(a.remainder, 1e-12);
}

TEST(Besov, SigmaZeroIsMaxBlock) {
  auto u = lacunary(64, 0.5);
  auto a = Analyzer(64).amplitudes_physical(u);
  EXPECT_DOUBLE_EQ(norm(a, 0.0), *std::max_element(a.block.begin(), a.block.end()));
}

TEST(Besov, BlocksReconstruct) {
  const int n = 32;
  rng::CounterRng r(2, rng::Stream::endpoint);
  std::vector<double> u(n * n);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = r.uniform2(i, 0)[0] - 0.5;
  Analyzer an(n);
  std::vector<cplx> hat;
  an.grid().forward(u, hat);
  std::vector<double> sum(u.size(), 0.0);
  for (int b = -1; b <= an.top() + 1; ++b) {
    auto part = an.band(hat, b);
    for (std::size_t i = 0; i < u.size(); ++i) sum[i] += part[i];
  }
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(sum[i], u[i], 1e-10);
}

TEST(Besov, Homogeneity) {
  auto u = lacunary(64, 0.5);
  auto v = u;
  for (auto& x : v) x *= -3.5;
  for (double s : {0.2, 0.9}) EXPECT_NEAR(besov_norm(v, 64, s), 3.5 * besov_norm(u, 64, s), 1e-12 * besov_norm(v, 64, s));
}

TEST(Besov, RejectsBadInput) {
  EXPECT_THROW(Analyzer(48), ConfigError);
  std::vector<double> u(64 * 64, 0.0);
  u[5] = std::nan("");
  EXPECT_THROW(besov_norm(u, 64, 0.5), NumericalError);
}

TEST(Besov, LacunaryDichotomyUnderRefinement) {
  // Holder 1/2 sample: sigma = 0.3 stays put, sigma = 0.7 grows when the grid doubles
  auto a = Analyzer(256).amplitudes_physical(lacunary(256, 0.5));
  auto b = Analyzer(512).amplitudes_physical(lacunary(512, 0.5));
  EXPECT_NEAR(norm(b, 0.3) / norm(a, 0.3), 1.0, 0.02);
  EXPECT_GT(norm(b, 0.7) / norm(a, 0.7), 1.1);
}

TEST(Besov, SigmaGridParsing) {
  auto g = sigma_grid("0.04:0.04:1.2");
  ASSERT_EQ(g.size(), 30u);
  EXPECT_NEAR(g.back(), 1.2, 1e-12);
  EXPECT_THROW(sigma_grid("0.1,0.2"), ConfigError);
}

TEST(Besov, ScanLocatesGrowthOnset) {
  // blocks decay like 2^(-0.4 j) up to a kappa-dependent cutoff j <= log2(1/kappa)
  std::vector<Series> runs;
  for (double kappa : {1.0 / 64, 1.0 / 256, 1.0 / 1024}) {
    Series s;
    s.kappa = kappa;
    int jmax = static_cast<int>(std::lround(std::log2(1 / kappa)));
    for (int i = 0; i <= 4; ++i) {
      Snapshot sn;
      sn.t = 0.25 * i;
      for (int j = 0; j <= 12; ++j) sn.amp.block.push_back(j <= std::min(jmax, 2 + 2 * i) ? std::exp2(-0.4 * j) : 0.0);
      s.snaps.push_back(sn);
    }
    runs.push_back(s);
  }
  auto sigma = sigma_grid("0.04:0.04:1.0");
  auto two = regularity_scan({runs[0], runs[1]}, sigma);
  EXPECT_TRUE(two.kappa_slope.empty());
  EXPECT_TRUE(std::isnan(two.sigma_c));
  auto sc = regularity_scan(runs, sigma);
  EXPECT_NEAR(sc.sigma_c, 0.45, 0.01);
  // onset comes no later for larger sigma; sigma below 0.4 never grows
  for (std::size_t k = 1; k < sigma.size(); ++k) EXPECT_LE(sc.onset[2][k], sc.onset[2][k - 1]);
  EXPECT_TRUE(std::isinf(sc.onset[2][5]));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t k = 0; k < sigma.size(); ++k) EXPECT_GE(sc.sup_norm[r][k], sc.value[r][0][k]);
  auto csv = to_csv(sc);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "kappa,t,sigma,norm,sup_norm");
}
