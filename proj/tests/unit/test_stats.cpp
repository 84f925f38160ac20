#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "siseg/stats.hpp"

namespace siseg::stats {
namespace {

TEST(Normal, CdfAndTailAgreeWithErfc) {
  for (double x = -8.0; x <= 8.0; x += 0.25) {
    EXPECT_NEAR(normal_cdf(x), 0.5 * std::erfc(-x / std::sqrt(2.0)), 1e-15);
    const double sf = 0.5 * std::erfc(x / std::sqrt(2.0));
    EXPECT_NEAR(normal_sf(x), sf, 1e-15 + 1e-13 * sf);
  }
}

TEST(Normal, LogTailFarOut) {
  for (double x : {5.0, 10.0, 20.0, 26.0, 30.0}) {
    EXPECT_NEAR(log_normal_sf(x), std::log(0.5 * std::erfc(x / std::sqrt(2.0))), 1e-9) << x;
  }
  // Mills ratio asymptotics: log sf(x) ~ -x^2/2 - log(x sqrt(2 pi)) - 1/x^2 for very large x.
  const double x = 60.0;
  EXPECT_NEAR(log_normal_sf(x), -0.5 * x * x - std::log(x * std::sqrt(2.0 * M_PI)) - 1.0 / (x * x), 1e-6);
}

TEST(Normal, LogMassBranches) {
  EXPECT_NEAR(std::exp(log_standard_normal_mass(-1.0, 1.0)), 0.682689492137086, 1e-14);
  EXPECT_NEAR(log_standard_normal_mass(30.0, 31.0), log_normal_sf(30.0) + std::log1p(-std::exp(log_normal_sf(31.0) - log_normal_sf(30.0))), 1e-12);
  EXPECT_NEAR(log_standard_normal_mass(-31.0, -30.0), log_standard_normal_mass(30.0, 31.0), 1e-12);
  EXPECT_EQ(log_standard_normal_mass(1.0, 1.0), -std::numeric_limits<double>::infinity());
}

TEST(LogSumExp, Basics) {
  const std::vector<double> v{std::log(1.0), std::log(2.0), std::log(3.0)};
  EXPECT_NEAR(log_sum_exp(v), std::log(6.0), 1e-15);
  EXPECT_EQ(log_sum_exp({}), -std::numeric_limits<double>::infinity());
  const std::vector<double> big{-1000.0, -1000.0};
  EXPECT_NEAR(log_sum_exp(big), -1000.0 + std::log(2.0), 1e-12);
}

TEST(Ks, StatisticByHand) {
  // Sorted (0.1, 0.4, 0.7): D+ = max(1/3-0.1, 2/3-0.4, 1-0.7) = 0.3, D- = max(0.1, 0.4-1/3, 0.7-2/3) = 0.1
  EXPECT_NEAR(ks_statistic_uniform({0.7, 0.1, 0.4}), 0.3, 1e-15);
}

TEST(Ks, PValueCriticalValues) {
  const std::size_t n = 10000;
  const double scale = std::sqrt(static_cast<double>(n)) + 0.12 + 0.11 / std::sqrt(static_cast<double>(n));
  EXPECT_NEAR(ks_pvalue(1.3581 / scale, n), 0.05, 1e-3);
  EXPECT_NEAR(ks_pvalue(1.6276 / scale, n), 0.01, 1e-3);
  EXPECT_DOUBLE_EQ(ks_pvalue(0.0, n), 1.0);
  EXPECT_LT(ks_pvalue(0.5, 100), 1e-10);
}

TEST(Ks, UniformSamplesUsuallyPass) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int failures = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> s(500);
    for (auto& v : s) v = u(rng);
    failures += ks_pvalue(ks_statistic_uniform(s), s.size()) < 0.01;
  }
  EXPECT_LE(failures, 5);
  std::vector<double> skewed(500);
  for (auto& v : skewed) v = u(rng) * u(rng);
  EXPECT_LT(ks_pvalue(ks_statistic_uniform(skewed), skewed.size()), 1e-6);
}

TEST(BinomialBand, HundredTwentyTrials) {
  const auto band = binomial_band(0.05, 120);
  EXPECT_NEAR(band.lo, 0.05 - 1.959963984540054 * std::sqrt(0.05 * 0.95 / 120), 1e-15);
  EXPECT_NEAR(band.hi, 0.05 + 1.959963984540054 * std::sqrt(0.05 * 0.95 / 120), 1e-15);
}

TEST(DeriveSeed, DeterministicAndDistinct) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 1));
}

}  // namespace
}  // namespace siseg::stats
