#include "siseg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace siseg::stats {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// log(1 - exp(x)) for x <= 0.
double log1m_exp(double x) {
  if (x >= 0.0) return -kInf;
  return x > -std::numbers::ln2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}
}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double log_normal_sf(double x) {
  if (x == kInf) return -kInf;
  if (x < 25.0) return std::log(normal_sf(x));
  // Asymptotic series of the Mills ratio; relative error < 1e-12 for x >= 25.
  const double x2 = x * x;
  double term = 1.0;
  double series = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= -(2.0 * k - 1.0) / x2;
    series += term;
  }
  return -0.5 * x2 - std::log(x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double log_standard_normal_mass(double lo, double hi) {
  if (!(lo < hi)) return -kInf;
  if (lo >= 0.0) {
    const double a = log_normal_sf(lo);
    const double b = log_normal_sf(hi);
    return a + log1m_exp(b - a);
  }
  if (hi <= 0.0) return log_standard_normal_mass(-hi, -lo);
  // Straddles zero: 1 - sf(hi) - sf(-lo), both tails below 1/2.
  return std::log1p(-(normal_sf(hi) + normal_sf(-lo)));
}

double log_sum_exp(std::span<const double> values) {
  double m = -kInf;
  for (double v : values) m = std::max(m, v);
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double ks_statistic_uniform(std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double u = std::clamp(samples[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - u, u - static_cast<double>(i) / n});
  }
  return d;
}

double ks_pvalue(double d, std::size_t n) {
  if (n == 0) return 1.0;
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.3) return 1.0;  // Q(0.3) > 0.99999
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

Band binomial_band(double p, std::size_t n, double z) {
  const double se = n ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 1.0;
  return {std::max(0.0, p - z * se), std::min(1.0, p + z * se)};
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace siseg::stats
