#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace siseg::stats {

double normal_cdf(double x);
/// Upper tail 1 - Phi(x) without cancellation.
double normal_sf(double x);
/// log(1 - Phi(x)), accurate far into the upper tail.
double log_normal_sf(double x);
/// log(Phi(hi) - Phi(lo)) for lo <= hi; -inf for an empty interval.
double log_standard_normal_mass(double lo, double hi);
/// log(sum(exp(v))) over the entries; -inf for an empty input.
double log_sum_exp(std::span<const double> values);

/// One-sample Kolmogorov-Smirnov statistic against U(0, 1).
double ks_statistic_uniform(std::vector<double> samples);
/// Asymptotic p-value of the KS statistic `d` for `n` samples.
double ks_pvalue(double d, std::size_t n);

/// Two-sided normal-approximation band p +- z * sqrt(p (1 - p) / n).
struct Band {
  double lo = 0.0;
  double hi = 1.0;
};
Band binomial_band(double p, std::size_t n, double z = 1.959963984540054);

/// SplitMix64 finaliser; derives independent stream seeds from (root, index).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

}  // namespace siseg::stats
