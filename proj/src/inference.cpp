#include "siseg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "siseg/errors.hpp"
#include "siseg/stats.hpp"

namespace siseg {

double naive_p(double z_obs, double sigma_eta) {
  if (!(sigma_eta > 0.0)) throw ArgumentError("sigma_eta must be positive");
  return std::clamp(2.0 * stats::normal_sf(std::abs(z_obs) / sigma_eta), 0.0, 1.0);
}

double truncated_two_sided_p(double z_obs, double sigma_eta, const TruncationRegion& region) {
  if (!(sigma_eta > 0.0)) throw ArgumentError("sigma_eta must be positive");
  if (!region.contains(z_obs, 1e-9 * std::max(1.0, std::abs(z_obs))))
    throw ArgumentError("observed statistic lies outside the truncation region");
  const double t = std::abs(z_obs) / sigma_eta;
  std::vector<double> numerator;
  std::vector<double> denominator;
  for (const auto& iv : region.intervals) {
    const double lo = std::max(iv.lo / sigma_eta, -kTailCutoff);
    const double hi = std::min(iv.hi / sigma_eta, kTailCutoff);
    if (!(lo < hi)) continue;
    denominator.push_back(stats::log_standard_normal_mass(lo, hi));
    // Intersect with (-inf, -t] and [t, inf).
    if (lo < -t) numerator.push_back(stats::log_standard_normal_mass(lo, std::min(hi, -t)));
    if (hi > t) numerator.push_back(stats::log_standard_normal_mass(std::max(lo, t), hi));
  }
  const double log_den = stats::log_sum_exp(denominator);
  if (!std::isfinite(log_den))
    throw DegenerateRegionError("truncation region has no probability mass");
  const double log_num = stats::log_sum_exp(numerator);
  return std::clamp(std::exp(log_num - log_den), 0.0, 1.0);
}

TestResult selective_p_pipeline(const NetworkSpec& net, const ImageVector& x_obs,
                                const NoiseModel& noise, const PipelineOptions& options) {
  TestResult result;
  result.mask = forward(net, x_obs);
  const auto eta = build_test_direction(result.mask);
  if (!eta) return result;
  result.detected = true;

  const LineParametrization line = line_parametrization(x_obs, *eta, noise);
  result.z_obs = line.z_obs;
  result.sigma_eta = line.sigma_eta;
  const double half = std::max(options.z_range_sigmas * line.sigma_eta, 1.5 * std::abs(line.z_obs));
  result.z_min = -half;
  result.z_max = half;

  RegionPath path = compute_solution_path(net, line, result.z_min, result.z_max, options.path);
  result.region_count = path.regions.size();
  result.truncation = truncation_region(path, result.mask, line.z_obs);
  result.p_naive = naive_p(line.z_obs, line.sigma_eta);
  result.p_selective = truncated_two_sided_p(line.z_obs, line.sigma_eta, result.truncation);
  if (options.compute_oc) {
    result.oc_truncation =
        oc_region(net, line, line.z_obs, result.z_min, result.z_max, options.path.slope_tol);
    result.p_oc = truncated_two_sided_p(line.z_obs, line.sigma_eta, *result.oc_truncation);
  }
  if (options.keep_path) result.path = std::move(path);
  return result;
}

namespace {
std::optional<double> contrast(const SegmentationMask& mask, std::span<const double> x) {
  const auto eta = build_test_direction(mask);
  if (!eta) return std::nullopt;
  return std::inner_product(eta->begin(), eta->end(), x.begin(), 0.0);
}
}  // namespace

std::optional<double> permutation_test(const NetworkSpec& net, const ImageVector& x_obs,
                                       std::size_t permutations, std::uint64_t seed) {
  if (permutations == 0) throw ArgumentError("permutation count must be >= 1");
  const auto t_obs = contrast(forward(net, x_obs), x_obs.values());
  if (!t_obs) return std::nullopt;

  std::size_t exceed = 0;
  std::vector<double> shuffled(x_obs.values().begin(), x_obs.values().end());
  for (std::size_t b = 0; b < permutations; ++b) {
    std::mt19937_64 rng(stats::derive_seed(seed, b));
    std::copy(x_obs.values().begin(), x_obs.values().end(), shuffled.begin());
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const ImageVector xb(shuffled, x_obs.height(), x_obs.width());
    const auto tb = contrast(forward(net, xb), xb.values());
    if (!tb || std::abs(*t_obs) <= std::abs(*tb)) ++exceed;
  }
  return static_cast<double>(exceed) / static_cast<double>(permutations);
}

}  // namespace siseg
