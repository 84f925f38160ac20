#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>

#include "siseg/homotopy.hpp"
#include "siseg/hypothesis.hpp"
#include "siseg/network.hpp"

namespace siseg {

/// Intervals are clipped to +-kTailCutoff standard deviations; Gaussian mass
/// beyond that underflows in double precision anyway.
inline constexpr double kTailCutoff = 38.0;

/// Two-sided z-test p-value 2 (1 - Phi(|z_obs| / sigma_eta)).
double naive_p(double z_obs, double sigma_eta);

/// P(|Z| >= |z_obs| | Z in region) for Z ~ N(0, sigma_eta^2).
double truncated_two_sided_p(double z_obs, double sigma_eta, const TruncationRegion& region);

struct TestResult {
  bool detected = false;
  SegmentationMask mask;
  double z_obs = 0.0;
  double sigma_eta = 0.0;
  std::optional<double> p_naive;
  std::optional<double> p_selective;
  std::optional<double> p_oc;
  TruncationRegion truncation;
  std::optional<TruncationRegion> oc_truncation;
  std::size_t region_count = 0;
  double z_min = 0.0;
  double z_max = 0.0;
  /// Filled when PipelineOptions::keep_path is set.
  std::optional<RegionPath> path;
};

struct PipelineOptions {
  /// Search range is [-k sigma_eta, k sigma_eta], widened if needed to
  /// contain z_obs with margin.
  double z_range_sigmas = 20.0;
  bool compute_oc = false;
  bool keep_path = false;
  PathOptions path;
};

/// Segment, build the contrast, sweep the line and compute all p-values.
TestResult selective_p_pipeline(const NetworkSpec& net, const ImageVector& x_obs,
                                const NoiseModel& noise, const PipelineOptions& options = {});

/// Permutation baseline: fraction of B pixel shuffles whose re-segmented
/// contrast is at least as large as the observed one. Shuffles with no
/// detection count as exceedances. Empty when the observed image has no
/// detection.
std::optional<double> permutation_test(const NetworkSpec& net, const ImageVector& x_obs,
                                       std::size_t permutations, std::uint64_t seed);

}  // namespace siseg
