#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "siseg/homotopy.hpp"
#include "siseg/hypothesis.hpp"
#include "siseg/inference.hpp"
#include "siseg/network.hpp"

namespace siseg::experiments {

enum class NoiseFamily { gaussian, laplace, skew_normal, student_t, gaussian_correlated };

NoiseFamily parse_noise_family(const std::string& name);
std::string to_string(NoiseFamily family);

/// Draws zero-mean, unit-variance noise fields of a fixed grid size.
///
/// skew_normal uses shape 10 (two-Gaussian construction), student_t uses 20
/// degrees of freedom; both are standardized. gaussian_correlated has
/// covariance rho^(euclidean grid distance).
class NoiseSampler {
 public:
  NoiseSampler(std::size_t height, std::size_t width, NoiseFamily family, double rho = 0.5);

  std::vector<double> sample(std::mt19937_64& rng) const;
  NoiseFamily family() const { return family_; }
  /// Covariance the sampler draws from (identity except for the correlated family).
  NoiseModel noise_model() const;

 private:
  std::size_t height_;
  std::size_t width_;
  NoiseFamily family_;
  double rho_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd lower_;
};

ImageVector generate_null_image(std::size_t n, NoiseFamily family, std::mt19937_64& rng,
                                double rho = 0.5);

/// Pixels of the centred square object with floor(n/4) pixels (side floor(sqrt(n)/2)).
std::vector<std::size_t> signal_object(std::size_t height, std::size_t width);

/// Unit-variance Gaussian noise plus `delta_mu` on the centred object.
/// The noise field is the one generate_null_image draws from the same rng state.
std::pair<ImageVector, std::vector<std::size_t>> generate_signal_image(std::size_t n, double delta_mu,
                                                                       std::mt19937_64& rng);

/// Conv(3,3,1,4) - ReLU - MaxPool - Upsample - Conv(3,3,4,1) - sign on a
/// side x side image, Gaussian weights scaled 1/sqrt(fan-in).
NetworkSpec make_cnn4_network(std::size_t side, std::uint64_t seed);

/// Same architecture with hand-set weights that label locally bright pixels
/// as object: 3x3 box filters, a centre-tap sum and an output offset of 0.3,
/// plus a small seeded Gaussian perturbation that breaks channel ties.
NetworkSpec make_cnn4_segmenter(std::size_t side, std::uint64_t seed);

/// Dense in-hidden-out network (input laid out as 2 x in/2) with the given
/// hidden activation and a sign output.
NetworkSpec make_dense_network(std::size_t in, std::size_t hidden, std::size_t out,
                               const PiecewiseLinearActivation& activation, std::uint64_t seed);

/// Activation names accepted by experiments: relu, sigmoid-<k>cut, tanh-<k>cut.
PiecewiseLinearActivation activation_by_name(const std::string& name);

struct ExperimentConfig {
  std::size_t n = 64;
  std::size_t trials = 120;
  double delta_mu = 0.0;
  double alpha = 0.05;
  NoiseFamily family = NoiseFamily::gaussian;
  double rho = 0.5;
  bool estimate_sigma = false;
  /// Independent null images pooled for the plug-in variance estimate.
  std::size_t reference_images = 1;
  std::uint64_t seed = 20220101;
  /// Permutation count of the baseline; 0 disables it.
  std::size_t permutations = 0;
  double z_range_sigmas = 20.0;
  bool compute_oc = true;

  /// "cnn4-segmenter", "cnn4" (random Gaussian weights) or "dense".
  std::string architecture = "cnn4-segmenter";
  std::string activation = "relu";
  std::size_t dense_hidden = 16;
  std::uint64_t net_seed = 7;
  std::optional<std::filesystem::path> weights;
  std::optional<int> weights_cuts;

  std::vector<double> delta_grid{0.5, 1.0, 1.5, 2.0};
  std::vector<std::size_t> n_grid{16, 64, 256};
  std::vector<double> alphas{0.05, 0.1};
  std::vector<std::string> robustness_cases{"laplace", "skew_normal", "student_t", "estimated_sigma"};
  std::vector<int> cut_grid{3, 5, 7};
  std::size_t oracle_nets = 20;
  std::size_t oracle_images = 20;
  double oracle_step_sigmas = 1e-3;

  /// 0 = hardware concurrency.
  std::size_t threads = 0;
};

ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& config);

struct TrialRecord {
  std::size_t group = 0;
  std::size_t index = 0;
  bool detected = false;
  std::optional<double> p_naive;
  std::optional<double> p_selective;
  std::optional<double> p_oc;
  std::optional<double> p_permutation;
  double z_obs = 0.0;
  double sigma_eta = 0.0;
  double truncation_length = 0.0;
  double oc_length = 0.0;
  std::size_t truncation_intervals = 0;
  std::size_t region_count = 0;
  double seconds = 0.0;
};

struct RateSummary {
  std::size_t detected = 0;
  std::size_t rejected = 0;
  double rate = 0.0;
  double standard_error = 0.0;
};

struct GroupSummary {
  std::string label;
  std::size_t n = 0;
  double delta_mu = 0.0;
  std::string family;
  bool estimated_sigma = false;
  std::string activation;
  std::size_t trials = 0;
  std::size_t detected = 0;
  /// One entry per alpha in `alphas`.
  std::vector<double> alphas;
  std::vector<RateSummary> selective;
  std::vector<RateSummary> naive;
  std::vector<RateSummary> oc;
  std::vector<RateSummary> permutation;
  double mean_truncation_length = 0.0;
  double mean_oc_length = 0.0;
  double mean_region_count = 0.0;
  double ks_selective = 0.0;
  double ks_selective_pvalue = 1.0;
  double ks_naive = 0.0;
  double ks_naive_pvalue = 1.0;
};

struct ExperimentReport {
  std::string kind;
  ExperimentConfig config;
  std::vector<TrialRecord> trials;
  std::vector<GroupSummary> groups;
  /// Breakpoint study: least-squares slope of log(mean region count) vs log(n).
  std::optional<double> loglog_slope;
  /// Pivot study: sorted selective p-values and their uniform quantiles.
  std::vector<std::pair<double, double>> qq;

  nlohmann::json summary_json() const;
  /// Writes trials.jsonl, summary.json and (pivot study) qq.csv into `directory`.
  void write(const std::filesystem::path& directory) const;
};

/// Rejections over detections at level alpha for the p-value picked by `which`.
RateSummary rejection_rate(const std::vector<TrialRecord>& trials, double alpha,
                           std::optional<double> TrialRecord::*which);

ExperimentReport run_fpr_experiment(const ExperimentConfig& config);
ExperimentReport run_power_experiment(const ExperimentConfig& config);
ExperimentReport run_breakpoint_experiment(const ExperimentConfig& config);
ExperimentReport run_pivot_experiment(const ExperimentConfig& config);
ExperimentReport run_robustness_experiment(const ExperimentConfig& config);
/// Pivot uniformity plus region counts over `cut_grid` for the dense net
/// with smooth activations replaced by k-cut approximations.
ExperimentReport run_cut_experiment(const ExperimentConfig& config);

/// Truncation region found by scanning the line on a uniform grid with plain
/// forward passes and bisecting every label change.
struct GridScan {
  TruncationRegion region;
  std::vector<double> grid;
  std::vector<SegmentationMask> masks;
};
GridScan grid_scan_truncation(const NetworkSpec& net, const LineParametrization& line,
                              const SegmentationMask& mask_obs, double z_min, double z_max,
                              double step);

struct OracleComparison {
  std::size_t grid_disagreements = 0;
  bool interval_count_match = true;
  double max_endpoint_deviation = 0.0;
};
OracleComparison compare_with_grid(const RegionPath& path, const TruncationRegion& homotopy,
                                   const GridScan& scan);

struct OracleReport {
  std::size_t cases = 0;
  std::size_t skipped_no_detection = 0;
  std::size_t grid_disagreements = 0;
  std::size_t interval_count_mismatches = 0;
  double max_endpoint_deviation_sigmas = 0.0;
  bool passed = true;
  nlohmann::json to_json() const;
};
OracleReport run_oracle_check(const ExperimentConfig& config);

/// Network used by a config: the weights file when given, else the
/// deterministic generator for the architecture and image side.
NetworkSpec network_for(const ExperimentConfig& config, std::size_t n);

}  // namespace siseg::experiments
