#include "siseg/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <thread>

#include "siseg/errors.hpp"
#include "siseg/stats.hpp"
#include "siseg/weights_io.hpp"

namespace siseg::experiments {

using nlohmann::json;

namespace {

// Gaussian perturbation (relative to 1/sqrt(fan-in)) and output offset of the
// hand-set segmenter.
constexpr double kSegmenterJitter = 0.1;
constexpr double kSegmenterThreshold = 0.3;

std::size_t square_side(std::size_t n) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (side * side != n) throw ArgumentError("pixel count " + std::to_string(n) + " is not a perfect square");
  return side;
}

template <class Body>
void parallel_for(std::size_t count, std::size_t threads, Body&& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(count, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

std::vector<double> gaussian_weights(std::size_t count, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> w(count);
  for (auto& v : w) v = normal(rng);
  return w;
}

struct GroupSpec {
  std::string label;
  std::size_t n = 0;
  double delta_mu = 0.0;
  NoiseFamily family = NoiseFamily::gaussian;
  bool estimate_sigma = false;
  std::string activation;
  std::uint64_t stream = 0;
};

GroupSummary summarize(const GroupSpec& spec, const std::vector<TrialRecord>& trials,
                       const std::vector<double>& alphas) {
  GroupSummary g;
  g.label = spec.label;
  g.n = spec.n;
  g.delta_mu = spec.delta_mu;
  g.family = to_string(spec.family);
  g.estimated_sigma = spec.estimate_sigma;
  g.activation = spec.activation;
  g.trials = trials.size();
  g.alphas = alphas;
  std::vector<double> sel;
  std::vector<double> naive;
  double len = 0.0;
  double oc_len = 0.0;
  double regions = 0.0;
  for (const auto& t : trials) {
    if (!t.detected) continue;
    ++g.detected;
    len += t.truncation_length;
    oc_len += t.oc_length;
    regions += static_cast<double>(t.region_count);
    if (t.p_selective) sel.push_back(*t.p_selective);
    if (t.p_naive) naive.push_back(*t.p_naive);
  }
  if (g.detected) {
    const auto d = static_cast<double>(g.detected);
    g.mean_truncation_length = len / d;
    g.mean_oc_length = oc_len / d;
    g.mean_region_count = regions / d;
  }
  for (double a : alphas) {
    g.selective.push_back(rejection_rate(trials, a, &TrialRecord::p_selective));
    g.naive.push_back(rejection_rate(trials, a, &TrialRecord::p_naive));
    g.oc.push_back(rejection_rate(trials, a, &TrialRecord::p_oc));
    g.permutation.push_back(rejection_rate(trials, a, &TrialRecord::p_permutation));
  }
  if (!sel.empty()) {
    g.ks_selective = stats::ks_statistic_uniform(sel);
    g.ks_selective_pvalue = stats::ks_pvalue(g.ks_selective, sel.size());
  }
  if (!naive.empty()) {
    g.ks_naive = stats::ks_statistic_uniform(naive);
    g.ks_naive_pvalue = stats::ks_pvalue(g.ks_naive, naive.size());
  }
  return g;
}

// Runs `config.trials` pipeline trials for one group and appends records.
std::vector<TrialRecord> run_group(const ExperimentConfig& config, const NetworkSpec& net,
                                   const TensorShape& shape, const GroupSpec& spec,
                                   std::size_t group_index) {
  const NoiseSampler sampler(shape.height, shape.width, spec.family, config.rho);
  const NoiseModel known = sampler.noise_model();
  std::vector<std::size_t> object;
  if (spec.delta_mu != 0.0) object = signal_object(shape.height, shape.width);

  PipelineOptions options;
  options.z_range_sigmas = config.z_range_sigmas;
  options.compute_oc = config.compute_oc;

  std::vector<TrialRecord> records(config.trials);
  parallel_for(config.trials, config.threads, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(stats::derive_seed(spec.stream, i));
    std::vector<double> values = sampler.sample(rng);
    for (std::size_t k : object) values[k] += spec.delta_mu;
    const ImageVector image(std::move(values), shape.height, shape.width);

    std::optional<NoiseModel> estimated;
    if (spec.estimate_sigma) {
      std::vector<ImageVector> reference;
      for (std::size_t r = 0; r < std::max<std::size_t>(1, config.reference_images); ++r)
        reference.emplace_back(sampler.sample(rng), shape.height, shape.width);
      estimated = estimate_variance(reference);
    }

    const TestResult res = selective_p_pipeline(net, image, estimated ? *estimated : known, options);
    TrialRecord& rec = records[i];
    rec.group = group_index;
    rec.index = i;
    rec.detected = res.detected;
    if (res.detected) {
      rec.p_naive = res.p_naive;
      rec.p_selective = res.p_selective;
      rec.p_oc = res.p_oc;
      rec.z_obs = res.z_obs;
      rec.sigma_eta = res.sigma_eta;
      rec.truncation_length = res.truncation.total_length();
      rec.truncation_intervals = res.truncation.intervals.size();
      if (res.oc_truncation) rec.oc_length = res.oc_truncation->total_length();
      rec.region_count = res.region_count;
      if (config.permutations > 0)
        rec.p_permutation =
            permutation_test(net, image, config.permutations, stats::derive_seed(spec.stream ^ 0x5eedULL, i));
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  });
  return records;
}

TensorShape input_shape_for(const ExperimentConfig& config, const NetworkSpec& net, std::size_t n) {
  if (net.input_shape()) return *net.input_shape();
  const std::size_t side = square_side(n);
  return {1, side, side};
}

ExperimentReport run_groups(const ExperimentConfig& config, const std::string& kind,
                            const std::vector<GroupSpec>& specs) {
  ExperimentReport report;
  report.kind = kind;
  report.config = config;
  for (std::size_t g = 0; g < specs.size(); ++g) {
    ExperimentConfig local = config;
    local.n = specs[g].n;
    if (!specs[g].activation.empty()) local.activation = specs[g].activation;
    const NetworkSpec net = network_for(local, specs[g].n);
    const TensorShape shape = input_shape_for(local, net, specs[g].n);
    auto records = run_group(local, net, shape, specs[g], g);
    report.groups.push_back(summarize(specs[g], records, config.alphas));
    report.trials.insert(report.trials.end(), records.begin(), records.end());
  }
  return report;
}

std::vector<double> with_alpha(std::vector<double> alphas, double alpha) {
  if (std::find(alphas.begin(), alphas.end(), alpha) == alphas.end()) alphas.insert(alphas.begin(), alpha);
  return alphas;
}

json rate_json(const RateSummary& r) {
  return {{"detected", r.detected}, {"rejected", r.rejected}, {"rate", r.rate}, {"standard_error", r.standard_error}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

NoiseFamily parse_noise_family(const std::string& name) {
  if (name == "gaussian") return NoiseFamily::gaussian;
  if (name == "laplace") return NoiseFamily::laplace;
  if (name == "skew_normal" || name == "skew-normal") return NoiseFamily::skew_normal;
  if (name == "student_t" || name == "student-t" || name == "t20") return NoiseFamily::student_t;
  if (name == "gaussian_correlated" || name == "gaussian-correlated") return NoiseFamily::gaussian_correlated;
  throw ArgumentError("unknown noise family '" + name + "'");
}

std::string to_string(NoiseFamily family) {
  switch (family) {
    case NoiseFamily::gaussian: return "gaussian";
    case NoiseFamily::laplace: return "laplace";
    case NoiseFamily::skew_normal: return "skew_normal";
    case NoiseFamily::student_t: return "student_t";
    case NoiseFamily::gaussian_correlated: return "gaussian_correlated";
  }
  return "unknown";
}

NoiseSampler::NoiseSampler(std::size_t height, std::size_t width, NoiseFamily family, double rho)
    : height_(height), width_(width), family_(family), rho_(rho) {
  if (family_ != NoiseFamily::gaussian_correlated) return;
  if (!(rho_ >= 0.0 && rho_ < 1.0)) throw ArgumentError("correlation rho must lie in [0, 1)");
  const auto n = static_cast<Eigen::Index>(height_ * width_);
  covariance_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dy = static_cast<double>(i / static_cast<Eigen::Index>(width_)) -
                        static_cast<double>(j / static_cast<Eigen::Index>(width_));
      const double dx = static_cast<double>(i % static_cast<Eigen::Index>(width_)) -
                        static_cast<double>(j % static_cast<Eigen::Index>(width_));
      covariance_(i, j) = std::pow(rho_, std::sqrt(dy * dy + dx * dx));
    }
  }
  lower_ = NoiseModel::full(covariance_).cholesky_lower();
}

NoiseModel NoiseSampler::noise_model() const {
  if (family_ == NoiseFamily::gaussian_correlated) return NoiseModel::full(covariance_);
  return NoiseModel::isotropic(1.0);
}

std::vector<double> NoiseSampler::sample(std::mt19937_64& rng) const {
  const std::size_t n = height_ * width_;
  std::vector<double> out(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (family_) {
    case NoiseFamily::gaussian:
      for (auto& v : out) v = normal(rng);
      break;
    case NoiseFamily::laplace: {
      std::exponential_distribution<double> expo(1.0);
      // Difference of two unit exponentials has variance 2.
      for (auto& v : out) v = (expo(rng) - expo(rng)) / std::numbers::sqrt2;
      break;
    }
    case NoiseFamily::skew_normal: {
      constexpr double shape = 10.0;
      const double delta = shape / std::sqrt(1.0 + shape * shape);
      const double mean = delta * std::sqrt(2.0 / std::numbers::pi);
      const double sd = std::sqrt(1.0 - 2.0 * delta * delta / std::numbers::pi);
      for (auto& v : out) {
        const double u0 = normal(rng);
        const double u1 = normal(rng);
        v = (delta * std::abs(u0) + std::sqrt(1.0 - delta * delta) * u1 - mean) / sd;
      }
      break;
    }
    case NoiseFamily::student_t: {
      constexpr double df = 20.0;
      std::student_t_distribution<double> t(df);
      const double scale = std::sqrt(df / (df - 2.0));
      for (auto& v : out) v = t(rng) / scale;
      break;
    }
    case NoiseFamily::gaussian_correlated: {
      Eigen::VectorXd g(static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = normal(rng);
      Eigen::Map<Eigen::VectorXd>(out.data(), g.size()) = lower_ * g;
      break;
    }
  }
  return out;
}

ImageVector generate_null_image(std::size_t n, NoiseFamily family, std::mt19937_64& rng, double rho) {
  const std::size_t side = square_side(n);
  return {NoiseSampler(side, side, family, rho).sample(rng), side, side};
}

std::vector<std::size_t> signal_object(std::size_t height, std::size_t width) {
  const std::size_t n = height * width;
  const auto side = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n / 4))));
  std::vector<std::size_t> object;
  const std::size_t y0 = (height - side) / 2;
  const std::size_t x0 = (width - side) / 2;
  for (std::size_t y = y0; y < y0 + side; ++y)
    for (std::size_t x = x0; x < x0 + side; ++x) object.push_back(y * width + x);
  return object;
}

std::pair<ImageVector, std::vector<std::size_t>> generate_signal_image(std::size_t n, double delta_mu,
                                                                       std::mt19937_64& rng) {
  if (delta_mu < 0.0) throw ArgumentError("delta_mu must be non-negative");
  const std::size_t side = square_side(n);
  std::vector<double> values = NoiseSampler(side, side, NoiseFamily::gaussian).sample(rng);
  auto object = signal_object(side, side);
  for (std::size_t k : object) values[k] += delta_mu;
  return {ImageVector(std::move(values), side, side), std::move(object)};
}

NetworkSpec make_cnn4_network(std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(stats::derive_seed(seed, 0));
  Conv2DLayer conv1{3, 3, 1, 4, gaussian_weights(36, 1.0 / 3.0, rng), gaussian_weights(4, 0.1, rng)};
  Conv2DLayer conv2{3, 3, 4, 1, gaussian_weights(36, 1.0 / 6.0, rng), gaussian_weights(1, 0.1, rng)};
  std::vector<LayerSpec> layers{conv1,
                                ActivationLayer{PiecewiseLinearActivation::relu()},
                                MaxPool2x2Layer{},
                                UpsampleNearest2xLayer{},
                                conv2,
                                OutputSignLayer{0.0}};
  return NetworkSpec(std::move(layers), TensorShape{1, side, side});
}

NetworkSpec make_cnn4_segmenter(std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(stats::derive_seed(seed, 2));
  std::vector<double> k1 = gaussian_weights(36, kSegmenterJitter / 3.0, rng);
  for (auto& v : k1) v += 1.0 / 9.0;
  std::vector<double> b1(4, 0.0);
  std::vector<double> k2 = gaussian_weights(36, kSegmenterJitter / 6.0, rng);
  for (std::size_t c = 0; c < 4; ++c) k2[(1 * 3 + 1) * 4 + c] += 0.25;
  Conv2DLayer conv1{3, 3, 1, 4, std::move(k1), std::move(b1)};
  Conv2DLayer conv2{3, 3, 4, 1, std::move(k2), {-kSegmenterThreshold}};
  std::vector<LayerSpec> layers{conv1,
                                ActivationLayer{PiecewiseLinearActivation::relu()},
                                MaxPool2x2Layer{},
                                UpsampleNearest2xLayer{},
                                conv2,
                                OutputSignLayer{0.0}};
  return NetworkSpec(std::move(layers), TensorShape{1, side, side});
}

NetworkSpec make_dense_network(std::size_t in, std::size_t hidden, std::size_t out,
                               const PiecewiseLinearActivation& activation, std::uint64_t seed) {
  if (in % 2 != 0 || in != out) throw ArgumentError("dense segmentation net needs even in == out");
  std::mt19937_64 rng(stats::derive_seed(seed, 1));
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  DenseLayer d1{in, hidden, gaussian_weights(in * hidden, s1, rng), gaussian_weights(hidden, 0.1, rng)};
  DenseLayer d2{hidden, out, gaussian_weights(hidden * out, s2, rng), gaussian_weights(out, 0.1, rng)};
  std::vector<LayerSpec> layers{d1, ActivationLayer{activation}, d2, OutputSignLayer{0.0}};
  return NetworkSpec(std::move(layers), TensorShape{1, 2, in / 2});
}

PiecewiseLinearActivation activation_by_name(const std::string& name) {
  if (name == "relu") return PiecewiseLinearActivation::relu();
  for (const char* kind : {"sigmoid", "tanh"}) {
    const std::string prefix = std::string(kind) + "-";
    if (name.rfind(prefix, 0) == 0 && name.size() > prefix.size() + 3 &&
        name.compare(name.size() - 3, 3, "cut") == 0) {
      const int cuts = std::stoi(name.substr(prefix.size(), name.size() - prefix.size() - 3));
      return approximate_activation(parse_smooth_activation(kind), cuts);
    }
  }
  throw ArgumentError("unknown activation '" + name + "'");
}

NetworkSpec network_for(const ExperimentConfig& config, std::size_t n) {
  if (config.weights) {
    LoadOptions options;
    options.smooth_activation_cuts = config.weights_cuts;
    return load_network(*config.weights, options);
  }
  if (config.architecture == "cnn4") return make_cnn4_network(square_side(n), config.net_seed);
  if (config.architecture == "cnn4-segmenter") return make_cnn4_segmenter(square_side(n), config.net_seed);
  if (config.architecture == "dense")
    return make_dense_network(n, config.dense_hidden, n, activation_by_name(config.activation), config.net_seed);
  throw ArgumentError("unknown architecture '" + config.architecture + "'");
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  try {
    c.n = doc.value("n", c.n);
    c.trials = doc.value("trials", c.trials);
    c.delta_mu = doc.value("delta_mu", c.delta_mu);
    c.alpha = doc.value("alpha", c.alpha);
    if (doc.contains("family")) c.family = parse_noise_family(doc.at("family").get<std::string>());
    c.rho = doc.value("rho", c.rho);
    if (doc.contains("sigma_mode")) {
      const auto mode = doc.at("sigma_mode").get<std::string>();
      if (mode != "known" && mode != "estimated") throw FormatError("sigma_mode must be known|estimated");
      c.estimate_sigma = mode == "estimated";
    }
    c.reference_images = doc.value("reference_images", c.reference_images);
    c.seed = doc.value("seed", c.seed);
    c.permutations = doc.value("permutations", c.permutations);
    c.z_range_sigmas = doc.value("z_range_sigmas", c.z_range_sigmas);
    c.compute_oc = doc.value("compute_oc", c.compute_oc);
    c.architecture = doc.value("architecture", c.architecture);
    c.activation = doc.value("activation", c.activation);
    c.dense_hidden = doc.value("dense_hidden", c.dense_hidden);
    c.net_seed = doc.value("net_seed", c.net_seed);
    if (doc.contains("weights")) c.weights = doc.at("weights").get<std::string>();
    if (doc.contains("weights_cuts")) c.weights_cuts = doc.at("weights_cuts").get<int>();
    c.delta_grid = doc.value("delta_grid", c.delta_grid);
    c.n_grid = doc.value("n_grid", c.n_grid);
    c.alphas = doc.value("alphas", c.alphas);
    c.robustness_cases = doc.value("robustness_cases", c.robustness_cases);
    c.cut_grid = doc.value("cut_grid", c.cut_grid);
    c.oracle_nets = doc.value("oracle_nets", c.oracle_nets);
    c.oracle_images = doc.value("oracle_images", c.oracle_images);
    c.oracle_step_sigmas = doc.value("oracle_step_sigmas", c.oracle_step_sigmas);
    c.threads = doc.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw FormatError(std::string("experiment config: ") + e.what());
  }
  if (c.trials == 0) throw ArgumentError("trials must be >= 1");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  if (c.delta_mu < 0.0) throw ArgumentError("delta_mu must be >= 0");
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j{{"n", c.n},
         {"trials", c.trials},
         {"delta_mu", c.delta_mu},
         {"alpha", c.alpha},
         {"family", to_string(c.family)},
         {"rho", c.rho},
         {"sigma_mode", c.estimate_sigma ? "estimated" : "known"},
         {"reference_images", c.reference_images},
         {"seed", c.seed},
         {"permutations", c.permutations},
         {"z_range_sigmas", c.z_range_sigmas},
         {"compute_oc", c.compute_oc},
         {"architecture", c.architecture},
         {"activation", c.activation},
         {"dense_hidden", c.dense_hidden},
         {"net_seed", c.net_seed},
         {"delta_grid", c.delta_grid},
         {"n_grid", c.n_grid},
         {"alphas", c.alphas},
         {"robustness_cases", c.robustness_cases},
         {"cut_grid", c.cut_grid},
         {"oracle_nets", c.oracle_nets},
         {"oracle_images", c.oracle_images},
         {"oracle_step_sigmas", c.oracle_step_sigmas}};
  if (c.weights) j["weights"] = c.weights->string();
  if (c.weights_cuts) j["weights_cuts"] = *c.weights_cuts;
  return j;
}

RateSummary rejection_rate(const std::vector<TrialRecord>& trials, double alpha,
                           std::optional<double> TrialRecord::*which) {
  RateSummary r;
  for (const auto& t : trials) {
    if (!t.detected || !(t.*which)) continue;
    ++r.detected;
    if (*(t.*which) < alpha) ++r.rejected;
  }
  if (r.detected) {
    r.rate = static_cast<double>(r.rejected) / static_cast<double>(r.detected);
    r.standard_error = std::sqrt(r.rate * (1.0 - r.rate) / static_cast<double>(r.detected));
  }
  return r;
}

ExperimentReport run_fpr_experiment(const ExperimentConfig& config) {
  if (config.delta_mu != 0.0) throw ArgumentError("FPR experiment requires delta_mu = 0");
  ExperimentConfig c = config;
  c.alphas = with_alpha(c.alphas, c.alpha);
  GroupSpec spec{"n=" + std::to_string(c.n), c.n, 0.0, c.family, c.estimate_sigma, c.activation,
                 stats::derive_seed(c.seed, 0)};
  return run_groups(c, "fpr", {spec});
}

ExperimentReport run_power_experiment(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.alphas = with_alpha(c.alphas, c.alpha);
  std::vector<GroupSpec> specs;
  for (std::size_t g = 0; g < c.delta_grid.size(); ++g) {
    if (!(c.delta_grid[g] > 0.0)) throw ArgumentError("power experiment needs delta_mu > 0");
    specs.push_back({"delta_mu=" + json(c.delta_grid[g]).dump(), c.n, c.delta_grid[g], c.family,
                     c.estimate_sigma, c.activation, stats::derive_seed(c.seed, 100 + g)});
  }
  return run_groups(c, "power", specs);
}

ExperimentReport run_breakpoint_experiment(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.alphas = with_alpha(c.alphas, c.alpha);
  std::vector<GroupSpec> specs;
  for (std::size_t g = 0; g < c.n_grid.size(); ++g)
    specs.push_back({"n=" + std::to_string(c.n_grid[g]), c.n_grid[g], c.delta_mu, c.family, c.estimate_sigma,
                     c.activation, stats::derive_seed(c.seed, 200 + g)});
  ExperimentReport report = run_groups(c, "breakpoints", specs);
  report.kind = "breakpoints";
  std::vector<double> lx;
  std::vector<double> ly;
  for (const auto& g : report.groups) {
    if (g.mean_region_count > 0.0) {
      lx.push_back(std::log(static_cast<double>(g.n)));
      ly.push_back(std::log(g.mean_region_count));
    }
  }
  if (lx.size() >= 2) {
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(lx.size());
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(ly.size());
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    report.loglog_slope = sxy / sxx;
  }
  return report;
}

ExperimentReport run_pivot_experiment(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.alphas = with_alpha(c.alphas, c.alpha);
  GroupSpec spec{"n=" + std::to_string(c.n) + " activation=" + c.activation, c.n, 0.0, c.family,
                 c.estimate_sigma, c.activation, stats::derive_seed(c.seed, 300)};
  ExperimentReport report = run_groups(c, "pivot", {spec});
  std::vector<double> p;
  for (const auto& t : report.trials)
    if (t.detected && t.p_selective) p.push_back(*t.p_selective);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i)
    report.qq.emplace_back((static_cast<double>(i) + 0.5) / static_cast<double>(p.size()), p[i]);
  return report;
}

ExperimentReport run_robustness_experiment(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.alphas = with_alpha(c.alphas, c.alpha);
  std::vector<GroupSpec> specs;
  for (std::size_t g = 0; g < c.robustness_cases.size(); ++g) {
    const std::string& name = c.robustness_cases[g];
    GroupSpec spec{name, c.n, 0.0, NoiseFamily::gaussian, c.estimate_sigma, c.activation,
                   stats::derive_seed(c.seed, 400 + g)};
    if (name == "estimated_sigma")
      spec.estimate_sigma = true;
    else
      spec.family = parse_noise_family(name);
    specs.push_back(spec);
  }
  return run_groups(c, "robustness", specs);
}

ExperimentReport run_cut_experiment(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.alphas = with_alpha(c.alphas, c.alpha);
  c.architecture = "dense";
  std::vector<GroupSpec> specs;
  for (const char* kind : {"sigmoid", "tanh"}) {
    for (int cuts : c.cut_grid) {
      const std::string act = std::string(kind) + "-" + std::to_string(cuts) + "cut";
      specs.push_back({act, c.n, 0.0, c.family, c.estimate_sigma, act,
                       stats::derive_seed(c.seed, 500 + specs.size())});
    }
  }
  return run_groups(c, "cuts", specs);
}

GridScan grid_scan_truncation(const NetworkSpec& net, const LineParametrization& line,
                              const SegmentationMask& mask_obs, double z_min, double z_max,
                              double step) {
  if (!(step > 0.0) || !(z_min < z_max)) throw ArgumentError("grid scan needs step > 0 and z_min < z_max");
  const auto mask_at = [&](double z) {
    return forward(net, ImageVector(line.point(z), line.shape.height, line.shape.width));
  };
  GridScan scan;
  scan.region.flavor = TruncationFlavor::homotopy;
  const auto count = static_cast<std::size_t>(std::ceil((z_max - z_min) / step));
  for (std::size_t k = 0; k <= count; ++k) {
    scan.grid.push_back(std::min(z_min + static_cast<double>(k) * step, z_max));
    scan.masks.push_back(mask_at(scan.grid.back()));
  }
  // Boundary between two grid points with different membership.
  const auto refine = [&](double lo, double hi, bool lo_inside) {
    for (int it = 0; it < 100 && hi - lo > 1e-13 * std::max(1.0, std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if ((mask_at(mid) == mask_obs) == lo_inside)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  bool inside = scan.masks[0] == mask_obs;
  double start = z_min;
  for (std::size_t k = 1; k < scan.grid.size(); ++k) {
    const bool now = scan.masks[k] == mask_obs;
    if (now == inside) continue;
    const double boundary = refine(scan.grid[k - 1], scan.grid[k], inside);
    if (inside)
      scan.region.intervals.push_back({start, boundary});
    else
      start = boundary;
    inside = now;
  }
  if (inside) scan.region.intervals.push_back({start, z_max});
  return scan;
}

OracleComparison compare_with_grid(const RegionPath& path, const TruncationRegion& homotopy,
                                   const GridScan& scan) {
  OracleComparison cmp;
  for (std::size_t k = 0; k < scan.grid.size(); ++k) {
    const double z = scan.grid[k];
    auto it = std::upper_bound(path.breakpoints.begin(), path.breakpoints.end(), z);
    std::size_t r = it == path.breakpoints.begin() ? 0 : static_cast<std::size_t>(it - path.breakpoints.begin()) - 1;
    r = std::min(r, path.regions.size() - 1);
    const double tol = 1e-12 * std::max(1.0, std::abs(z));
    if (std::abs(z - path.regions[r].lo) < tol || std::abs(z - path.regions[r].hi) < tol) continue;
    if (!(path.regions[r].mask == scan.masks[k])) ++cmp.grid_disagreements;
  }
  if (homotopy.intervals.size() != scan.region.intervals.size()) {
    cmp.interval_count_match = false;
    cmp.max_endpoint_deviation = std::numeric_limits<double>::infinity();
    return cmp;
  }
  for (std::size_t i = 0; i < homotopy.intervals.size(); ++i) {
    cmp.max_endpoint_deviation =
        std::max({cmp.max_endpoint_deviation, std::abs(homotopy.intervals[i].lo - scan.region.intervals[i].lo),
                  std::abs(homotopy.intervals[i].hi - scan.region.intervals[i].hi)});
  }
  return cmp;
}

json OracleReport::to_json() const {
  return {{"cases", cases},
          {"skipped_no_detection", skipped_no_detection},
          {"grid_disagreements", grid_disagreements},
          {"interval_count_mismatches", interval_count_mismatches},
          {"max_endpoint_deviation_sigmas", max_endpoint_deviation_sigmas},
          {"passed", passed}};
}

OracleReport run_oracle_check(const ExperimentConfig& config) {
  if (config.n > 64) throw ArgumentError("oracle check is limited to n <= 64");
  const std::size_t nets = config.weights ? 1 : config.oracle_nets;
  OracleReport report;
  std::mutex mutex;
  PipelineOptions options;
  options.z_range_sigmas = config.z_range_sigmas;
  options.keep_path = true;
  parallel_for(nets * config.oracle_images, config.threads, [&](std::size_t job) {
    const std::size_t k = job / config.oracle_images;
    const std::size_t j = job % config.oracle_images;
    ExperimentConfig local = config;
    local.net_seed = stats::derive_seed(config.net_seed, 1000 + k);
    const NetworkSpec net = network_for(local, config.n);
    const TensorShape shape = input_shape_for(local, net, config.n);
    std::mt19937_64 rng(stats::derive_seed(stats::derive_seed(config.seed, 600 + k), j));
    const NoiseSampler sampler(shape.height, shape.width, config.family, config.rho);
    const ImageVector image(sampler.sample(rng), shape.height, shape.width);
    const NoiseModel noise = sampler.noise_model();
    const TestResult res = selective_p_pipeline(net, image, noise, options);
    if (!res.detected) {
      std::lock_guard lock(mutex);
      ++report.skipped_no_detection;
      return;
    }
    const LineParametrization line = line_parametrization(image, *build_test_direction(res.mask), noise);
    const GridScan scan = grid_scan_truncation(net, line, res.mask, res.z_min, res.z_max,
                                               config.oracle_step_sigmas * res.sigma_eta);
    const OracleComparison cmp = compare_with_grid(*res.path, res.truncation, scan);
    std::lock_guard lock(mutex);
    ++report.cases;
    report.grid_disagreements += cmp.grid_disagreements;
    report.interval_count_mismatches += cmp.interval_count_match ? 0 : 1;
    report.max_endpoint_deviation_sigmas =
        std::max(report.max_endpoint_deviation_sigmas, cmp.max_endpoint_deviation / res.sigma_eta);
  });
  report.passed = report.grid_disagreements == 0 && report.interval_count_mismatches == 0 &&
                  report.max_endpoint_deviation_sigmas <= 1e-6;
  return report;
}

json ExperimentReport::summary_json() const {
  json groups_json = json::array();
  for (const auto& g : groups) {
    json rates = json::array();
    for (std::size_t a = 0; a < g.alphas.size(); ++a) {
      rates.push_back({{"alpha", g.alphas[a]},
                       {"selective", rate_json(g.selective[a])},
                       {"naive", rate_json(g.naive[a])},
                       {"oc", rate_json(g.oc[a])},
                       {"permutation", rate_json(g.permutation[a])}});
    }
    groups_json.push_back({{"label", g.label},
                           {"n", g.n},
                           {"delta_mu", g.delta_mu},
                           {"family", g.family},
                           {"sigma_mode", g.estimated_sigma ? "estimated" : "known"},
                           {"activation", g.activation},
                           {"trials", g.trials},
                           {"detected", g.detected},
                           {"rates", std::move(rates)},
                           {"mean_truncation_length", g.mean_truncation_length},
                           {"mean_oc_length", g.mean_oc_length},
                           {"mean_region_count", g.mean_region_count},
                           {"ks_selective", g.ks_selective},
                           {"ks_selective_pvalue", g.ks_selective_pvalue},
                           {"ks_naive", g.ks_naive},
                           {"ks_naive_pvalue", g.ks_naive_pvalue}});
  }
  json doc{{"kind", kind}, {"config", config_to_json(config)}, {"groups", std::move(groups_json)}};
  if (loglog_slope) doc["loglog_slope"] = *loglog_slope;
  if (config.family == NoiseFamily::gaussian_correlated)
    doc["note"] = "correlated-noise nulls are a synthetic analog of spatially correlated real images";
  return doc;
}

void ExperimentReport::write(const std::filesystem::path& directory) const {
  std::filesystem::create_directories(directory);
  {
    std::ofstream out(directory / "trials.jsonl");
    if (!out) throw FormatError("cannot write " + (directory / "trials.jsonl").string());
    for (const auto& t : trials) {
      json rec{{"group", t.group},
               {"trial", t.index},
               {"detected", t.detected},
               {"p_naive", optional_json(t.p_naive)},
               {"p_selective", optional_json(t.p_selective)},
               {"p_oc", optional_json(t.p_oc)},
               {"p_permutation", optional_json(t.p_permutation)},
               {"z_obs", t.z_obs},
               {"sigma_eta", t.sigma_eta},
               {"truncation_length", t.truncation_length},
               {"truncation_intervals", t.truncation_intervals},
               {"oc_length", t.oc_length},
               {"region_count", t.region_count},
               {"wall_seconds", t.seconds}};
      out << rec.dump() << '\n';
    }
  }
  {
    std::ofstream out(directory / "summary.json");
    if (!out) throw FormatError("cannot write summary.json");
    out << summary_json().dump(2) << '\n';
  }
  if (!qq.empty()) {
    std::ofstream out(directory / "qq.csv");
    out << "uniform_quantile,selective_p\n";
    out.precision(17);
    for (const auto& [u, p] : qq) out << u << ',' << p << '\n';
  }
}

}  // namespace siseg::experiments
