#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>

#include "siseg/errors.hpp"
#include "siseg/experiments.hpp"
#include "siseg/image_io.hpp"
#include "siseg/inference.hpp"
#include "siseg/weights_io.hpp"

namespace {

using nlohmann::json;
namespace ex = siseg::experiments;

json intervals_json(const siseg::TruncationRegion& region) {
  json out = json::array();
  for (const auto& iv : region.intervals) out.push_back({iv.lo, iv.hi});
  return out;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw siseg::FormatError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw siseg::FormatError(path + ": " + e.what());
  }
}

struct InferArgs {
  std::string weights;
  std::string image;
  std::optional<double> sigma;
  std::string estimate_from;
  double zrange = 20.0;
  bool oc = false;
  std::string dump_path;
  std::optional<int> cuts;
};

int run_infer(const InferArgs& args) {
  siseg::LoadOptions load;
  load.smooth_activation_cuts = args.cuts;
  const auto net = siseg::load_network(args.weights, load);
  const auto image = siseg::read_image(args.image);

  std::optional<siseg::NoiseModel> noise;
  if (args.sigma) noise = siseg::NoiseModel::isotropic(*args.sigma);
  else noise = siseg::estimate_variance(std::vector<siseg::ImageVector>{siseg::read_image(args.estimate_from)});

  siseg::PipelineOptions options;
  options.z_range_sigmas = args.zrange;
  options.compute_oc = args.oc;
  options.keep_path = !args.dump_path.empty();
  const auto res = siseg::selective_p_pipeline(net, image, *noise, options);

  json out{{"detected", res.detected},
           {"mask_rle", res.mask.run_length_encoding()},
           {"object_pixels", res.mask.object_count()},
           {"sigma", noise->sigma()}};
  if (res.detected) {
    out["z_obs"] = res.z_obs;
    out["sigma_eta"] = res.sigma_eta;
    out["z_range"] = {res.z_min, res.z_max};
    out["p_naive"] = *res.p_naive;
    out["p_selective"] = *res.p_selective;
    out["truncation"] = intervals_json(res.truncation);
    out["region_count"] = res.region_count;
    if (res.p_oc) {
      out["p_oc"] = *res.p_oc;
      out["oc_truncation"] = intervals_json(*res.oc_truncation);
    }
    if (res.path) {
      std::ofstream dump(args.dump_path);
      if (!dump) throw siseg::FormatError("cannot write " + args.dump_path);
      siseg::write_path_dump(*res.path, dump);
    }
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int run_experiment(const std::string& kind, const std::string& config_path, const std::string& out_dir) {
  const auto config = ex::config_from_json(read_json(config_path));
  ex::ExperimentReport report;
  if (kind == "fpr") report = ex::run_fpr_experiment(config);
  else if (kind == "power") report = ex::run_power_experiment(config);
  else if (kind == "breakpoints") report = ex::run_breakpoint_experiment(config);
  else if (kind == "pivot") report = ex::run_pivot_experiment(config);
  else if (kind == "robustness") report = ex::run_robustness_experiment(config);
  else if (kind == "cuts") report = ex::run_cut_experiment(config);
  else throw siseg::ArgumentError("unknown experiment '" + kind + "'");
  report.write(out_dir);
  std::cout << report.summary_json().dump(2) << '\n';
  return 0;
}

int run_oracle(const std::string& config_path) {
  const auto report = ex::run_oracle_check(ex::config_from_json(read_json(config_path)));
  std::cout << report.to_json().dump(2) << '\n';
  return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective p-values for segmentations produced by piecewise-linear networks"};
  app.require_subcommand(1);

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "Segment one image and report naive and selective p-values");
  infer_cmd->add_option("--weights", infer.weights, "si-seg-weights/1 manifest")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--image", infer.image, "SIIMG1 binary or CSV image")->required()->check(CLI::ExistingFile);
  auto* sigma_opt = infer_cmd->add_option("--sigma", infer.sigma, "Known noise standard deviation")
                        ->check(CLI::PositiveNumber);
  auto* est_opt = infer_cmd->add_option("--estimate-from", infer.estimate_from, "Null reference image for a plug-in sigma")
                      ->check(CLI::ExistingFile);
  sigma_opt->excludes(est_opt);
  infer_cmd->add_option("--zrange", infer.zrange, "Half-width of the line search range in sigma_eta units")
      ->check(CLI::PositiveNumber);
  infer_cmd->add_flag("--oc", infer.oc, "Also report the over-conditioned p-value");
  infer_cmd->add_option("--dump-path", infer.dump_path, "Write the region path as JSON lines");
  infer_cmd->add_option("--cuts", infer.cuts, "Pieces used to approximate sigmoid/tanh layers");

  std::string kind;
  std::string config_path;
  std::string out_dir;
  auto* exp_cmd = app.add_subcommand("experiment", "Run a synthetic study and write its reports");
  exp_cmd->add_option("kind", kind, "fpr|power|breakpoints|pivot|robustness|cuts")
      ->required()
      ->check(CLI::IsMember({"fpr", "power", "breakpoints", "pivot", "robustness", "cuts"}));
  exp_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  exp_cmd->add_option("--out", out_dir, "Output directory")->required();

  std::string oracle_config;
  auto* oracle_cmd = app.add_subcommand("oracle-check", "Compare the breakpoint sweep with a dense grid scan");
  oracle_cmd->add_option("--config", oracle_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*infer_cmd) {
      if (!infer.sigma && infer.estimate_from.empty()) {
        std::cerr << "infer: one of --sigma or --estimate-from is required\n";
        return 2;
      }
      return run_infer(infer);
    }
    if (*exp_cmd) return run_experiment(kind, config_path, out_dir);
    if (*oracle_cmd) return run_oracle(oracle_config);
  } catch (const siseg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
