#include <gtest/gtest.h>

#include <fstream>
#include <json.hpp>

#include "siseg/errors.hpp"
#include "siseg/experiments.hpp"
#include "siseg/weights_io.hpp"
#include "test_support.hpp"

namespace siseg {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

void write_f64(const fs::path& file, const std::vector<double>& values) {
  std::ofstream out(file, std::ios::binary);
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 8));
}

void write_json(const fs::path& file, const json& doc) { std::ofstream(file) << doc.dump(2); }

json blob(const std::string& name, std::size_t count) { return {{"path", name}, {"count", count}}; }

// Hand-written manifest of the 4-layer CNN on an 8x8 input.
fs::path write_cnn_manifest(const fs::path& dir, std::size_t second_in_channels = 4) {
  write_f64(dir / "k1.f64", std::vector<double>(36, 0.1));
  write_f64(dir / "b1.f64", std::vector<double>(4, 0.0));
  write_f64(dir / "k2.f64", std::vector<double>(9 * second_in_channels, 0.05));
  write_f64(dir / "b2.f64", {-0.1});
  json doc{{"format", "si-seg-weights/1"},
           {"input", {{"channels", 1}, {"height", 8}, {"width", 8}}},
           {"layers",
            {{{"kind", "conv2d"},
              {"filter_height", 3},
              {"filter_width", 3},
              {"in_channels", 1},
              {"out_channels", 4},
              {"kernel", blob("k1.f64", 36)},
              {"bias", blob("b1.f64", 4)}},
             {{"kind", "activation"}, {"function", "relu"}},
             {{"kind", "maxpool2x2"}},
             {{"kind", "upsample_nearest2x"}},
             {{"kind", "conv2d"},
              {"filter_height", 3},
              {"filter_width", 3},
              {"in_channels", second_in_channels},
              {"out_channels", 1},
              {"kernel", blob("k2.f64", 9 * second_in_channels)},
              {"bias", blob("b2.f64", 1)}},
             {{"kind", "output_sign"}, {"threshold", 0.0}}}}};
  write_json(dir / "manifest.json", doc);
  return dir / "manifest.json";
}

TEST(WeightsIo, LoadsCnnManifest) {
  const auto dir = testing::scratch_dir("weights_cnn");
  const auto net = load_network(write_cnn_manifest(dir));
  ASSERT_EQ(net.layers().size(), 6u);
  const auto& conv = std::get<Conv2DLayer>(net.layers()[0]);
  EXPECT_EQ(conv.filter_height, 3u);
  EXPECT_EQ(conv.filter_width, 3u);
  EXPECT_EQ(conv.in_channels, 1u);
  EXPECT_EQ(conv.out_channels, 4u);
  EXPECT_EQ(conv.kernel.size(), 36u);
  EXPECT_EQ(net.input_shape(), (TensorShape{1, 8, 8}));
}

TEST(WeightsIo, ChannelMismatchNamesLayer) {
  const auto dir = testing::scratch_dir("weights_mismatch");
  try {
    load_network(write_cnn_manifest(dir, 2));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 4"), std::string::npos) << e.what();
  }
}

TEST(WeightsIo, IdentityDenseManifest) {
  const auto dir = testing::scratch_dir("weights_identity");
  write_f64(dir / "w.f64", {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  write_f64(dir / "b.f64", {0, 0, 0, 0});
  write_json(dir / "m.json", {{"format", "si-seg-weights/1"},
                              {"input", {{"height", 2}, {"width", 2}}},
                              {"layers",
                               {{{"kind", "dense"},
                                 {"in_features", 4},
                                 {"out_features", 4},
                                 {"weight", blob("w.f64", 16)},
                                 {"bias", blob("b.f64", 4)}},
                                {{"kind", "output_sign"}}}}});
  const auto net = load_network(dir / "m.json");
  const auto pre = output_preactivation(net, std::vector<double>{1.5, -2.0, 0.25, 7.0}, {1, 2, 2});
  EXPECT_EQ(pre, (std::vector<double>{1.5, -2.0, 0.25, 7.0}));
}

TEST(WeightsIo, CountAndSizeErrors) {
  const auto dir = testing::scratch_dir("weights_counts");
  write_f64(dir / "w.f64", std::vector<double>(16, 0.0));
  write_f64(dir / "b.f64", std::vector<double>(4, 0.0));
  write_f64(dir / "short.f64", std::vector<double>(3, 0.0));
  const auto manifest = [&](json weight, json bias) {
    return json{{"format", "si-seg-weights/1"},
                {"layers",
                 {{{"kind", "dense"}, {"in_features", 4}, {"out_features", 4}, {"weight", weight}, {"bias", bias}},
                  {{"kind", "output_sign"}}}}};
  };
  write_json(dir / "bad_count.json", manifest(blob("w.f64", 15), blob("b.f64", 4)));
  EXPECT_THROW(load_network(dir / "bad_count.json"), ValidationError);
  write_json(dir / "short_blob.json", manifest(blob("w.f64", 16), blob("short.f64", 4)));
  EXPECT_THROW(load_network(dir / "short_blob.json"), FormatError);
  write_json(dir / "long_blob.json", manifest(blob("w.f64", 16), {{"path", "w.f64"}, {"count", 4}}));
  EXPECT_THROW(load_network(dir / "long_blob.json"), FormatError);
  write_json(dir / "missing.json", manifest(blob("nope.f64", 16), blob("b.f64", 4)));
  EXPECT_THROW(load_network(dir / "missing.json"), FormatError);
}

TEST(WeightsIo, MalformedDocuments) {
  const auto dir = testing::scratch_dir("weights_malformed");
  std::ofstream(dir / "garbage.json") << "{ not json";
  EXPECT_THROW(load_network(dir / "garbage.json"), FormatError);
  write_json(dir / "version.json", {{"format", "si-seg-weights/2"}, {"layers", json::array()}});
  EXPECT_THROW(load_network(dir / "version.json"), FormatError);
  write_json(dir / "kind.json", {{"format", "si-seg-weights/1"}, {"layers", {{{"kind", "softmax"}}}}});
  EXPECT_THROW(load_network(dir / "kind.json"), FormatError);
  write_json(dir / "nolayers.json", {{"format", "si-seg-weights/1"}});
  EXPECT_THROW(load_network(dir / "nolayers.json"), FormatError);
  EXPECT_THROW(load_network(dir / "absent.json"), FormatError);
}

TEST(WeightsIo, SmoothActivationsNeedCuts) {
  const auto dir = testing::scratch_dir("weights_smooth");
  const auto net = experiments::make_dense_network(8, 16, 8, PiecewiseLinearActivation::relu(), 5);
  const auto path = save_network(net, dir);
  json doc = json::parse(std::ifstream(path));
  doc["layers"][1] = {{"kind", "activation"}, {"function", "tanh"}};
  write_json(path, doc);
  EXPECT_THROW(load_network(path), ValidationError);
  LoadOptions options;
  options.smooth_activation_cuts = 3;
  const auto loaded = load_network(path, options);
  const auto& act = std::get<ActivationLayer>(loaded.layers()[1]).function;
  EXPECT_EQ(act.name(), "tanh-3cut");
}

TEST(WeightsIo, SigmoidOutputUsesSignOfPreactivation) {
  const auto dir = testing::scratch_dir("weights_sigmoid_out");
  const auto path = save_network(testing::identity_network(2, 2), dir);
  json doc = json::parse(std::ifstream(path));
  doc["layers"][1] = {{"kind", "output_sigmoid"}};
  write_json(path, doc);
  const auto net = load_network(path);
  EXPECT_DOUBLE_EQ(std::get<OutputSignLayer>(net.layers().back()).threshold, 0.0);
}

TEST(WeightsIo, RoundTripPreservesEvaluation) {
  const auto dir = testing::scratch_dir("weights_roundtrip");
  const auto net = experiments::make_cnn4_network(8, 9);
  const auto loaded = load_network(save_network(net, dir));
  ASSERT_EQ(loaded.layers().size(), net.layers().size());
  std::mt19937_64 rng(4);
  const auto x = testing::gaussian_vector(64, rng);
  EXPECT_EQ(output_preactivation(net, x, {1, 8, 8}), output_preactivation(loaded, x, {1, 8, 8}));

  const auto dense = experiments::make_dense_network(8, 16, 8, approximate_activation(SmoothActivation::sigmoid, 5), 2);
  const auto dense_loaded = load_network(save_network(dense, testing::scratch_dir("weights_roundtrip_dense")));
  const auto y = testing::gaussian_vector(8, rng);
  EXPECT_EQ(output_preactivation(dense, y, {1, 2, 4}), output_preactivation(dense_loaded, y, {1, 2, 4}));
}

}  // namespace
}  // namespace siseg
