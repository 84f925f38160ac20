#include "siseg/weights_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "siseg/errors.hpp"

namespace siseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double from_little_endian(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
  return std::bit_cast<double>(bits);
}

void to_little_endian(double value, unsigned char* bytes) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) {
    bytes[i] = static_cast<unsigned char>(bits & 0xFFu);
    bits >>= 8;
  }
}

std::vector<double> read_blob(const fs::path& base, const json& ref, std::size_t expected,
                              const std::string& what) {
  if (!ref.is_object() || !ref.contains("path") || !ref.contains("count"))
    throw FormatError(what + ": blob reference needs 'path' and 'count'");
  const auto count = ref.at("count").get<std::size_t>();
  if (count != expected)
    throw ValidationError(what + ": blob count " + std::to_string(count) + " but layer needs " +
                          std::to_string(expected));
  if (ref.contains("shape")) {
    std::size_t product = 1;
    for (const auto& d : ref.at("shape")) product *= d.get<std::size_t>();
    if (product != count) throw FormatError(what + ": shape does not match count");
  }
  const fs::path file = base / ref.at("path").get<std::string>();
  std::ifstream in(file, std::ios::binary);
  if (!in) throw FormatError(what + ": cannot open blob " + file.string());
  std::vector<unsigned char> raw(count * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size() || in.peek() != EOF)
    throw FormatError(what + ": blob " + file.string() + " does not hold exactly " +
                      std::to_string(count) + " float64 values");
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = from_little_endian(raw.data() + 8 * i);
  return values;
}

void write_blob(const fs::path& file, const std::vector<double>& values) {
  std::vector<unsigned char> raw(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) to_little_endian(values[i], raw.data() + 8 * i);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw FormatError("cannot write blob " + file.string());
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

PiecewiseLinearActivation parse_activation(const json& spec, const LoadOptions& options,
                                           const std::string& what) {
  const auto fn = spec.at("function").get<std::string>();
  if (fn == "relu") return PiecewiseLinearActivation::relu();
  if (fn == "identity") return PiecewiseLinearActivation::identity();
  if (fn == "leaky_relu") return PiecewiseLinearActivation::leaky_relu(spec.at("negative_slope").get<double>());
  if (fn == "pwl") {
    return {spec.at("knots").get<std::vector<double>>(), spec.at("slopes").get<std::vector<double>>(),
            spec.at("intercepts").get<std::vector<double>>(), spec.value("name", std::string("pwl"))};
  }
  if (fn == "sigmoid" || fn == "tanh") {
    if (!options.smooth_activation_cuts)
      throw ValidationError(what + ": '" + fn +
                            "' is not piecewise linear; load with an approximation cut count");
    return approximate_activation(parse_smooth_activation(fn), *options.smooth_activation_cuts);
  }
  throw FormatError(what + ": unknown activation function '" + fn + "'");
}

LayerSpec parse_layer(const json& spec, const fs::path& base, const LoadOptions& options,
                      std::size_t index) {
  const auto kind = spec.at("kind").get<std::string>();
  const std::string what = "layer " + std::to_string(index) + " (" + kind + ")";
  if (kind == "dense") {
    DenseLayer d;
    d.in_features = spec.at("in_features").get<std::size_t>();
    d.out_features = spec.at("out_features").get<std::size_t>();
    d.weight = read_blob(base, spec.at("weight"), d.in_features * d.out_features, what + " weight");
    d.bias = read_blob(base, spec.at("bias"), d.out_features, what + " bias");
    return d;
  }
  if (kind == "conv2d") {
    Conv2DLayer c;
    c.filter_height = spec.at("filter_height").get<std::size_t>();
    c.filter_width = spec.at("filter_width").get<std::size_t>();
    c.in_channels = spec.at("in_channels").get<std::size_t>();
    c.out_channels = spec.at("out_channels").get<std::size_t>();
    if (spec.value("padding", std::string("same")) != "same" || spec.value("stride", 1) != 1)
      throw FormatError(what + ": only stride-1 'same' convolutions are supported");
    c.kernel = read_blob(base, spec.at("kernel"),
                         c.filter_height * c.filter_width * c.in_channels * c.out_channels,
                         what + " kernel");
    c.bias = read_blob(base, spec.at("bias"), c.out_channels, what + " bias");
    return c;
  }
  if (kind == "maxpool2x2") return MaxPool2x2Layer{};
  if (kind == "upsample_nearest2x") return UpsampleNearest2xLayer{};
  if (kind == "activation") return ActivationLayer{parse_activation(spec, options, what)};
  if (kind == "output_sign") return OutputSignLayer{spec.value("threshold", 0.0)};
  if (kind == "output_sigmoid") {
    // sigmoid(u) >= p  <=>  u >= logit(p)
    const double p = spec.value("probability_threshold", 0.5);
    if (!(p > 0.0 && p < 1.0)) throw ValidationError(what + ": probability_threshold must lie in (0, 1)");
    return OutputSignLayer{std::log(p / (1.0 - p))};
  }
  throw FormatError(what + ": unknown layer kind");
}

json blob_ref(const std::string& name, const std::vector<double>& values, std::vector<std::size_t> shape) {
  return json{{"path", name}, {"count", values.size()}, {"shape", std::move(shape)}};
}

}  // namespace

NetworkSpec load_network(const fs::path& manifest, const LoadOptions& options) {
  std::ifstream in(manifest);
  if (!in) throw FormatError("cannot open manifest " + manifest.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("manifest " + manifest.string() + ": " + e.what());
  }
  try {
    if (doc.value("format", std::string()) != kWeightsFormat)
      throw FormatError("manifest " + manifest.string() + ": expected format '" + kWeightsFormat + "'");
    std::optional<TensorShape> input;
    if (doc.contains("input")) {
      const auto& s = doc.at("input");
      input = TensorShape{s.value("channels", std::size_t{1}), s.at("height").get<std::size_t>(),
                          s.at("width").get<std::size_t>()};
    }
    const fs::path base = manifest.parent_path();
    std::vector<LayerSpec> layers;
    const auto& list = doc.at("layers");
    if (!list.is_array()) throw FormatError("manifest: 'layers' must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) layers.push_back(parse_layer(list[i], base, options, i));
    return NetworkSpec(std::move(layers), input);
  } catch (const json::exception& e) {
    throw FormatError("manifest " + manifest.string() + ": " + e.what());
  }
}

fs::path save_network(const NetworkSpec& net, const fs::path& directory, const std::string& manifest_name) {
  fs::create_directories(directory);
  json layers = json::array();
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const std::string stem = "layer" + std::to_string(i);
    const auto& layer = net.layers()[i];
    json entry{{"kind", layer_kind(layer)}};
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      entry["in_features"] = d->in_features;
      entry["out_features"] = d->out_features;
      write_blob(directory / (stem + ".weight.f64"), d->weight);
      write_blob(directory / (stem + ".bias.f64"), d->bias);
      entry["weight"] = blob_ref(stem + ".weight.f64", d->weight, {d->out_features, d->in_features});
      entry["bias"] = blob_ref(stem + ".bias.f64", d->bias, {d->out_features});
    } else if (const auto* c = std::get_if<Conv2DLayer>(&layer)) {
      entry["filter_height"] = c->filter_height;
      entry["filter_width"] = c->filter_width;
      entry["in_channels"] = c->in_channels;
      entry["out_channels"] = c->out_channels;
      entry["padding"] = "same";
      entry["stride"] = 1;
      write_blob(directory / (stem + ".kernel.f64"), c->kernel);
      write_blob(directory / (stem + ".bias.f64"), c->bias);
      entry["kernel"] = blob_ref(stem + ".kernel.f64", c->kernel,
                                 {c->filter_height, c->filter_width, c->in_channels, c->out_channels});
      entry["bias"] = blob_ref(stem + ".bias.f64", c->bias, {c->out_channels});
    } else if (const auto* a = std::get_if<ActivationLayer>(&layer)) {
      const auto& f = a->function;
      if (f.name() == "relu") {
        entry["function"] = "relu";
      } else {
        entry["function"] = "pwl";
        entry["name"] = f.name();
        entry["knots"] = f.knots();
        entry["slopes"] = f.slopes();
        entry["intercepts"] = f.intercepts();
      }
    } else if (const auto* o = std::get_if<OutputSignLayer>(&layer)) {
      entry["threshold"] = o->threshold;
    }
    layers.push_back(std::move(entry));
  }
  json doc{{"format", kWeightsFormat}, {"layers", std::move(layers)}};
  if (net.input_shape()) {
    const auto& s = *net.input_shape();
    doc["input"] = {{"channels", s.channels}, {"height", s.height}, {"width", s.width}};
  }
  const fs::path path = directory / manifest_name;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest " + path.string());
  out << doc.dump(2) << '\n';
  return path;
}

}  // namespace siseg
