#include "siseg/network.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "siseg/errors.hpp"

namespace siseg {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string layer_label(std::size_t index, const LayerSpec& layer) {
  return "layer " + std::to_string(index) + " (" + layer_kind(layer) + ")";
}

void check_finite(std::span<const double> values, const std::string& what) {
  for (double v : values)
    if (!std::isfinite(v)) throw ValidationError(what + ": non-finite parameter");
}

void dense_apply(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out,
                 bool with_bias) {
  out.assign(layer.out_features, 0.0);
  for (std::size_t o = 0; o < layer.out_features; ++o) {
    const double* row = layer.weight.data() + o * layer.in_features;
    double acc = with_bias ? layer.bias[o] : 0.0;
    for (std::size_t i = 0; i < layer.in_features; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

void conv_apply(const Conv2DLayer& layer, const TensorShape& shape, std::span<const double> in,
                std::vector<double>& out, bool with_bias) {
  const std::size_t h = shape.height;
  const std::size_t w = shape.width;
  const std::size_t plane = h * w;
  const auto pad_y = static_cast<std::ptrdiff_t>(layer.filter_height / 2);
  const auto pad_x = static_cast<std::ptrdiff_t>(layer.filter_width / 2);
  out.assign(layer.out_channels * plane, 0.0);
  for (std::size_t o = 0; o < layer.out_channels; ++o) {
    double* dst = out.data() + o * plane;
    if (with_bias) std::fill(dst, dst + plane, layer.bias[o]);
    for (std::size_t c = 0; c < layer.in_channels; ++c) {
      const double* src = in.data() + c * plane;
      for (std::size_t ky = 0; ky < layer.filter_height; ++ky) {
        for (std::size_t kx = 0; kx < layer.filter_width; ++kx) {
          const double wgt =
              layer.kernel[((ky * layer.filter_width + kx) * layer.in_channels + c) *
                               layer.out_channels +
                           o];
          if (wgt == 0.0) continue;
          const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad_y;
          const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad_x;
          const std::ptrdiff_t y0 = std::max<std::ptrdiff_t>(0, -dy);
          const std::ptrdiff_t y1 = std::min<std::ptrdiff_t>(h, static_cast<std::ptrdiff_t>(h) - dy);
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(w, static_cast<std::ptrdiff_t>(w) - dx);
          for (std::ptrdiff_t y = y0; y < y1; ++y) {
            double* drow = dst + y * static_cast<std::ptrdiff_t>(w);
            const double* srow = src + (y + dy) * static_cast<std::ptrdiff_t>(w) + dx;
            for (std::ptrdiff_t x = x0; x < x1; ++x) drow[x] += wgt * srow[x];
          }
        }
      }
    }
  }
}

void upsample_apply(const TensorShape& shape, std::span<const double> in, std::vector<double>& out) {
  const std::size_t h = shape.height;
  const std::size_t w = shape.width;
  out.resize(shape.channels * 4 * h * w);
  for (std::size_t c = 0; c < shape.channels; ++c) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t x = 0; x < 2 * w; ++x) {
        out[(c * 2 * h + y) * 2 * w + x] = in[(c * h + y / 2) * w + x / 2];
      }
    }
  }
}

// Row-major position (0..3) of the first maximum in a 2x2 window.
template <class Value>
std::uint32_t window_argmax(const Value& value, std::size_t base, std::size_t w) {
  const std::size_t offsets[4] = {0, 1, w, w + 1};
  std::uint32_t best = 0;
  double best_value = value(base);
  for (std::uint32_t k = 1; k < 4; ++k) {
    const double v = value(base + offsets[k]);
    if (v > best_value) {
      best = k;
      best_value = v;
    }
  }
  return best;
}

void require_finite_output(std::span<const double> values, std::size_t layer) {
  for (double v : values)
    if (!std::isfinite(v))
      throw NumericError("non-finite value after layer " + std::to_string(layer));
}

}  // namespace

std::string layer_kind(const LayerSpec& layer) {
  return std::visit(overloaded{
                        [](const DenseLayer&) { return std::string("dense"); },
                        [](const Conv2DLayer&) { return std::string("conv2d"); },
                        [](const MaxPool2x2Layer&) { return std::string("maxpool2x2"); },
                        [](const UpsampleNearest2xLayer&) { return std::string("upsample_nearest2x"); },
                        [](const ActivationLayer&) { return std::string("activation"); },
                        [](const OutputSignLayer&) { return std::string("output_sign"); },
                    },
                    layer);
}

NetworkSpec::NetworkSpec(std::vector<LayerSpec> layers, std::optional<TensorShape> input_shape)
    : layers_(std::move(layers)), input_shape_(input_shape) {
  if (layers_.empty()) throw ValidationError("network has no layers");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto label = layer_label(i, layers_[i]);
    std::visit(overloaded{
                   [&](const DenseLayer& d) {
                     if (d.in_features == 0 || d.out_features == 0)
                       throw ValidationError(label + ": empty dense layer");
                     if (d.weight.size() != d.in_features * d.out_features ||
                         d.bias.size() != d.out_features)
                       throw ValidationError(label + ": parameter count mismatch");
                     check_finite(d.weight, label);
                     check_finite(d.bias, label);
                   },
                   [&](const Conv2DLayer& c) {
                     if (c.filter_height % 2 == 0 || c.filter_width % 2 == 0)
                       throw ValidationError(label + ": same padding needs odd filter sizes");
                     if (c.in_channels == 0 || c.out_channels == 0)
                       throw ValidationError(label + ": zero channels");
                     if (c.kernel.size() !=
                             c.filter_height * c.filter_width * c.in_channels * c.out_channels ||
                         c.bias.size() != c.out_channels)
                       throw ValidationError(label + ": parameter count mismatch");
                     check_finite(c.kernel, label);
                     check_finite(c.bias, label);
                   },
                   [&](const OutputSignLayer& o) {
                     if (!std::isfinite(o.threshold))
                       throw ValidationError(label + ": non-finite threshold");
                     if (i + 1 != layers_.size())
                       throw ValidationError(label + ": output layer must be last");
                   },
                   [](const auto&) {},
               },
               layers_[i]);
  }
  if (!std::holds_alternative<OutputSignLayer>(layers_.back()))
    throw ValidationError("final layer must be output_sign, got " + layer_kind(layers_.back()));
  if (input_shape_) layer_shapes(*input_shape_);
}

std::vector<TensorShape> NetworkSpec::layer_shapes(const TensorShape& input) const {
  if (input_shape_ && !(*input_shape_ == input))
    throw ValidationError("input shape " + input.to_string() + " does not match network input " +
                          input_shape_->to_string());
  std::vector<TensorShape> shapes;
  shapes.reserve(layers_.size());
  TensorShape cur = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto label = [&] { return layer_label(i, layers_[i]); };
    cur = std::visit(
        overloaded{
            [&](const DenseLayer& d) {
              if (cur.size() != d.in_features)
                throw ValidationError(label() + ": expects " + std::to_string(d.in_features) +
                                      " inputs, previous layer yields " + cur.to_string());
              return TensorShape{d.out_features, 1, 1};
            },
            [&](const Conv2DLayer& c) {
              if (cur.channels != c.in_channels)
                throw ValidationError(label() + ": expects " + std::to_string(c.in_channels) +
                                      " input channels, previous layer yields " + cur.to_string());
              return TensorShape{c.out_channels, cur.height, cur.width};
            },
            [&](const MaxPool2x2Layer&) {
              if (cur.height % 2 != 0 || cur.width % 2 != 0)
                throw ValidationError(label() + ": needs even spatial size, got " + cur.to_string());
              return TensorShape{cur.channels, cur.height / 2, cur.width / 2};
            },
            [&](const UpsampleNearest2xLayer&) {
              return TensorShape{cur.channels, cur.height * 2, cur.width * 2};
            },
            [&](const ActivationLayer&) { return cur; },
            [&](const OutputSignLayer&) {
              if (cur.size() != input.size())
                throw ValidationError(label() + ": produces " + std::to_string(cur.size()) +
                                      " labels for " + std::to_string(input.size()) + " pixels");
              return cur;
            },
        },
        layers_[i]);
    shapes.push_back(cur);
  }
  return shapes;
}

namespace {

std::vector<std::vector<double>> run_plain(const NetworkSpec& net, std::span<const double> x,
                                           const TensorShape& input, bool keep_all) {
  if (x.size() != input.size())
    throw ArgumentError("input has " + std::to_string(x.size()) + " values, shape " +
                        input.to_string());
  const auto shapes = net.layer_shapes(input);
  std::vector<std::vector<double>> trace;
  trace.reserve(net.layers().size());
  std::vector<double> cur(x.begin(), x.end());
  TensorShape shape = input;
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    std::vector<double> next;
    std::visit(overloaded{
                   [&](const DenseLayer& d) { dense_apply(d, cur, next, true); },
                   [&](const Conv2DLayer& c) { conv_apply(c, shape, cur, next, true); },
                   [&](const MaxPool2x2Layer&) {
                     const TensorShape& os = shapes[li];
                     next.resize(os.size());
                     const auto value = [&](std::size_t k) { return cur[k]; };
                     for (std::size_t c = 0; c < os.channels; ++c)
                       for (std::size_t y = 0; y < os.height; ++y)
                         for (std::size_t xx = 0; xx < os.width; ++xx) {
                           const std::size_t base = (c * shape.height + 2 * y) * shape.width + 2 * xx;
                           const std::uint32_t k = window_argmax(value, base, shape.width);
                           const std::size_t src = base + (k / 2) * shape.width + (k % 2);
                           next[(c * os.height + y) * os.width + xx] = cur[src];
                         }
                   },
                   [&](const UpsampleNearest2xLayer&) { upsample_apply(shape, cur, next); },
                   [&](const ActivationLayer& a) {
                     next.resize(cur.size());
                     for (std::size_t k = 0; k < cur.size(); ++k) next[k] = a.function.evaluate(cur[k]);
                   },
                   [&](const OutputSignLayer&) { next = cur; },
               },
               net.layers()[li]);
    require_finite_output(next, li);
    if (keep_all) trace.push_back(next);
    cur = std::move(next);
    shape = shapes[li];
  }
  if (!keep_all) trace.push_back(std::move(cur));
  return trace;
}

}  // namespace

std::vector<std::vector<double>> forward_trace(const NetworkSpec& net, std::span<const double> x,
                                               const TensorShape& input) {
  return run_plain(net, x, input, true);
}

std::vector<double> output_preactivation(const NetworkSpec& net, std::span<const double> x,
                                         const TensorShape& input) {
  auto trace = run_plain(net, x, input, false);
  return std::move(trace.back());
}

SegmentationMask forward(const NetworkSpec& net, const ImageVector& x) {
  const auto pre = output_preactivation(net, x.values(), x.shape());
  const double threshold = std::get<OutputSignLayer>(net.layers().back()).threshold;
  std::vector<std::uint8_t> labels(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) labels[i] = pre[i] >= threshold ? 1 : 0;
  return SegmentationMask(std::move(labels));
}

std::uint64_t hash_signature(std::span<const std::uint32_t> signature) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::uint32_t v : signature) {
    for (int byte = 0; byte < 4; ++byte) {
      h ^= (v >> (8 * byte)) & 0xFFu;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

LineEvaluation forward_line(const NetworkSpec& net, std::span<const double> a,
                            std::span<const double> b, double z, const TensorShape& input,
                            bool keep_trace) {
  if (a.size() != input.size() || b.size() != input.size())
    throw ArgumentError("line vectors do not match input shape " + input.to_string());
  const auto shapes = net.layer_shapes(input);

  LineEvaluation result;
  std::vector<double> alpha(a.begin(), a.end());
  std::vector<double> beta(b.begin(), b.end());
  std::vector<double> next_alpha;
  std::vector<double> next_beta;
  TensorShape shape = input;

  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    const auto layer_id = static_cast<std::uint32_t>(li);
    const TensorShape& out_shape = shapes[li];
    std::visit(
        overloaded{
            [&](const DenseLayer& d) {
              dense_apply(d, alpha, next_alpha, true);
              dense_apply(d, beta, next_beta, false);
            },
            [&](const Conv2DLayer& c) {
              conv_apply(c, shape, alpha, next_alpha, true);
              conv_apply(c, shape, beta, next_beta, false);
            },
            [&](const UpsampleNearest2xLayer&) {
              upsample_apply(shape, alpha, next_alpha);
              upsample_apply(shape, beta, next_beta);
            },
            [&](const ActivationLayer& act) {
              const auto& f = act.function;
              const auto& knots = f.knots();
              next_alpha.resize(alpha.size());
              next_beta.resize(beta.size());
              for (std::size_t k = 0; k < alpha.size(); ++k) {
                const double u = alpha[k] + beta[k] * z;
                const std::uint32_t piece = f.piece_of(u);
                const UnitId id{layer_id, static_cast<std::uint32_t>(k)};
                // u >= lower knot  <=>  (knot - alpha) - beta z <= 0
                if (piece > 0)
                  result.constraints.push_back({id, knots[piece - 1] - alpha[k], -beta[k], piece});
                // u <= upper knot  <=>  (alpha - knot) + beta z <= 0
                if (piece < knots.size())
                  result.constraints.push_back({id, alpha[k] - knots[piece], beta[k], piece});
                result.signature.push_back(piece);
                next_alpha[k] = f.slopes()[piece] * alpha[k] + f.intercepts()[piece];
                next_beta[k] = f.slopes()[piece] * beta[k];
              }
            },
            [&](const MaxPool2x2Layer&) {
              next_alpha.resize(out_shape.size());
              next_beta.resize(out_shape.size());
              const std::size_t w = shape.width;
              const std::size_t offsets[4] = {0, 1, w, w + 1};
              const auto value = [&](std::size_t k) { return alpha[k] + beta[k] * z; };
              for (std::size_t c = 0; c < out_shape.channels; ++c)
                for (std::size_t y = 0; y < out_shape.height; ++y)
                  for (std::size_t x = 0; x < out_shape.width; ++x) {
                    const std::size_t base = (c * shape.height + 2 * y) * w + 2 * x;
                    const std::uint32_t winner = window_argmax(value, base, w);
                    const std::size_t ws = base + offsets[winner];
                    const std::size_t out_index = (c * out_shape.height + y) * out_shape.width + x;
                    const UnitId id{layer_id, static_cast<std::uint32_t>(out_index)};
                    for (std::uint32_t k = 0; k < 4; ++k) {
                      if (k == winner) continue;
                      const std::size_t s = base + offsets[k];
                      // u_k - u_winner <= 0
                      result.constraints.push_back(
                          {id, alpha[s] - alpha[ws], beta[s] - beta[ws], winner});
                    }
                    result.signature.push_back(winner);
                    next_alpha[out_index] = alpha[ws];
                    next_beta[out_index] = beta[ws];
                  }
            },
            [&](const OutputSignLayer& o) {
              next_alpha = alpha;
              next_beta = beta;
              std::vector<std::uint8_t> labels(alpha.size());
              for (std::size_t k = 0; k < alpha.size(); ++k) {
                const double centred = alpha[k] - o.threshold;
                const UnitId id{layer_id, static_cast<std::uint32_t>(k)};
                if (centred + beta[k] * z >= 0.0) {
                  labels[k] = 1;
                  result.constraints.push_back({id, -centred, -beta[k], 1});
                } else {
                  labels[k] = 0;
                  result.constraints.push_back({id, centred, beta[k], 0});
                }
                result.signature.push_back(labels[k]);
              }
              result.mask = SegmentationMask(std::move(labels));
            },
        },
        net.layers()[li]);

    for (std::size_t k = 0; k < next_alpha.size(); ++k) {
      if (!std::isfinite(next_alpha[k]) || !std::isfinite(next_beta[k]))
        throw NumericError("non-finite affine form after layer " + std::to_string(li));
    }
    if (keep_trace) {
      result.layer_intercepts.push_back(next_alpha);
      result.layer_slopes.push_back(next_beta);
    }
    std::swap(alpha, next_alpha);
    std::swap(beta, next_beta);
    shape = out_shape;
  }
  result.signature_hash = hash_signature(result.signature);
  return result;
}

}  // namespace siseg
