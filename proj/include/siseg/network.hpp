#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "siseg/activation.hpp"
#include "siseg/image.hpp"

namespace siseg {

/// Fully connected layer over the flattened (C, H, W) input; output shape is
/// (out_features, 1, 1). `weight` is row-major [out_features][in_features].
struct DenseLayer {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  std::vector<double> weight;
  std::vector<double> bias;
};

/// Stride-1 convolution with zero "same" padding. `kernel` is row-major
/// [filter_height][filter_width][in_channels][out_channels].
struct Conv2DLayer {
  std::size_t filter_height = 0;
  std::size_t filter_width = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<double> kernel;
  std::vector<double> bias;
};

struct MaxPool2x2Layer {};

struct UpsampleNearest2xLayer {};

struct ActivationLayer {
  PiecewiseLinearActivation function;
};

/// Final per-pixel labelling: label 1 iff pre-activation >= threshold. Stands
/// in for a sigmoid output compared against 0.5 (threshold 0).
struct OutputSignLayer {
  double threshold = 0.0;
};

using LayerSpec = std::variant<DenseLayer, Conv2DLayer, MaxPool2x2Layer, UpsampleNearest2xLayer,
                               ActivationLayer, OutputSignLayer>;

std::string layer_kind(const LayerSpec& layer);

/// Immutable, validated layer stack.
class NetworkSpec {
 public:
  NetworkSpec() = default;

  /// Checks parameter sizes and finiteness, that the last layer is an
  /// OutputSignLayer, and, when `input_shape` is given, full shape composition.
  explicit NetworkSpec(std::vector<LayerSpec> layers,
                       std::optional<TensorShape> input_shape = std::nullopt);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::optional<TensorShape>& input_shape() const { return input_shape_; }

  /// Output shape of every layer for `input`. Throws ValidationError naming
  /// the first layer that cannot accept its input, or when the final label
  /// count differs from the input pixel count.
  std::vector<TensorShape> layer_shapes(const TensorShape& input) const;

 private:
  std::vector<LayerSpec> layers_;
  std::optional<TensorShape> input_shape_;
};

struct UnitId {
  std::uint32_t layer = 0;
  std::uint32_t index = 0;
  bool operator==(const UnitId&) const = default;
};

/// One piece-selection inequality restricted to the line x(z) = a + b z:
///   intercept + slope * z <= 0.
struct AffineUnitConstraint {
  UnitId unit;
  double intercept = 0.0;
  double slope = 0.0;
  std::uint32_t piece = 0;

  double value_at(double z) const { return intercept + slope * z; }
};

/// Result of evaluating the network along a line at a single position.
struct LineEvaluation {
  SegmentationMask mask;
  std::vector<AffineUnitConstraint> constraints;
  /// Selected piece of every nonlinear unit (activation pieces, pooling
  /// winners, output labels) in layer order.
  std::vector<std::uint32_t> signature;
  std::uint64_t signature_hash = 0;
  /// Per-layer affine forms value(z) = intercept + slope * z; filled only
  /// when requested.
  std::vector<std::vector<double>> layer_intercepts;
  std::vector<std::vector<double>> layer_slopes;
};

/// Plain evaluation. Label 1 iff the final pre-activation is >= threshold.
SegmentationMask forward(const NetworkSpec& net, const ImageVector& x);

/// Plain evaluation returning every layer's output (the output layer entry
/// holds the pre-activation values).
std::vector<std::vector<double>> forward_trace(const NetworkSpec& net, std::span<const double> x,
                                               const TensorShape& input);

/// Pre-activation of the output layer for input `x`.
std::vector<double> output_preactivation(const NetworkSpec& net, std::span<const double> x,
                                         const TensorShape& input);

/// Affine propagation along x(z) = a + b z with the pieces selected at `z`.
LineEvaluation forward_line(const NetworkSpec& net, std::span<const double> a,
                            std::span<const double> b, double z, const TensorShape& input,
                            bool keep_trace = false);

std::uint64_t hash_signature(std::span<const std::uint32_t> signature);

}  // namespace siseg
