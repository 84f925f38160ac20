#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace siseg {

/// Channel-major tensor shape (C, H, W).
struct TensorShape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const { return channels * height * width; }
  bool operator==(const TensorShape&) const = default;
  std::string to_string() const;
};

/// A single-channel image stored as a flat row-major vector.
class ImageVector {
 public:
  ImageVector() = default;
  ImageVector(std::vector<double> values, std::size_t height, std::size_t width);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return values_.size(); }
  TensorShape shape() const { return {1, height_, width_}; }

  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
};

/// Binary object/background labelling, one label per pixel.
///
/// Label 1 marks the object set O, label 0 the background set B.
class SegmentationMask {
 public:
  SegmentationMask() = default;
  explicit SegmentationMask(std::vector<std::uint8_t> labels);

  std::size_t size() const { return labels_.size(); }
  std::span<const std::uint8_t> labels() const { return labels_; }
  bool is_object(std::size_t i) const { return labels_[i] != 0; }

  std::size_t object_count() const;
  std::size_t background_count() const { return size() - object_count(); }

  std::vector<std::size_t> object_indices() const;
  std::vector<std::size_t> background_indices() const;

  /// Run-length encoding "<label>x<count>,..." used by the path dump.
  std::string run_length_encoding() const;

  bool operator==(const SegmentationMask&) const = default;

 private:
  std::vector<std::uint8_t> labels_;
};

}  // namespace siseg
