#include "siseg/image.hpp"

#include <algorithm>
#include <cmath>

#include "siseg/errors.hpp"

namespace siseg {

std::string TensorShape::to_string() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

ImageVector::ImageVector(std::vector<double> values, std::size_t height, std::size_t width)
    : values_(std::move(values)), height_(height), width_(width) {
  if (height == 0 || width == 0 || height * width != values_.size()) {
    throw ArgumentError("image shape " + std::to_string(height) + "x" + std::to_string(width) +
                        " does not match " + std::to_string(values_.size()) + " values");
  }
  if (values_.size() < 4) {
    throw ArgumentError("image needs at least 4 pixels");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw ArgumentError("image contains a non-finite value");
  }
}

SegmentationMask::SegmentationMask(std::vector<std::uint8_t> labels) : labels_(std::move(labels)) {
  for (auto& l : labels_) l = l ? 1 : 0;
}

std::size_t SegmentationMask::object_count() const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> SegmentationMask::object_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> SegmentationMask::background_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (!labels_[i]) out.push_back(i);
  return out;
}

std::string SegmentationMask::run_length_encoding() const {
  std::string out;
  std::size_t i = 0;
  while (i < labels_.size()) {
    std::size_t j = i;
    while (j < labels_.size() && labels_[j] == labels_[i]) ++j;
    if (!out.empty()) out += ',';
    out += std::to_string(labels_[i]) + "x" + std::to_string(j - i);
    i = j;
  }
  return out;
}

}  // namespace siseg
