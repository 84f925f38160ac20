#pragma once

#include <filesystem>

#include "siseg/image.hpp"

namespace siseg {

/// Reads either the binary layout ("SIIMG1", uint32 height, uint32 width,
/// then height*width little-endian float64 values) or a CSV file with one
/// image row per line.
ImageVector read_image(const std::filesystem::path& path);

void write_image_binary(const ImageVector& image, const std::filesystem::path& path);
void write_image_csv(const ImageVector& image, const std::filesystem::path& path);

}  // namespace siseg
