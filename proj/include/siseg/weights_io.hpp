#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "siseg/network.hpp"

namespace siseg {

inline constexpr const char* kWeightsFormat = "si-seg-weights/1";

struct LoadOptions {
  /// Substitute sigmoid/tanh hidden activations by their piecewise-linear
  /// approximation with this many pieces. Without it such layers are rejected.
  std::optional<int> smooth_activation_cuts;
};

/// Reads a "si-seg-weights/1" JSON manifest and its little-endian float64
/// blobs (paths relative to the manifest directory).
NetworkSpec load_network(const std::filesystem::path& manifest, const LoadOptions& options = {});

/// Writes `net` as a manifest plus one blob per parameter tensor into
/// `directory`. Returns the manifest path.
std::filesystem::path save_network(const NetworkSpec& net, const std::filesystem::path& directory,
                                   const std::string& manifest_name = "manifest.json");

}  // namespace siseg
