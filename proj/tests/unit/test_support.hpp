#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "siseg/network.hpp"

namespace siseg::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  const char* root = std::getenv("SISEG_TEST_TMP");
  auto dir = (root ? std::filesystem::path(root) : std::filesystem::temp_directory_path() / "siseg_tests") / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double> gaussian_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

/// Dense identity over n inputs followed by the sign output.
inline NetworkSpec identity_network(std::size_t height, std::size_t width) {
  const std::size_t n = height * width;
  DenseLayer d{n, n, std::vector<double>(n * n, 0.0), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) d.weight[i * n + i] = 1.0;
  return NetworkSpec({d, OutputSignLayer{0.0}}, TensorShape{1, height, width});
}

}  // namespace siseg::testing
