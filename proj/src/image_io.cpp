#include "siseg/image_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "siseg/errors.hpp"

namespace siseg {

namespace {

constexpr std::array<char, 6> kMagic{'S', 'I', 'I', 'M', 'G', '1'};

static_assert(std::endian::native == std::endian::little, "binary image I/O assumes little-endian");

std::uint32_t read_u32(const std::string& bytes, std::size_t offset) {
  std::uint32_t v = 0;
  std::memcpy(&v, bytes.data() + offset, sizeof v);
  return v;
}

ImageVector parse_binary(const std::string& bytes, const std::filesystem::path& path) {
  constexpr std::size_t header = kMagic.size() + 8;
  if (bytes.size() < header) throw FormatError(path.string() + ": truncated header");
  const std::size_t h = read_u32(bytes, kMagic.size());
  const std::size_t w = read_u32(bytes, kMagic.size() + 4);
  if (bytes.size() != header + h * w * sizeof(double))
    throw FormatError(path.string() + ": expected " + std::to_string(h * w) + " float64 values");
  std::vector<double> values(h * w);
  std::memcpy(values.data(), bytes.data() + header, values.size() * sizeof(double));
  try {
    return ImageVector(std::move(values), h, w);
  } catch (const Error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ImageVector parse_csv(const std::string& text, const std::filesystem::path& path) {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t width = 0;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t count = 0;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      const auto first = cell.find_first_not_of(" \t");
      const auto last = cell.find_last_not_of(" \t");
      if (first == std::string::npos) throw FormatError(path.string() + ": empty CSV cell");
      const char* begin = cell.data() + first;
      const char* end = cell.data() + last + 1;
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || ptr != end)
        throw FormatError(path.string() + ": cannot parse '" + cell + "' on row " + std::to_string(rows + 1));
      values.push_back(v);
      ++count;
    }
    if (rows == 0) width = count;
    if (count != width) throw FormatError(path.string() + ": ragged CSV row " + std::to_string(rows + 1));
    ++rows;
  }
  if (rows == 0) throw FormatError(path.string() + ": empty image");
  try {
    return ImageVector(std::move(values), rows, width);
  } catch (const Error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

ImageVector read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open image " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() >= kMagic.size() && std::equal(kMagic.begin(), kMagic.end(), bytes.begin()))
    return parse_binary(bytes, path);
  return parse_csv(bytes, path);
}

void write_image_binary(const ImageVector& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write image " + path.string());
  const auto h = static_cast<std::uint32_t>(image.height());
  const auto w = static_cast<std::uint32_t>(image.width());
  out.write(kMagic.data(), kMagic.size());
  out.write(reinterpret_cast<const char*>(&h), sizeof h);
  out.write(reinterpret_cast<const char*>(&w), sizeof w);
  out.write(reinterpret_cast<const char*>(image.values().data()),
            static_cast<std::streamsize>(image.size() * sizeof(double)));
}

void write_image_csv(const ImageVector& image, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write image " + path.string());
  out.precision(17);
  for (std::size_t y = 0; y < image.height(); ++y) {
    for (std::size_t x = 0; x < image.width(); ++x) {
      if (x) out << ',';
      out << image[y * image.width() + x];
    }
    out << '\n';
  }
}

}  // namespace siseg
