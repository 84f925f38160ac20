#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "siseg/errors.hpp"
#include "siseg/image_io.hpp"
#include "test_support.hpp"

namespace siseg {
namespace {

ImageVector sample_image() {
  std::mt19937_64 rng(3);
  return ImageVector(testing::gaussian_vector(12, rng), 3, 4);
}

void expect_same(const ImageVector& a, const ImageVector& b) {
  ASSERT_EQ(a.height(), b.height());
  ASSERT_EQ(a.width(), b.width());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]) << i;
}

TEST(ImageIo, BinaryRoundTrip) {
  const auto dir = testing::scratch_dir("image_bin");
  const auto img = sample_image();
  write_image_binary(img, dir / "x.simg");
  expect_same(read_image(dir / "x.simg"), img);
}

TEST(ImageIo, CsvRoundTripIsExact) {
  const auto dir = testing::scratch_dir("image_csv");
  const auto img = sample_image();
  write_image_csv(img, dir / "x.csv");
  expect_same(read_image(dir / "x.csv"), img);
}

TEST(ImageIo, CsvByHand) {
  const auto dir = testing::scratch_dir("image_csv_hand");
  std::ofstream(dir / "x.csv") << "1, 2.5\n-3,4e-1\n";
  const auto img = read_image(dir / "x.csv");
  EXPECT_EQ(img.height(), 2u);
  EXPECT_EQ(img.width(), 2u);
  EXPECT_DOUBLE_EQ(img[1], 2.5);
  EXPECT_DOUBLE_EQ(img[3], 0.4);
}

TEST(ImageIo, RejectsBadFiles) {
  const auto dir = testing::scratch_dir("image_bad");
  std::ofstream(dir / "ragged.csv") << "1,2\n3\n";
  std::ofstream(dir / "junk.csv") << "1,abc\n";
  EXPECT_THROW(read_image(dir / "ragged.csv"), FormatError);
  EXPECT_THROW(read_image(dir / "junk.csv"), FormatError);
  EXPECT_THROW(read_image(dir / "missing.csv"), FormatError);

  write_image_binary(sample_image(), dir / "x.simg");
  {
    std::ofstream extra(dir / "x.simg", std::ios::app | std::ios::binary);
    extra << 'z';
  }
  EXPECT_THROW(read_image(dir / "x.simg"), FormatError);
}

}  // namespace
}  // namespace siseg
