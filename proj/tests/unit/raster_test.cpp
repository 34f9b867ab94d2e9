#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "fieldgraph/raster.hpp"
#include "test_support.hpp"

namespace fieldgraph {
namespace {

using testing::TempDir;
using testing::throws_code;

TEST(RasterImage, RejectsSmallOrMismatchedBuffers) {
  EXPECT_TRUE(throws_code([] { RasterImage(8, 8, std::vector<std::uint8_t>(8 * 8 * 3)); }, ErrorCode::ShapeError));
  EXPECT_TRUE(throws_code([] { RasterImage(16, 16, std::vector<std::uint8_t>(10)); }, ErrorCode::ShapeError));
  EXPECT_NO_THROW(RasterImage(16, 16, std::vector<std::uint8_t>(16 * 16 * 3)));
}

TEST(BinaryMask, RejectsNonBinaryValues) {
  EXPECT_THROW(BinaryMask(2, 1, {0, 2}), Error);
  const auto z = BinaryMask::zeros(3, 2);
  EXPECT_TRUE(std::all_of(z.data().begin(), z.data().end(), [](auto v) { return v == 0; }));
}

TEST(LoadImage, PngRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(1);
  const RasterImage img = testing::random_image(512, 512, rng);
  save_image_png(img, dir / "a.png");
  const RasterImage back = load_image(dir / "a.png");
  EXPECT_EQ(back.width(), 512);
  EXPECT_EQ(back.height(), 512);
  EXPECT_EQ(back, img);
}

TEST(LoadImage, TiffRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(2);
  const RasterImage img = testing::random_image(37, 21, rng);
  save_image_tiff(img, dir / "a.tif");
  EXPECT_EQ(load_image(dir / "a.tif"), img);
}

TEST(LoadImage, GrayscaleIsShapeError) {
  TempDir dir;
  std::vector<std::uint16_t> gray(32 * 32, 7);
  codec::write_png(dir / "g.png", 32, 32, 1, 8, gray);
  EXPECT_TRUE(throws_code([&] { load_image(dir / "g.png"); }, ErrorCode::ShapeError));
}

TEST(LoadImage, TinyImageIsShapeError) {
  TempDir dir;
  std::vector<std::uint16_t> rgb(8 * 8 * 3, 9);
  codec::write_png(dir / "t.png", 8, 8, 3, 8, rgb);
  EXPECT_TRUE(throws_code([&] { load_image(dir / "t.png"); }, ErrorCode::ShapeError));
}

TEST(LoadImage, MissingCorruptAndDeepFiles) {
  TempDir dir;
  EXPECT_TRUE(throws_code([&] { load_image(dir / "nope.png"); }, ErrorCode::FileNotFound));

  std::ofstream(dir / "junk.png") << "definitely not an image";
  EXPECT_TRUE(throws_code([&] { load_image(dir / "junk.png"); }, ErrorCode::DecodeError));

  // Valid signature, truncated body.
  std::mt19937_64 rng(3);
  save_image_png(testing::random_image(32, 32, rng), dir / "full.png");
  {
    std::ifstream in(dir / "full.png", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream(dir / "cut.png", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  }
  EXPECT_TRUE(throws_code([&] { load_image(dir / "cut.png"); }, ErrorCode::DecodeError));

  std::vector<std::uint16_t> deep(16 * 16 * 3, 40000);
  codec::write_png(dir / "deep.png", 16, 16, 3, 16, deep);
  EXPECT_TRUE(throws_code([&] { load_image(dir / "deep.png"); }, ErrorCode::DecodeError));
}

TEST(LoadMask, BinarizesNonzero) {
  TempDir dir;
  std::vector<std::uint16_t> v(20 * 16, 0);
  v[3] = 255;
  v[17] = 1;
  v[200] = 128;
  codec::write_png(dir / "m.png", 20, 16, 1, 8, v);
  const BinaryMask m = load_mask(dir / "m.png", 20, 16);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(m.data()[i], v[i] != 0 ? 1 : 0) << i;
}

TEST(LoadMask, AllZeroAndDimensionChecks) {
  TempDir dir;
  save_mask_png(BinaryMask::zeros(512, 512), dir / "z.png");
  const BinaryMask z = load_mask(dir / "z.png", 512, 512);
  EXPECT_EQ(std::count(z.data().begin(), z.data().end(), 1), 0);
  EXPECT_TRUE(throws_code([&] { load_mask(dir / "z.png", 256, 256); }, ErrorCode::DimensionMismatch));

  std::mt19937_64 rng(4);
  save_image_png(testing::random_image(16, 16, rng), dir / "rgb.png");
  EXPECT_TRUE(throws_code([&] { load_mask(dir / "rgb.png", 16, 16); }, ErrorCode::DecodeError));
}

TEST(LoadMask, SaveLoadIsIdentity) {
  TempDir dir;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::uniform_int_distribution<int> side(1, 70);
    const int w = side(rng), h = side(rng);
    const BinaryMask m = testing::random_mask(w, h, 0.3, rng);
    save_mask_png(m, dir / "m.png");
    EXPECT_EQ(load_mask(dir / "m.png", w, h), m);
  }
}

TEST(Lab, WhiteAndBlack) {
  const auto white = srgb_to_lab(255, 255, 255);
  EXPECT_NEAR(white[0], 100.0, 1e-6);
  EXPECT_LT(std::abs(white[1]), 0.5);
  EXPECT_LT(std::abs(white[2]), 0.5);
  const auto black = srgb_to_lab(0, 0, 0);
  EXPECT_EQ(black[0], 0.0);
  EXPECT_NEAR(black[1], 0.0, 1e-12);
  EXPECT_NEAR(black[2], 0.0, 1e-12);
}

// Reference values from an independent sRGB -> XYZ -> Lab evaluation (D65).
TEST(Lab, MatchesReferenceConversion) {
  const auto gray = srgb_to_lab(119, 119, 119);
  EXPECT_NEAR(gray[0], 50.034438792538225, 1e-6);
  EXPECT_LT(std::abs(gray[1]), 0.5);
  EXPECT_LT(std::abs(gray[2]), 0.5);

  const auto red = srgb_to_lab(255, 0, 0);
  EXPECT_NEAR(red[0], 53.2405879437449, 1e-3);
  EXPECT_NEAR(red[1], 80.0923082256922, 1e-3);
  EXPECT_NEAR(red[2], 67.2027510444287, 1e-3);

  const auto leaf = srgb_to_lab(70, 130, 50);
  EXPECT_NEAR(leaf[0], 48.880358353273905, 1e-3);
  EXPECT_NEAR(leaf[1], -35.37754847112684, 1e-3);
  EXPECT_NEAR(leaf[2], 36.567326775350594, 1e-3);
}

TEST(Lab, GrayPixelsAreNeutral) {
  for (int v = 0; v < 256; ++v) {
    const auto lab = srgb_to_lab(v, v, v);
    EXPECT_LT(std::abs(lab[1]), 0.5) << v;
    EXPECT_LT(std::abs(lab[2]), 0.5) << v;
  }
}

TEST(Lab, ImageConversionIsDeterministicAndPerPixel) {
  std::mt19937_64 rng(6);
  const RasterImage img = testing::random_image(24, 17, rng);
  const LabImage a = rgb_to_lab(img), b = rgb_to_lab(img);
  EXPECT_EQ(a.data, b.data);
  ASSERT_EQ(a.width, 24);
  ASSERT_EQ(a.height, 17);
  for (std::size_t i = 0; i < img.pixel_count(); i += 37) {
    const auto px = img.pixel(i);
    EXPECT_EQ(a.pixel(i), srgb_to_lab(px[0], px[1], px[2]));
  }
}

TEST(MedianFilter, MatchesSortedWindowOracle) {
  std::mt19937_64 rng(7);
  const RasterImage img = testing::random_image(19, 23, rng);
  const RasterImage med = median_filter3x3(img);
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        std::vector<int> window;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = std::min(std::max(r + dr, 0), img.height() - 1);
            const int cc = std::min(std::max(c + dc, 0), img.width() - 1);
            window.push_back(img.at(rr, cc, ch));
          }
        }
        std::sort(window.begin(), window.end());
        ASSERT_EQ(med.at(r, c, ch), window[4]) << r << "," << c << "," << ch;
      }
    }
  }
}

}  // namespace
}  // namespace fieldgraph
