#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fieldgraph/features.hpp"
#include "test_support.hpp"

namespace fieldgraph {
namespace {

using testing::throws_code;

// A 16x16 image whose first pixels carry the given colors; the region covers exactly those pixels.
struct Fixture {
  RasterImage image;
  SuperpixelRegion region;
};

Fixture region_of(const std::vector<std::array<int, 3>>& colors) {
  std::vector<std::uint8_t> data(16 * 16 * 3, 77);
  SuperpixelRegion r;
  for (std::size_t i = 0; i < colors.size(); ++i) {
    for (int c = 0; c < 3; ++c) data[3 * i + c] = static_cast<std::uint8_t>(colors[i][c]);
    r.pixels.push_back({static_cast<int>(i / 16), static_cast<int>(i % 16)});
  }
  return {RasterImage(16, 16, std::move(data)), r};
}

JointHistogram histogram(std::vector<double> counts) {
  const int bins = static_cast<int>(std::lround(std::cbrt(static_cast<double>(counts.size()))));
  return {bins, std::move(counts), true};
}

TEST(NodeFeatures, AllZeroRegion) {
  const auto f = region_of({{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}});
  const NodeFeatures nf = node_features(f.region, f.image);
  for (double v : nf.flatten()) EXPECT_EQ(v, 0.0);
}

TEST(NodeFeatures, ConstantNonzeroChannel) {
  const auto f = region_of({{255, 0, 0}, {255, 0, 0}});
  const NodeFeatures nf = node_features(f.region, f.image);
  EXPECT_EQ(nf.mu, (std::array<double, 3>{1.0, 0.0, 0.0}));
  EXPECT_EQ(nf.sigma, (std::array<double, 3>{0.0, 0.0, 0.0}));
  EXPECT_EQ(nf.alpha, (std::array<double, 3>{1.0, 0.0, 0.0}));
}

TEST(NodeFeatures, AdjustedStatisticsSkipZeros) {
  const auto f = region_of({{0, 9, 9}, {100, 9, 9}, {150, 9, 9}, {250, 9, 9}});
  const NodeFeatures nf = node_features(f.region, f.image);
  // Hand arithmetic over {100, 150, 250}.
  const double mean = 500.0 / 3.0;
  const double var = ((100 - mean) * (100 - mean) + (150 - mean) * (150 - mean) + (250 - mean) * (250 - mean)) / 3.0;
  EXPECT_DOUBLE_EQ(nf.alpha[0], 0.75);
  EXPECT_NEAR(nf.mu[0], mean / 255.0, 1e-12);
  EXPECT_NEAR(nf.mu[0], 0.6536, 1e-4);
  EXPECT_NEAR(nf.sigma[0], std::sqrt(var) / 255.0, 1e-12);
  EXPECT_NEAR(nf.sigma[0], 0.2445, 1e-4);
  EXPECT_EQ(nf.alpha[1], 1.0);
}

TEST(NodeFeatures, FlattenOrder) {
  NodeFeatures nf{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  const auto v = nf.flatten();
  for (int i = 0; i < 9; ++i) EXPECT_EQ(v[i], i + 1);
}

TEST(NodeFeatures, OutOfBoundsRegion) {
  auto f = region_of({{1, 2, 3}});
  f.region.pixels.push_back({16, 0});
  EXPECT_TRUE(throws_code([&] { node_features(f.region, f.image); }, ErrorCode::OutOfBounds));
}

TEST(NodeFeatures, RandomRegionsStayInRange) {
  std::mt19937_64 rng(21);
  const RasterImage img = testing::random_image(32, 32, rng);
  std::uniform_int_distribution<int> coord(0, 31);
  for (int trial = 0; trial < 50; ++trial) {
    SuperpixelRegion r;
    for (int i = 0; i < 1 + trial; ++i) r.pixels.push_back({coord(rng), coord(rng)});
    const NodeFeatures nf = node_features(r, img);
    for (int c = 0; c < 3; ++c) {
      EXPECT_GE(nf.alpha[c], 0.0);
      EXPECT_LE(nf.alpha[c], 1.0);
      EXPECT_GE(nf.mu[c], 0.0);
      EXPECT_LE(nf.mu[c], 1.0);
      EXPECT_GE(nf.sigma[c], 0.0);
      EXPECT_LE(nf.sigma[c], 1.0);
      if (nf.alpha[c] == 0.0) {
        EXPECT_EQ(nf.mu[c], 0.0);
        EXPECT_EQ(nf.sigma[c], 0.0);
      }
    }
  }
}

// Halving every even non-zero value halves mu and sigma and leaves alpha alone.
TEST(NodeFeatures, ScalingNonzeroPixels) {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> half(0, 127);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::array<int, 3>> colors, scaled;
    for (int i = 0; i < 30; ++i) {
      std::array<int, 3> c{2 * half(rng), 2 * half(rng), 2 * half(rng)};
      colors.push_back(c);
      scaled.push_back({c[0] / 2, c[1] / 2, c[2] / 2});
    }
    const auto a = region_of(colors), b = region_of(scaled);
    const NodeFeatures fa = node_features(a.region, a.image), fb = node_features(b.region, b.image);
    for (int c = 0; c < 3; ++c) {
      EXPECT_NEAR(fb.mu[c], 0.5 * fa.mu[c], 1e-12);
      EXPECT_NEAR(fb.sigma[c], 0.5 * fa.sigma[c], 1e-12);
      EXPECT_EQ(fb.alpha[c], fa.alpha[c]);
    }
  }
}

TEST(JointHistogram, ConstantRegionFillsOneBin) {
  const auto f = region_of({{10, 200, 90}, {10, 200, 90}, {10, 200, 90}});
  const JointHistogram h = joint_histogram(f.region, f.image, 8);
  ASSERT_EQ(h.counts.size(), 512u);
  const int idx = (10 * 8 / 256 * 8 + 200 * 8 / 256) * 8 + 90 * 8 / 256;
  EXPECT_EQ(h.counts[idx], 1.0);
  EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), 0.0), 1.0);
}

TEST(JointHistogram, BlackAndWhiteWithTwoBins) {
  const auto f = region_of({{0, 0, 0}, {255, 255, 255}});
  const JointHistogram h = joint_histogram(f.region, f.image, 2);
  ASSERT_EQ(h.counts.size(), 8u);
  EXPECT_EQ(h.counts[0], 0.5);
  EXPECT_EQ(h.counts[7], 0.5);
}

TEST(JointHistogram, RandomPixelsSumToOne) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> byte(0, 255);
  std::vector<std::array<int, 3>> colors(100);
  for (auto& c : colors) c = {byte(rng), byte(rng), byte(rng)};
  const auto f = region_of(colors);
  const JointHistogram h = joint_histogram(f.region, f.image, 4);
  EXPECT_TRUE(h.normalized);
  EXPECT_NEAR(std::accumulate(h.counts.begin(), h.counts.end(), 0.0), 1.0, 1e-12);
  // Bin index oracle.
  std::vector<double> expect(64, 0.0);
  for (const auto& c : colors) expect[(c[0] * 4 / 256 * 4 + c[1] * 4 / 256) * 4 + c[2] * 4 / 256] += 0.01;
  for (int i = 0; i < 64; ++i) EXPECT_NEAR(h.counts[i], expect[i], 1e-12);
}

TEST(JointHistogram, RejectsSingleBin) {
  const auto f = region_of({{1, 1, 1}});
  EXPECT_TRUE(throws_code([&] { joint_histogram(f.region, f.image, 1); }, ErrorCode::InvalidConfig));
}

TEST(Bhattacharyya, IdenticalDisjointAndMixed) {
  const auto a = histogram({0.5, 0.5, 0, 0, 0, 0, 0, 0});
  const auto b = histogram({0.25, 0.25, 0.25, 0.25, 0, 0, 0, 0});
  const auto c = histogram({0, 0, 0, 0, 0.5, 0.5, 0, 0});
  EXPECT_NEAR(bhattacharyya(a, a), 1.0, 1e-15);
  EXPECT_EQ(bhattacharyya(a, c), 0.0);
  // Direct summation: 2 * sqrt(0.5 * 0.25).
  EXPECT_NEAR(bhattacharyya(a, b), 2.0 * std::sqrt(0.125), 1e-15);
  EXPECT_NEAR(bhattacharyya(a, b), 0.70711, 1e-5);
}

TEST(Bhattacharyya, Errors) {
  const auto a = histogram(std::vector<double>(8, 0.125));
  const auto b = histogram(std::vector<double>(27, 1.0 / 27));
  EXPECT_TRUE(throws_code([&] { bhattacharyya(a, b); }, ErrorCode::BinMismatch));
  JointHistogram raw = a;
  raw.normalized = false;
  EXPECT_THROW(bhattacharyya(raw, a), Error);
}

TEST(SimilarityMatrix, Examples) {
  const auto a = histogram({0.5, 0.5, 0, 0, 0, 0, 0, 0});
  const auto b = histogram({0.25, 0.25, 0.25, 0.25, 0, 0, 0, 0});
  const auto c = histogram({0, 0, 0, 0, 0.5, 0.5, 0, 0});

  const std::vector<JointHistogram> same{a, a, a};
  EXPECT_TRUE(similarity_matrix(same).isZero(0.0));

  const std::vector<JointHistogram> disjoint{a, c};
  Matrix expect(2, 2);
  expect << 0, 1, 1, 0;
  EXPECT_EQ(similarity_matrix(disjoint), expect);

  const std::vector<JointHistogram> pair{a, b};
  const Matrix w = similarity_matrix(pair);
  EXPECT_NEAR(w(0, 1), 1.0 - 2.0 * std::sqrt(0.125), 1e-15);
  EXPECT_NEAR(w(0, 1), 0.29289, 1e-5);
  EXPECT_EQ(w(0, 1), w(1, 0));
}

TEST(SimilarityMatrix, RandomHistogramsAreSymmetricWithZeroDiagonal) {
  std::mt19937_64 rng(24);
  std::gamma_distribution<double> g(0.3, 1.0);
  std::vector<JointHistogram> hs;
  for (int i = 0; i < 30; ++i) {
    std::vector<double> c(64);
    for (auto& v : c) v = g(rng);
    const double s = std::accumulate(c.begin(), c.end(), 0.0);
    for (auto& v : c) v /= s;
    hs.push_back(histogram(std::move(c)));
  }
  const Matrix w = similarity_matrix(hs);
  for (int i = 0; i < 30; ++i) {
    EXPECT_EQ(w(i, i), 0.0);
    for (int j = 0; j < 30; ++j) {
      EXPECT_EQ(w(i, j), w(j, i));
      EXPECT_GE(w(i, j), 0.0);
      EXPECT_LE(w(i, j), 1.0);
    }
  }
  const std::vector<JointHistogram> mixed{hs[0], histogram(std::vector<double>(8, 0.125))};
  EXPECT_TRUE(throws_code([&] { similarity_matrix(mixed); }, ErrorCode::BinMismatch));
}

}  // namespace
}  // namespace fieldgraph
