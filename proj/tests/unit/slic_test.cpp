#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "fieldgraph/slic.hpp"
#include "fieldgraph/synth.hpp"
#include "test_support.hpp"

namespace fieldgraph {
namespace {

using testing::throws_code;

// Independent 4-connectivity check: one flood fill per label must reach every pixel of that label.
bool regions_connected(const SuperpixelMap& m) {
  std::vector<int> seen(m.labels.size(), 0);
  std::set<int> started;
  for (std::size_t s = 0; s < m.labels.size(); ++s) {
    if (seen[s]) continue;
    if (!started.insert(m.labels[s]).second) return false;  // second component of a label
    std::vector<std::size_t> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(p % m.width), y = static_cast<int>(p / m.width);
      const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d) {
        const int nx = x + dx[d], ny = y + dy[d];
        if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
        const std::size_t q = static_cast<std::size_t>(ny) * m.width + nx;
        if (!seen[q] && m.labels[q] == m.labels[p]) {
          seen[q] = 1;
          stack.push_back(q);
        }
      }
    }
  }
  return true;
}

// Same partition up to renaming of labels.
bool same_partition(const SuperpixelMap& a, const SuperpixelMap& b) {
  if (a.labels.size() != b.labels.size() || a.n_regions != b.n_regions) return false;
  std::map<int, int> fwd, back;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    auto [f, fnew] = fwd.emplace(a.labels[i], b.labels[i]);
    auto [r, rnew] = back.emplace(b.labels[i], a.labels[i]);
    if (f->second != b.labels[i] || r->second != a.labels[i]) return false;
  }
  return true;
}

TEST(SlicSegment, RejectsBadParameters) {
  const LabImage lab = rgb_to_lab(testing::constant_image(16, 16, 10, 20, 30));
  EXPECT_TRUE(throws_code([&] { slic_segment(lab, {1, 30.0}); }, ErrorCode::InvalidK));
  EXPECT_TRUE(throws_code([&] { slic_segment(lab, {257, 30.0}); }, ErrorCode::InvalidK));
  EXPECT_TRUE(throws_code([&] { slic_segment(lab, {4, 0.0}); }, ErrorCode::InvalidCompactness));
  EXPECT_TRUE(throws_code([&] { slic_segment(lab, {4, -3.0}); }, ErrorCode::InvalidCompactness));
  EXPECT_TRUE(throws_code([&] { slic_segment(lab, {4, std::nan("")}); }, ErrorCode::InvalidCompactness));
}

// On a constant image the color term vanishes, so one assignment pass is the
// nearest grid seed (ties to the lower seed id).
TEST(SlicSegment, UniformImageFirstPassIsNearestGridSeed) {
  const int w = 512, h = 512, k = 400;
  const LabImage lab = rgb_to_lab(testing::constant_image(w, h, 90, 140, 60));
  const SuperpixelMap m = slic_segment(lab, {k, 30.0, 1});
  ASSERT_EQ(m.n_regions, 400);

  const double cell = 512.0 / 20.0;
  std::vector<std::pair<double, double>> seeds;
  for (int j = 0; j < 20; ++j) {
    for (int i = 0; i < 20; ++i) seeds.emplace_back(std::floor((i + 0.5) * cell), std::floor((j + 0.5) * cell));
  }
  int mismatches = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int best = 0;
      double best_d = INFINITY;
      for (int s = 0; s < 400; ++s) {
        const double dx = x - seeds[s].first, dy = y - seeds[s].second;
        const double d = dx * dx + dy * dy;
        if (d < best_d) {
          best_d = d;
          best = s;
        }
      }
      mismatches += m.at(y, x) != best;
    }
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(SlicSegment, UniformImageGivesCompactGrid) {
  const RasterImage img = testing::constant_image(512, 512, 90, 140, 60);
  const SuperpixelMap m = segment_superpixels(img, {400, 30.0});
  EXPECT_EQ(m.n_regions, 400);
  const double s = std::sqrt(512.0 * 512.0 / 400.0);
  for (const auto& r : extract_regions(m)) {
    int r0 = 1 << 30, r1 = -1, c0 = 1 << 30, c1 = -1;
    for (const auto& p : r.pixels) {
      r0 = std::min(r0, p.row);
      r1 = std::max(r1, p.row);
      c0 = std::min(c0, p.col);
      c1 = std::max(c1, p.col);
    }
    EXPECT_LE(r1 - r0 + 1, 4 * s);
    EXPECT_LE(c1 - c0 + 1, 4 * s);
    EXPECT_NEAR(static_cast<double>(r.area()), 655.36, 0.5 * 655.36);
  }
}

// Uniform color leaves the seeds unperturbed, so every pixel is its own seed.
TEST(SlicSegment, OneRegionPerPixelWhenKEqualsPixelCount) {
  const LabImage lab = rgb_to_lab(testing::constant_image(16, 16, 40, 90, 200));
  const SuperpixelMap m = slic_segment(lab, {256, 30.0});
  EXPECT_EQ(m.n_regions, 256);
  EXPECT_EQ(std::set<int>(m.labels.begin(), m.labels.end()).size(), 256u);
}

TEST(SlicSegment, TwoToneSplitsIntoHalves) {
  const int w = 32, h = 32;
  std::vector<std::uint8_t> px(w * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool left = x < w / 2;
      const std::size_t o = 3 * (static_cast<std::size_t>(y) * w + x);
      px[o] = left ? 200 : 30;
      px[o + 1] = 40;
      px[o + 2] = left ? 30 : 200;
    }
  }
  const LabImage lab = rgb_to_lab(RasterImage(w, h, px));
  const SuperpixelMap m = slic_segment(lab, {2, 30.0});
  ASSERT_EQ(m.n_regions, 2);

  const int left_label = m.at(0, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool left = x < w / 2;
      if ((m.at(y, x) == left_label) != left) {
        EXPECT_LE(std::abs(x - (w / 2 - 0.5)), 2.0) << "pixel " << x << "," << y;
      }
    }
  }

  // Exhaustive oracle: with centers recomputed from the final labels, every
  // pixel already sits in its nearest cluster.
  const double step = std::sqrt(w * h / 2.0);
  const double wt = (30.0 / step) * (30.0 / step);
  double sum[2][5] = {};
  int cnt[2] = {};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto c = lab.pixel(static_cast<std::size_t>(y) * w + x);
      const int l = m.at(y, x);
      sum[l][0] += c[0];
      sum[l][1] += c[1];
      sum[l][2] += c[2];
      sum[l][3] += x;
      sum[l][4] += y;
      ++cnt[l];
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto c = lab.pixel(static_cast<std::size_t>(y) * w + x);
      double d[2];
      for (int l = 0; l < 2; ++l) {
        const double dl = c[0] - sum[l][0] / cnt[l], da = c[1] - sum[l][1] / cnt[l], db = c[2] - sum[l][2] / cnt[l];
        const double dx = x - sum[l][3] / cnt[l], dy = y - sum[l][4] / cnt[l];
        d[l] = dl * dl + da * da + db * db + (dx * dx + dy * dy) * wt;
      }
      EXPECT_LE(d[m.at(y, x)], d[1 - m.at(y, x)] + 1e-9);
    }
  }
}

TEST(SlicSegment, ResidualNeverIncreases) {
  SynthConfig cfg;
  cfg.width = 160;
  cfg.height = 128;
  cfg.min_blob_radius = 10;
  cfg.max_blob_radius = 30;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const SynthField f = generate_field(cfg, seed);
    std::vector<double> res;
    slic_segment(rgb_to_lab(f.image), {60, 30.0, 10}, &res);
    ASSERT_FALSE(res.empty());
    for (std::size_t i = 1; i < res.size(); ++i) EXPECT_LE(res[i], res[i - 1]) << "iteration " << i;
  }
  std::mt19937_64 rng(12);
  std::vector<double> res;
  slic_segment(rgb_to_lab(testing::random_image(64, 48, rng)), {30, 10.0, 10}, &res);
  for (std::size_t i = 1; i < res.size(); ++i) EXPECT_LE(res[i], res[i - 1]);
}

TEST(SlicSegment, Deterministic) {
  std::mt19937_64 rng(13);
  const RasterImage img = testing::random_image(80, 60, rng);
  EXPECT_EQ(segment_superpixels(img, {50, 30.0}), segment_superpixels(img, {50, 30.0}));
}

TEST(SegmentSuperpixels, SynthFieldHasFullCountAndConnectedRegions) {
  const SynthField f = generate_field(SynthConfig{}, field_seed(3, 0));
  const SuperpixelMap m = segment_superpixels(f.image, {});
  EXPECT_NO_THROW(validate(m));
  EXPECT_EQ(m.n_regions, 400);
  EXPECT_TRUE(regions_connected(m));
  EXPECT_TRUE(is_four_connected(m));
}

TEST(EnforceConnectivity, ConnectedMapOnlyRenumbers) {
  SuperpixelMap m{30, 20, std::vector<std::int32_t>(600), 3};
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 30; ++x) m.labels[y * 30 + x] = x < 10 ? 2 : (x < 20 ? 0 : 1);
  }
  const SuperpixelMap out = enforce_connectivity(m, 50);
  EXPECT_TRUE(same_partition(out, m));
  EXPECT_EQ(out.at(0, 0), 0);  // raster order of first pixel
  EXPECT_EQ(enforce_connectivity(out, 50), out);
}

TEST(EnforceConnectivity, IslandJoinsItsLargestNeighbour) {
  // Left half label 0, right half label 1, plus a detached 3-pixel piece of label 0 on the right.
  SuperpixelMap m{20, 20, std::vector<std::int32_t>(400), 2};
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 20; ++x) m.labels[y * 20 + x] = x < 10 ? 0 : 1;
  }
  m.labels[5 * 20 + 15] = m.labels[5 * 20 + 16] = m.labels[6 * 20 + 15] = 0;
  const SuperpixelMap out = enforce_connectivity(m, 10);
  EXPECT_EQ(out.n_regions, 2);
  EXPECT_EQ(out.at(5, 15), out.at(0, 19));
  EXPECT_EQ(out.at(5, 16), out.at(0, 19));
  EXPECT_EQ(out.at(6, 15), out.at(0, 19));
  EXPECT_NE(out.at(0, 0), out.at(0, 19));
}

TEST(EnforceConnectivity, CheckerboardBecomesConnectedPartition) {
  SuperpixelMap m{24, 18, std::vector<std::int32_t>(24 * 18), 2};
  for (int y = 0; y < 18; ++y) {
    for (int x = 0; x < 24; ++x) m.labels[y * 24 + x] = (x + y) % 2;
  }
  EXPECT_FALSE(regions_connected(m));
  const SuperpixelMap out = enforce_connectivity(m, 2);
  EXPECT_NO_THROW(validate(out));
  EXPECT_TRUE(regions_connected(out));
  EXPECT_TRUE(is_four_connected(out));
}

TEST(EnforceConnectivity, RandomMapsProperty) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const SuperpixelMap m = testing::random_map(23, 19, 6, rng);
    const SuperpixelMap out = enforce_connectivity(m, 5);
    EXPECT_TRUE(regions_connected(out));
    EXPECT_LE(out.n_regions, m.n_regions);
    EXPECT_NO_THROW(validate(out));
  }
}

TEST(ExtractRegions, SingleRegionCentroidIsImageCenter) {
  SuperpixelMap m{7, 5, std::vector<std::int32_t>(35, 0), 1};
  const auto regions = extract_regions(m);
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_DOUBLE_EQ(regions[0].centroid_x, 3.0);
  EXPECT_DOUBLE_EQ(regions[0].centroid_y, 2.0);
  EXPECT_EQ(regions[0].area(), 35u);
}

TEST(ExtractRegions, TwoByOne) {
  SuperpixelMap m{2, 1, {0, 1}, 2};
  const auto r = extract_regions(m);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].centroid_x, 0.0);
  EXPECT_EQ(r[0].centroid_y, 0.0);
  EXPECT_EQ(r[1].centroid_x, 1.0);
  EXPECT_EQ(r[1].centroid_y, 0.0);
  EXPECT_EQ(r[0].area(), 1u);
  EXPECT_EQ(r[1].area(), 1u);
}

TEST(ExtractRegions, AreasSumToPixelCount) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    const SuperpixelMap m = testing::random_map(31, 17, 9, rng);
    std::size_t total = 0;
    for (const auto& r : extract_regions(m)) {
      total += r.area();
      int r0 = 1 << 30, r1 = -1, c0 = 1 << 30, c1 = -1;
      for (const auto& p : r.pixels) {
        r0 = std::min(r0, p.row);
        r1 = std::max(r1, p.row);
        c0 = std::min(c0, p.col);
        c1 = std::max(c1, p.col);
      }
      EXPECT_GE(r.centroid_x, c0);
      EXPECT_LE(r.centroid_x, c1);
      EXPECT_GE(r.centroid_y, r0);
      EXPECT_LE(r.centroid_y, r1);
    }
    EXPECT_EQ(total, 31u * 17u);
  }
}

TEST(Validate, RejectsGapsAndOutOfRangeLabels) {
  EXPECT_TRUE(throws_code([] { validate(SuperpixelMap{2, 1, {0, 2}, 3}); }, ErrorCode::InvariantError));
  EXPECT_TRUE(throws_code([] { validate(SuperpixelMap{2, 1, {0, 5}, 2}); }, ErrorCode::InvariantError));
  EXPECT_TRUE(throws_code([] { validate(SuperpixelMap{2, 2, {0, 1}, 2}); }, ErrorCode::InvariantError));
}

TEST(SuperpixelMapFile, RoundTrip) {
  testing::TempDir dir;
  std::mt19937_64 rng(16);
  const SuperpixelMap m = testing::random_map(40, 33, 700, rng);
  save_superpixel_map(m, dir / "labels.png");
  EXPECT_TRUE(std::filesystem::exists(dir / "labels.json"));
  EXPECT_EQ(load_superpixel_map(dir / "labels.png"), m);
}

}  // namespace
}  // namespace fieldgraph
