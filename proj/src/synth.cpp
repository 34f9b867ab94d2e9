#include "fieldgraph/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "fieldgraph/error.hpp"

namespace fieldgraph {

void SynthConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (width < 64 || height < 64) fail("synthetic fields must be at least 64x64");
  if (min_blobs < 0 || max_blobs < min_blobs) fail("blob count range is invalid");
  if (!(min_blob_radius > 0.0) || max_blob_radius < min_blob_radius) fail("blob radius range is invalid");
  if (!(zero_dropout >= 0.0 && zero_dropout <= 1.0)) fail("zero_dropout must lie in [0, 1]");
  if (!(color_jitter >= 0.0)) fail("color_jitter must be non-negative");
  if (!(row_period > 0.0)) fail("row_period must be positive");
  for (int c = 0; c < 3; ++c) {
    if (base_color[c] < 0 || base_color[c] > 255 || stress_color[c] < 0 || stress_color[c] > 255) {
      fail("colors must lie in [0, 255]");
    }
  }
  double gap = 0.0;
  for (int c = 0; c < 3; ++c) gap = std::max(gap, std::abs(stress_color[c] - base_color[c]));
  if (gap < 3.0 * color_jitter) fail("stress color must differ from base by >= 3 * color_jitter");
}

bool Ellipse::contains(double x, double y) const {
  const double dx = x - cx, dy = y - cy;
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = (dx * c + dy * s) / rx;
  const double v = (-dx * s + dy * c) / ry;
  return u * u + v * v <= 1.0;
}

SynthField generate_field(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 1.0);

  const int n_blobs = std::uniform_int_distribution<int>(cfg.min_blobs, cfg.max_blobs)(rng);
  std::vector<Ellipse> blobs;
  for (int b = 0; b < n_blobs; ++b) {
    Ellipse e;
    e.cx = unit(rng) * cfg.width;
    e.cy = unit(rng) * cfg.height;
    e.rx = cfg.min_blob_radius + unit(rng) * (cfg.max_blob_radius - cfg.min_blob_radius);
    e.ry = cfg.min_blob_radius + unit(rng) * (cfg.max_blob_radius - cfg.min_blob_radius);
    e.angle = unit(rng) * std::numbers::pi;
    blobs.push_back(e);
  }

  const std::size_t npix = static_cast<std::size_t>(cfg.width) * cfg.height;
  std::vector<std::uint8_t> rgb(npix * 3);
  std::vector<std::uint8_t> mask(npix, 0);
  for (int y = 0; y < cfg.height; ++y) {
    const double stripe = 1.0 + cfg.row_contrast * std::sin(2.0 * std::numbers::pi * y / cfg.row_period);
    for (int x = 0; x < cfg.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * cfg.width + x;
      const bool stressed =
          std::any_of(blobs.begin(), blobs.end(), [&](const Ellipse& e) { return e.contains(x, y); });
      mask[p] = stressed ? 1 : 0;
      const auto& base = stressed ? cfg.stress_color : cfg.base_color;
      for (int c = 0; c < 3; ++c) {
        const double v = base[c] * stripe + cfg.color_jitter * jitter(rng);
        const bool dropped = unit(rng) < cfg.zero_dropout;
        rgb[3 * p + c] = dropped ? 0 : static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return {RasterImage(cfg.width, cfg.height, std::move(rgb)), BinaryMask(cfg.width, cfg.height, std::move(mask)),
          std::move(blobs)};
}

std::uint64_t field_seed(std::uint64_t dataset_seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(dataset_seed), static_cast<std::uint32_t>(dataset_seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

SplitIndices split_indices(std::size_t n, const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || std::abs(f.train + f.val + f.test - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidSplit, "split fractions must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  // A tiny epsilon keeps exact products like 20 * 0.15 from flooring to 2.
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.val + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.test + 1e-9));
  SplitIndices s;
  s.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

SynthDataset generate_dataset(const SynthConfig& cfg, std::size_t n_fields, const SplitFractions& split,
                              std::uint64_t seed) {
  cfg.validate();
  SynthDataset ds;
  ds.indices = split_indices(n_fields, split, seed);
  auto fill = [&](const std::vector<std::size_t>& idx, std::vector<SynthField>& out) {
    for (auto i : idx) out.push_back(generate_field(cfg, field_seed(seed, i)));
  };
  fill(ds.indices.train, ds.train);
  fill(ds.indices.val, ds.val);
  fill(ds.indices.test, ds.test);
  return ds;
}

}  // namespace fieldgraph
