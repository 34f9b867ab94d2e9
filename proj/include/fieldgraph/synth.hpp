#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fieldgraph/raster.hpp"

namespace fieldgraph {

/// Synthetic crop field: striped green background with elliptical
/// stress blobs in a separable color.
struct SynthConfig {
  int width = 512;
  int height = 512;
  int min_blobs = 2;
  int max_blobs = 5;
  double min_blob_radius = 25.0;
  double max_blob_radius = 60.0;
  std::array<double, 3> base_color{70.0, 130.0, 50.0};
  std::array<double, 3> stress_color{190.0, 170.0, 80.0};
  double color_jitter = 12.0;
  double row_period = 8.0;      // crop-row stripe period in pixels
  double row_contrast = 0.06;   // relative brightness swing of the stripes
  double zero_dropout = 0.1;    // chance each channel sample is forced to 0

  /// Throws InvalidConfig. Requires the stress and base colors to differ by
  /// at least 3 * color_jitter in some channel.
  void validate() const;
};

struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double rx = 1.0;
  double ry = 1.0;
  double angle = 0.0;  // radians

  bool contains(double x, double y) const;
};

struct SynthField {
  RasterImage image;
  BinaryMask mask;
  std::vector<Ellipse> blobs;
};

SynthField generate_field(const SynthConfig& cfg, std::uint64_t seed);

/// Seed for the i-th field of a dataset.
std::uint64_t field_seed(std::uint64_t dataset_seed, std::size_t index);

struct SplitFractions {
  double train = 0.7;
  double val = 0.15;
  double test = 0.15;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of [0, n); val and test sizes are floor(n * fraction),
/// the remainder goes to train. Each list is sorted. Throws InvalidSplit.
SplitIndices split_indices(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);

struct SynthDataset {
  std::vector<SynthField> train;
  std::vector<SynthField> val;
  std::vector<SynthField> test;
  SplitIndices indices;
};

SynthDataset generate_dataset(const SynthConfig& cfg, std::size_t n_fields, const SplitFractions& split,
                              std::uint64_t seed);

}  // namespace fieldgraph
