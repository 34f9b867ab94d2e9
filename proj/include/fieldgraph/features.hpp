#pragma once

#include <array>
#include <span>
#include <vector>

#include "fieldgraph/matrix.hpp"
#include "fieldgraph/raster.hpp"
#include "fieldgraph/slic.hpp"

namespace fieldgraph {

inline constexpr int kFeatureCount = 9;
inline constexpr int kDefaultHistogramBins = 8;

/// Per-channel statistics over strictly positive intensities.
/// mu and sigma are scaled by 1/255; alpha is the share of positive pixels.
struct NodeFeatures {
  std::array<double, 3> mu{};
  std::array<double, 3> sigma{};
  std::array<double, 3> alpha{};

  /// Layout: mu_r, mu_g, mu_b, sigma_r, sigma_g, sigma_b, alpha_r, alpha_g, alpha_b.
  std::array<double, kFeatureCount> flatten() const;
};

struct JointHistogram {
  int bins_per_channel = 0;
  std::vector<double> counts;  // bins^3, index (r * bins + g) * bins + b
  bool normalized = false;
};

NodeFeatures node_features(const SuperpixelRegion& region, const RasterImage& image);

/// Joint RGB histogram over all region pixels, normalized to unit mass.
JointHistogram joint_histogram(const SuperpixelRegion& region, const RasterImage& image,
                               int bins = kDefaultHistogramBins);

/// Bhattacharyya coefficient sum_b sqrt(h1_b * h2_b), clamped to [0, 1].
double bhattacharyya(const JointHistogram& h1, const JointHistogram& h2);

/// W_ij = 1 - BC_ij with a zero diagonal.
Matrix similarity_matrix(std::span<const JointHistogram> hists);

}  // namespace fieldgraph
