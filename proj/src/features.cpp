#include "fieldgraph/features.hpp"

#include <algorithm>
#include <cmath>

#include "fieldgraph/error.hpp"

namespace fieldgraph {

std::array<double, kFeatureCount> NodeFeatures::flatten() const {
  return {mu[0], mu[1], mu[2], sigma[0], sigma[1], sigma[2], alpha[0], alpha[1], alpha[2]};
}

NodeFeatures node_features(const SuperpixelRegion& region, const RasterImage& image) {
  if (region.pixels.empty()) throw Error(ErrorCode::InvariantError, "region is empty");
  std::array<std::size_t, 3> count{};
  std::array<double, 3> sum{};
  for (const auto& px : region.pixels) {
    if (px.row < 0 || px.col < 0 || px.row >= image.height() || px.col >= image.width()) {
      throw Error(ErrorCode::OutOfBounds, "region pixel (" + std::to_string(px.row) + ", " +
                                              std::to_string(px.col) + ") lies outside the image");
    }
    for (int c = 0; c < 3; ++c) {
      const auto v = image.at(px.row, px.col, c);
      if (v > 0) {
        ++count[c];
        sum[c] += v;
      }
    }
  }
  std::array<double, 3> mean{};
  for (int c = 0; c < 3; ++c) mean[c] = count[c] > 0 ? sum[c] / static_cast<double>(count[c]) : 0.0;

  // Second pass around the mean keeps the variance well-conditioned.
  std::array<double, 3> sq{};
  for (const auto& px : region.pixels) {
    for (int c = 0; c < 3; ++c) {
      const auto v = image.at(px.row, px.col, c);
      if (v > 0) sq[c] += (v - mean[c]) * (v - mean[c]);
    }
  }

  NodeFeatures f;
  const double area = static_cast<double>(region.pixels.size());
  for (int c = 0; c < 3; ++c) {
    if (count[c] == 0) continue;
    f.alpha[c] = static_cast<double>(count[c]) / area;
    f.mu[c] = mean[c] / 255.0;
    f.sigma[c] = std::sqrt(sq[c] / static_cast<double>(count[c])) / 255.0;
  }
  return f;
}

JointHistogram joint_histogram(const SuperpixelRegion& region, const RasterImage& image, int bins) {
  if (bins < 2) throw Error(ErrorCode::InvalidConfig, "histogram needs at least 2 bins per channel");
  JointHistogram h;
  h.bins_per_channel = bins;
  h.counts.assign(static_cast<std::size_t>(bins) * bins * bins, 0.0);
  h.normalized = true;
  if (region.pixels.empty()) return h;
  for (const auto& px : region.pixels) {
    if (px.row < 0 || px.col < 0 || px.row >= image.height() || px.col >= image.width()) {
      throw Error(ErrorCode::OutOfBounds, "region pixel lies outside the image");
    }
    const int r = image.at(px.row, px.col, 0) * bins / 256;
    const int g = image.at(px.row, px.col, 1) * bins / 256;
    const int b = image.at(px.row, px.col, 2) * bins / 256;
    h.counts[(static_cast<std::size_t>(r) * bins + g) * bins + b] += 1.0;
  }
  const double total = static_cast<double>(region.pixels.size());
  for (auto& c : h.counts) c /= total;
  return h;
}

namespace {

void check_pair(const JointHistogram& h1, const JointHistogram& h2) {
  if (h1.bins_per_channel != h2.bins_per_channel || h1.counts.size() != h2.counts.size()) {
    throw Error(ErrorCode::BinMismatch, "histograms use different binning");
  }
  if (!h1.normalized || !h2.normalized) {
    throw Error(ErrorCode::InvariantError, "Bhattacharyya coefficient needs normalized histograms");
  }
}

std::vector<double> sqrt_mass(const JointHistogram& h) {
  std::vector<double> s(h.counts.size());
  std::transform(h.counts.begin(), h.counts.end(), s.begin(), [](double v) { return std::sqrt(v); });
  return s;
}

double overlap(const std::vector<double>& a, const std::vector<double>& b) {
  double bc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) bc += a[i] * b[i];
  return std::clamp(bc, 0.0, 1.0);
}

}  // namespace

double bhattacharyya(const JointHistogram& h1, const JointHistogram& h2) {
  check_pair(h1, h2);
  return overlap(sqrt_mass(h1), sqrt_mass(h2));
}

Matrix similarity_matrix(std::span<const JointHistogram> hists) {
  const auto n = static_cast<Eigen::Index>(hists.size());
  for (const auto& h : hists) check_pair(hists.front(), h);
  std::vector<std::vector<double>> roots;
  roots.reserve(hists.size());
  for (const auto& h : hists) roots.push_back(sqrt_mass(h));

  Matrix w = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double s = 1.0 - overlap(roots[i], roots[j]);
      w(i, j) = s;
      w(j, i) = s;
    }
  }
  return w;
}

}  // namespace fieldgraph
