#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fieldgraph/raster.hpp"

namespace fieldgraph {

/// Per-pixel region assignment. Labels are contiguous in [0, n_regions).
struct SuperpixelMap {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> labels;
  int n_regions = 0;

  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::int32_t at(int row, int col) const { return labels[static_cast<std::size_t>(row) * width + col]; }

  bool operator==(const SuperpixelMap&) const = default;
};

struct PixelCoord {
  int row = 0;
  int col = 0;
  bool operator==(const PixelCoord&) const = default;
};

struct SuperpixelRegion {
  int id = 0;
  std::vector<PixelCoord> pixels;  // raster order
  double centroid_x = 0.0;         // mean column
  double centroid_y = 0.0;         // mean row
  std::size_t area() const noexcept { return pixels.size(); }
};

struct SlicParams {
  int k = 400;
  double compactness = 30.0;
  int max_iter = 10;
  bool median_prefilter = true;  // segment_superpixels only
};

/// k-means over (L, a, b, x, y) with the compactness-weighted distance
/// D^2 = d_lab^2 + (d_xy / S)^2 * m^2, S = sqrt(w*h/k), each seed searching a
/// 2S x 2S window. A pixel keeps its current cluster unless a window search
/// finds a strictly closer one (ties go to the lower id), so the residual
/// sum of D^2 never increases.
///
/// If `residuals` is non-null it receives the residual after every iteration.
/// The returned map is not connectivity-enforced.
SuperpixelMap slic_segment(const LabImage& image, const SlicParams& params,
                           std::vector<double>* residuals = nullptr);

/// Relabels the map so every region is one 4-connected component. Each
/// label keeps its largest component if that component holds at least
/// `min_area` pixels; every other component is merged into the adjacent
/// region with the largest area. Output ids follow raster order of each
/// region's first pixel.
SuperpixelMap enforce_connectivity(const SuperpixelMap& map, int min_area);

/// (w*h/k)/4, the conventional orphan threshold.
int default_min_area(int width, int height, int k);

/// rgb_to_lab, slic_segment and enforce_connectivity with the default
/// orphan threshold. With median_prefilter the clustering sees a 3x3
/// per-channel median of the image, which suppresses zero-valued channel
/// dropouts; the labels still index the original pixels.
SuperpixelMap segment_superpixels(const RasterImage& image, const SlicParams& params,
                                  std::vector<double>* residuals = nullptr);

std::vector<SuperpixelRegion> extract_regions(const SuperpixelMap& map);

/// Checks the partition and contiguity invariants; throws InvariantError.
void validate(const SuperpixelMap& map);

/// True when every label's pixel set is a single 4-connected component.
bool is_four_connected(const SuperpixelMap& map);

/// 16-bit single-channel PNG plus a `<stem>.json` sidecar {width, height, n_regions}.
void save_superpixel_map(const SuperpixelMap& map, const std::filesystem::path& png_path);
SuperpixelMap load_superpixel_map(const std::filesystem::path& png_path);

}  // namespace fieldgraph
