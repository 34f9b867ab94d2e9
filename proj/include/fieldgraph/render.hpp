#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "fieldgraph/raster.hpp"
#include "fieldgraph/slic.hpp"

namespace fieldgraph {

struct OverlayStyle {
  std::array<std::uint8_t, 3> tint{255, 0, 0};
  std::array<std::uint8_t, 3> boundary{255, 255, 0};
  bool draw_boundaries = true;
};

/// Blends every region toward the tint with opacity equal to its node value
/// (clamped to [0, 1]) and marks pixels whose right or lower neighbour lies
/// in another region. `values` holds one entry per node; entries past
/// map.n_regions (neutral nodes) are ignored.
RasterImage render_overlay(const RasterImage& image, const SuperpixelMap& map, std::span<const double> values,
                           const OverlayStyle& style = {});

}  // namespace fieldgraph
