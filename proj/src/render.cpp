#include "fieldgraph/render.hpp"

#include <algorithm>
#include <cmath>

#include "fieldgraph/error.hpp"

namespace fieldgraph {

RasterImage render_overlay(const RasterImage& image, const SuperpixelMap& map, std::span<const double> values,
                           const OverlayStyle& style) {
  if (map.width != image.width() || map.height != image.height()) {
    throw Error(ErrorCode::DimensionMismatch, "superpixel map and image sizes differ");
  }
  if (values.size() < static_cast<std::size_t>(map.n_regions)) {
    throw Error(ErrorCode::DimensionMismatch, "fewer node values than regions");
  }
  std::vector<std::uint8_t> out(image.data().begin(), image.data().end());
  const int w = map.width, h = map.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const std::int32_t label = map.labels[p];
      const bool edge = style.draw_boundaries && ((x + 1 < w && map.labels[p + 1] != label) ||
                                                  (y + 1 < h && map.labels[p + w] != label));
      if (edge) {
        std::copy(style.boundary.begin(), style.boundary.end(), out.begin() + 3 * p);
        continue;
      }
      const double alpha = std::clamp(values[label], 0.0, 1.0);
      if (alpha == 0.0) continue;
      for (int c = 0; c < 3; ++c) {
        const double v = (1.0 - alpha) * out[3 * p + c] + alpha * style.tint[c];
        out[3 * p + c] = static_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return RasterImage(w, h, std::move(out));
}

}  // namespace fieldgraph
