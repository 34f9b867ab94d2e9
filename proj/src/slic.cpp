#include "fieldgraph/slic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "fieldgraph/error.hpp"

namespace fieldgraph {
namespace {

struct Center {
  double l, a, b, x, y;
};

struct Grid {
  int nx = 1;
  int ny = 1;
};

// Largest seed grid with nx*ny <= k whose cells stay within a 2:1 aspect
// ratio; falls back to the largest grid of any shape.
Grid choose_grid(int width, int height, int k) {
  Grid best;
  bool best_ok = false;
  long best_count = 0;
  double best_skew = std::numeric_limits<double>::infinity();
  const double max_skew = std::log(2.0) + 1e-12;
  for (int nx = 1; nx <= std::min(width, k); ++nx) {
    const int ny = std::min(height, k / nx);
    if (ny < 1) continue;
    const long count = static_cast<long>(nx) * ny;
    const double skew = std::abs(std::log((static_cast<double>(width) / nx) / (static_cast<double>(height) / ny)));
    const bool ok = skew <= max_skew;
    bool better = false;
    if (ok != best_ok) {
      better = ok;
    } else if (count != best_count) {
      better = count > best_count;
    } else if (skew != best_skew) {
      better = skew < best_skew;
    } else {
      better = true;  // larger nx on full ties
    }
    if (better) {
      best = {nx, ny};
      best_ok = ok;
      best_count = count;
      best_skew = skew;
    }
  }
  return best;
}

double lab_gradient(const LabImage& img, int row, int col) {
  auto px = [&](int r, int c) {
    r = std::clamp(r, 0, img.height - 1);
    c = std::clamp(c, 0, img.width - 1);
    return img.pixel(static_cast<std::size_t>(r) * img.width + c);
  };
  const auto l = px(row, col - 1), r = px(row, col + 1), u = px(row - 1, col), d = px(row + 1, col);
  double g = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    g += (r[ch] - l[ch]) * (r[ch] - l[ch]) + (d[ch] - u[ch]) * (d[ch] - u[ch]);
  }
  return g;
}

std::vector<Center> seed_centers(const LabImage& img, int k) {
  const Grid grid = choose_grid(img.width, img.height, k);
  const double step_x = static_cast<double>(img.width) / grid.nx;
  const double step_y = static_cast<double>(img.height) / grid.ny;
  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(grid.nx) * grid.ny);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const int col = std::min(img.width - 1, static_cast<int>(std::floor((i + 0.5) * step_x)));
      const int row = std::min(img.height - 1, static_cast<int>(std::floor((j + 0.5) * step_y)));
      // Move the seed to the lowest-gradient pixel of its 3x3 neighbourhood.
      int best_r = row, best_c = col;
      double best_g = lab_gradient(img, row, col);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int r = row + dr, c = col + dc;
          if (r < 0 || c < 0 || r >= img.height || c >= img.width) continue;
          const double g = lab_gradient(img, r, c);
          if (g < best_g) {
            best_g = g;
            best_r = r;
            best_c = c;
          }
        }
      }
      // Seed color is the mean over the grid cell, so patches of outlier
      // pixels cannot start a cluster of their own.
      const int r0 = static_cast<int>(std::floor(j * step_y)), r1 = static_cast<int>(std::floor((j + 1) * step_y));
      const int c0 = static_cast<int>(std::floor(i * step_x)), c1 = static_cast<int>(std::floor((i + 1) * step_x));
      double l = 0.0, a = 0.0, b = 0.0;
      for (int r = r0; r < r1; ++r) {
        for (int c = c0; c < c1; ++c) {
          const auto lab = img.pixel(static_cast<std::size_t>(r) * img.width + c);
          l += lab[0];
          a += lab[1];
          b += lab[2];
        }
      }
      const double count = static_cast<double>(r1 - r0) * (c1 - c0);
      centers.push_back({l / count, a / count, b / count, static_cast<double>(best_c), static_cast<double>(best_r)});
    }
  }
  return centers;
}

}  // namespace

SuperpixelMap slic_segment(const LabImage& image, const SlicParams& params, std::vector<double>* residuals) {
  const std::size_t npix = image.pixel_count();
  if (npix == 0 || image.data.size() != npix * 3) {
    throw Error(ErrorCode::ShapeError, "Lab image buffer does not match its dimensions");
  }
  if (params.k < 2 || static_cast<std::size_t>(params.k) > npix) {
    throw Error(ErrorCode::InvalidK, "k must lie in [2, width*height], got " + std::to_string(params.k));
  }
  if (!(params.compactness > 0.0) || !std::isfinite(params.compactness)) {
    throw Error(ErrorCode::InvalidCompactness, "compactness must be positive");
  }

  const int w = image.width, h = image.height;
  const double step = std::sqrt(static_cast<double>(npix) / params.k);
  const double spatial_weight = (params.compactness / step) * (params.compactness / step);

  std::vector<Center> centers = seed_centers(image, params.k);
  const int nc = static_cast<int>(centers.size());

  auto dist2 = [&](std::size_t p, const Center& c) {
    const double* lab = &image.data[3 * p];
    const double dl = lab[0] - c.l, da = lab[1] - c.a, db = lab[2] - c.b;
    const double dx = static_cast<double>(p % w) - c.x, dy = static_cast<double>(p / w) - c.y;
    return dl * dl + da * da + db * db + (dx * dx + dy * dy) * spatial_weight;
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::int32_t> label(npix, -1);
  std::vector<double> dist(npix, kInf);
  if (residuals != nullptr) residuals->clear();

  const int iterations = std::max(1, params.max_iter);
  for (int iter = 0; iter < iterations; ++iter) {
    for (std::size_t p = 0; p < npix; ++p) dist[p] = label[p] >= 0 ? dist2(p, centers[label[p]]) : kInf;

    bool changed = false;
    for (int ci = 0; ci < nc; ++ci) {
      const Center& c = centers[ci];
      const int x0 = std::max(0, static_cast<int>(std::ceil(c.x - step)));
      const int x1 = std::min(w - 1, static_cast<int>(std::floor(c.x + step)));
      const int y0 = std::max(0, static_cast<int>(std::ceil(c.y - step)));
      const int y1 = std::min(h - 1, static_cast<int>(std::floor(c.y + step)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          const double d = dist2(p, c);
          if (d < dist[p] || (d == dist[p] && ci < label[p])) {
            dist[p] = d;
            label[p] = ci;
            changed = true;
          }
        }
      }
    }
    if (iter == 0) {
      // Pixels outside every window fall back to an exhaustive search.
      for (std::size_t p = 0; p < npix; ++p) {
        if (label[p] >= 0) continue;
        for (int ci = 0; ci < nc; ++ci) {
          const double d = dist2(p, centers[ci]);
          if (d < dist[p]) {
            dist[p] = d;
            label[p] = ci;
          }
        }
      }
    } else if (!changed) {
      break;
    }

    std::vector<Center> sums(nc, Center{0, 0, 0, 0, 0});
    std::vector<std::size_t> counts(nc, 0);
    for (std::size_t p = 0; p < npix; ++p) {
      Center& s = sums[label[p]];
      s.l += image.data[3 * p];
      s.a += image.data[3 * p + 1];
      s.b += image.data[3 * p + 2];
      s.x += static_cast<double>(p % w);
      s.y += static_cast<double>(p / w);
      ++counts[label[p]];
    }
    for (int ci = 0; ci < nc; ++ci) {
      if (counts[ci] == 0) continue;
      const double n = static_cast<double>(counts[ci]);
      centers[ci] = {sums[ci].l / n, sums[ci].a / n, sums[ci].b / n, sums[ci].x / n, sums[ci].y / n};
    }

    if (residuals != nullptr) {
      double total = 0.0;
      for (std::size_t p = 0; p < npix; ++p) total += dist2(p, centers[label[p]]);
      residuals->push_back(total);
    }
  }

  // Drop empty clusters, keeping cluster order.
  std::vector<std::int32_t> remap(nc, -1);
  std::int32_t next = 0;
  std::vector<char> used(nc, 0);
  for (auto l : label) used[l] = 1;
  for (int ci = 0; ci < nc; ++ci) {
    if (used[ci]) remap[ci] = next++;
  }
  SuperpixelMap out{w, h, std::move(label), next};
  for (auto& l : out.labels) l = remap[l];
  return out;
}

namespace {

struct Components {
  std::vector<std::int32_t> id;  // per pixel
  std::vector<std::int32_t> label;
  std::vector<std::size_t> size;
  std::vector<std::size_t> first_pixel;
};

Components label_components(const SuperpixelMap& map) {
  const int w = map.width, h = map.height;
  Components comps;
  comps.id.assign(map.pixel_count(), -1);
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < map.pixel_count(); ++start) {
    if (comps.id[start] >= 0) continue;
    const auto cid = static_cast<std::int32_t>(comps.size.size());
    const std::int32_t lab = map.labels[start];
    std::size_t count = 0;
    comps.id[start] = cid;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++count;
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      const std::size_t nbrs[4] = {x > 0 ? p - 1 : p, x + 1 < w ? p + 1 : p, y > 0 ? p - w : p,
                                   y + 1 < h ? p + w : p};
      for (std::size_t q : nbrs) {
        if (comps.id[q] < 0 && map.labels[q] == lab) {
          comps.id[q] = cid;
          stack.push_back(q);
        }
      }
    }
    comps.label.push_back(lab);
    comps.size.push_back(count);
    comps.first_pixel.push_back(start);
  }
  return comps;
}

}  // namespace

SuperpixelMap enforce_connectivity(const SuperpixelMap& map, int min_area) {
  validate(map);
  const int w = map.width, h = map.height;
  const Components comps = label_components(map);
  const std::size_t nc = comps.size.size();

  // Largest component per label; ties keep the earlier one in raster order.
  std::vector<std::int32_t> main_of(static_cast<std::size_t>(map.n_regions), -1);
  for (std::size_t c = 0; c < nc; ++c) {
    auto& m = main_of[comps.label[c]];
    if (m < 0 || comps.size[c] > comps.size[m]) m = static_cast<std::int32_t>(c);
  }
  std::vector<std::int32_t> region(nc, -1);
  std::vector<std::size_t> area(nc, 0);
  bool any_kept = false;
  for (std::int32_t m : main_of) {
    if (m >= 0 && comps.size[m] >= static_cast<std::size_t>(std::max(min_area, 0))) {
      region[m] = m;
      area[m] = comps.size[m];
      any_kept = true;
    }
  }
  if (!any_kept) {
    std::size_t biggest = 0;
    for (std::size_t c = 1; c < nc; ++c) {
      if (comps.size[c] > comps.size[biggest]) biggest = c;
    }
    region[biggest] = static_cast<std::int32_t>(biggest);
    area[biggest] = comps.size[biggest];
  }

  std::vector<std::vector<std::int32_t>> adjacent(nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const std::int32_t a = comps.id[p];
      if (x + 1 < w && comps.id[p + 1] != a) {
        adjacent[a].push_back(comps.id[p + 1]);
        adjacent[comps.id[p + 1]].push_back(a);
      }
      if (y + 1 < h && comps.id[p + w] != a) {
        adjacent[a].push_back(comps.id[p + w]);
        adjacent[comps.id[p + w]].push_back(a);
      }
    }
  }
  for (auto& adj : adjacent) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
  }

  // Absorb unresolved components into their largest resolved neighbour,
  // sweeping until everything is assigned (the pixel grid is connected).
  bool pending = true;
  while (pending) {
    pending = false;
    bool progress = false;
    for (std::size_t c = 0; c < nc; ++c) {
      if (region[c] >= 0) continue;
      std::int32_t target = -1;
      for (std::int32_t n : adjacent[c]) {
        const std::int32_t r = region[n];
        if (r < 0) continue;
        if (target < 0 || area[r] > area[target] || (area[r] == area[target] && r < target)) target = r;
      }
      if (target < 0) {
        pending = true;
        continue;
      }
      region[c] = target;
      area[target] += comps.size[c];
      progress = true;
    }
    if (pending && !progress) throw Error(ErrorCode::InvariantError, "disconnected pixel grid");
  }

  SuperpixelMap out{w, h, std::vector<std::int32_t>(map.pixel_count()), 0};
  std::vector<std::int32_t> new_id(nc, -1);
  for (std::size_t p = 0; p < map.pixel_count(); ++p) {
    const std::int32_t r = region[comps.id[p]];
    if (new_id[r] < 0) new_id[r] = out.n_regions++;
    out.labels[p] = new_id[r];
  }
  return out;
}

int default_min_area(int width, int height, int k) {
  const double per_region = static_cast<double>(width) * height / std::max(k, 1);
  return static_cast<int>(per_region / 4.0);
}

SuperpixelMap segment_superpixels(const RasterImage& image, const SlicParams& params,
                                  std::vector<double>* residuals) {
  const LabImage lab = rgb_to_lab(params.median_prefilter ? median_filter3x3(image) : image);
  const SuperpixelMap raw = slic_segment(lab, params, residuals);
  return enforce_connectivity(raw, default_min_area(image.width(), image.height(), params.k));
}

std::vector<SuperpixelRegion> extract_regions(const SuperpixelMap& map) {
  validate(map);
  std::vector<SuperpixelRegion> regions(static_cast<std::size_t>(map.n_regions));
  for (int i = 0; i < map.n_regions; ++i) regions[i].id = i;
  for (int row = 0; row < map.height; ++row) {
    for (int col = 0; col < map.width; ++col) {
      auto& r = regions[map.at(row, col)];
      r.pixels.push_back({row, col});
      r.centroid_x += col;
      r.centroid_y += row;
    }
  }
  for (auto& r : regions) {
    r.centroid_x /= static_cast<double>(r.area());
    r.centroid_y /= static_cast<double>(r.area());
  }
  return regions;
}

void validate(const SuperpixelMap& map) {
  if (map.width <= 0 || map.height <= 0 || map.labels.size() != map.pixel_count()) {
    throw Error(ErrorCode::InvariantError, "label buffer does not match map dimensions");
  }
  if (map.n_regions < 1) throw Error(ErrorCode::InvariantError, "map has no regions");
  std::vector<char> seen(static_cast<std::size_t>(map.n_regions), 0);
  for (auto l : map.labels) {
    if (l < 0 || l >= map.n_regions) throw Error(ErrorCode::InvariantError, "label out of range");
    seen[l] = 1;
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw Error(ErrorCode::InvariantError, "label ids are not contiguous");
  }
}

bool is_four_connected(const SuperpixelMap& map) {
  validate(map);
  const Components comps = label_components(map);
  return comps.size.size() == static_cast<std::size_t>(map.n_regions);
}

namespace {
std::filesystem::path sidecar_path(const std::filesystem::path& png_path) {
  std::filesystem::path p = png_path;
  return p.replace_extension(".json");
}
}  // namespace

void save_superpixel_map(const SuperpixelMap& map, const std::filesystem::path& png_path) {
  validate(map);
  if (map.n_regions > 65535) throw Error(ErrorCode::FormatError, "too many regions for a 16-bit label map");
  std::vector<std::uint16_t> samples(map.labels.begin(), map.labels.end());
  codec::write_png(png_path, map.width, map.height, 1, 16, samples);
  const nlohmann::json meta = {{"width", map.width}, {"height", map.height}, {"n_regions", map.n_regions}};
  std::ofstream out(sidecar_path(png_path));
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + sidecar_path(png_path).string());
  out << meta.dump() << "\n";
}

SuperpixelMap load_superpixel_map(const std::filesystem::path& png_path) {
  const codec::DecodedImage d = codec::read_png(png_path);
  if (d.channels != 1 || d.bit_depth != 16) {
    throw Error(ErrorCode::FormatError, png_path.string() + ": label map must be 16-bit single-channel");
  }
  std::ifstream in(sidecar_path(png_path));
  if (!in) throw Error(ErrorCode::IoError, "missing sidecar " + sidecar_path(png_path).string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, e.what());
  }
  SuperpixelMap map{d.width, d.height, std::vector<std::int32_t>(d.samples.begin(), d.samples.end()), 0};
  try {
    map.n_regions = meta.at("n_regions").get<int>();
    if (meta.at("width").get<int>() != d.width || meta.at("height").get<int>() != d.height) {
      throw Error(ErrorCode::FormatError, "sidecar dimensions disagree with label image");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, e.what());
  }
  validate(map);
  return map;
}

}  // namespace fieldgraph
