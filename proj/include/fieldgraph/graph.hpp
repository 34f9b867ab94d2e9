#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fieldgraph/features.hpp"
#include "fieldgraph/matrix.hpp"
#include "fieldgraph/raster.hpp"
#include "fieldgraph/slic.hpp"

namespace fieldgraph {

inline constexpr int kDefaultNodeCount = 400;

enum class Task { classification, regression };

std::string_view to_string(Task task);
/// Throws InvalidConfig for anything but "classification" / "regression".
Task parse_task(std::string_view name);

/// Fully connected weighted graph over one field's superpixels, padded
/// with inert neutral nodes to a fixed node count. Real nodes occupy the
/// first n_real rows.
struct FieldGraph {
  int n = 0;
  int n_real = 0;
  Matrix features;   // n x 9
  Matrix adjacency;  // n x n, symmetric, zero diagonal
  Vector targets;    // n
  std::vector<std::uint8_t> valid_mask;
  std::vector<std::array<double, 2>> centroids;  // (x, y) in pixels
  std::optional<Task> task;                      // unset until targets are assigned
  std::string source_id;
};

/// Features and similarity edges for every region; targets are left at 0.
FieldGraph build_field_graph(const RasterImage& image, const SuperpixelMap& map,
                             int n = kDefaultNodeCount, int bins = kDefaultHistogramBins);

/// 1 for every region containing at least one positive mask pixel.
Vector make_classification_targets(const SuperpixelMap& map, const BinaryMask& mask,
                                   int n = kDefaultNodeCount);
/// Fraction of positive mask pixels per region.
Vector make_regression_targets(const SuperpixelMap& map, const BinaryMask& mask,
                               int n = kDefaultNodeCount);

void assign_targets(FieldGraph& graph, const SuperpixelMap& map, const BinaryMask& mask, Task task);

/// Throws InvariantError when a FieldGraph invariant does not hold.
void validate(const FieldGraph& graph);

/// Single JSON document; reals written as shortest round-trip 32-bit decimals.
std::string graph_to_json(const FieldGraph& graph);
FieldGraph graph_from_json(std::string_view text);

struct GraphBuildOptions {
  int nodes = kDefaultNodeCount;
  double compactness = 30.0;
  int bins = kDefaultHistogramBins;
  int max_iter = 10;
  Task task = Task::classification;
};

struct BuiltField {
  SuperpixelMap superpixels;
  FieldGraph graph;
};

/// Segmentation, graph construction and target assignment for one field.
BuiltField build_field(const RasterImage& image, const BinaryMask& mask, const GraphBuildOptions& options,
                       std::string source_id);

void save_graph(const FieldGraph& graph, const std::filesystem::path& path);
FieldGraph load_graph(const std::filesystem::path& path);

}  // namespace fieldgraph
