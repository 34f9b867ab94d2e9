#include "fieldgraph/graph.hpp"

#include <cmath>

#include "fieldgraph/error.hpp"
#include "json_util.hpp"

namespace fieldgraph {

std::string_view to_string(Task task) {
  return task == Task::classification ? "classification" : "regression";
}

Task parse_task(std::string_view name) {
  if (name == "classification") return Task::classification;
  if (name == "regression") return Task::regression;
  throw Error(ErrorCode::InvalidConfig, "unknown task '" + std::string(name) + "'");
}

FieldGraph build_field_graph(const RasterImage& image, const SuperpixelMap& map, int n, int bins) {
  if (map.width != image.width() || map.height != image.height()) {
    throw Error(ErrorCode::DimensionMismatch, "superpixel map and image sizes differ");
  }
  if (map.n_regions > n) {
    throw Error(ErrorCode::TooManyRegions,
                std::to_string(map.n_regions) + " regions exceed the node count " + std::to_string(n));
  }
  const std::vector<SuperpixelRegion> regions = extract_regions(map);

  FieldGraph g;
  g.n = n;
  g.n_real = map.n_regions;
  g.features = Matrix::Zero(n, kFeatureCount);
  g.targets = Vector::Zero(n);
  g.valid_mask.assign(static_cast<std::size_t>(n), 0);
  g.centroids.assign(static_cast<std::size_t>(n), {0.0, 0.0});

  std::vector<JointHistogram> hists;
  hists.reserve(regions.size());
  for (const auto& region : regions) {
    const auto f = node_features(region, image).flatten();
    for (int c = 0; c < kFeatureCount; ++c) g.features(region.id, c) = f[c];
    g.centroids[region.id] = {region.centroid_x, region.centroid_y};
    g.valid_mask[region.id] = 1;
    hists.push_back(joint_histogram(region, image, bins));
  }
  g.adjacency = Matrix::Zero(n, n);
  g.adjacency.topLeftCorner(g.n_real, g.n_real) = similarity_matrix(hists);
  return g;
}

namespace {

void check_target_inputs(const SuperpixelMap& map, const BinaryMask& mask, int n) {
  if (map.width != mask.width() || map.height != mask.height()) {
    throw Error(ErrorCode::DimensionMismatch, "mask and superpixel map sizes differ");
  }
  if (map.n_regions > n) throw Error(ErrorCode::TooManyRegions, "more regions than nodes");
}

}  // namespace

Vector make_classification_targets(const SuperpixelMap& map, const BinaryMask& mask, int n) {
  check_target_inputs(map, mask, n);
  Vector y = Vector::Zero(n);
  for (std::size_t p = 0; p < map.pixel_count(); ++p) {
    if (mask.data()[p] != 0) y[map.labels[p]] = 1.0;
  }
  return y;
}

Vector make_regression_targets(const SuperpixelMap& map, const BinaryMask& mask, int n) {
  check_target_inputs(map, mask, n);
  std::vector<std::size_t> positive(static_cast<std::size_t>(map.n_regions), 0);
  std::vector<std::size_t> area(static_cast<std::size_t>(map.n_regions), 0);
  for (std::size_t p = 0; p < map.pixel_count(); ++p) {
    ++area[map.labels[p]];
    if (mask.data()[p] != 0) ++positive[map.labels[p]];
  }
  Vector y = Vector::Zero(n);
  for (int i = 0; i < map.n_regions; ++i) {
    y[i] = static_cast<double>(positive[i]) / static_cast<double>(area[i]);
  }
  return y;
}

void assign_targets(FieldGraph& graph, const SuperpixelMap& map, const BinaryMask& mask, Task task) {
  if (map.n_regions != graph.n_real) {
    throw Error(ErrorCode::DimensionMismatch, "superpixel map does not match the graph's real nodes");
  }
  graph.targets = task == Task::classification ? make_classification_targets(map, mask, graph.n)
                                               : make_regression_targets(map, mask, graph.n);
  graph.task = task;
}

BuiltField build_field(const RasterImage& image, const BinaryMask& mask, const GraphBuildOptions& options,
                       std::string source_id) {
  if (mask.width() != image.width() || mask.height() != image.height()) {
    throw Error(ErrorCode::DimensionMismatch, "mask and image sizes differ");
  }
  BuiltField out;
  out.superpixels = segment_superpixels(image, {options.nodes, options.compactness, options.max_iter});
  out.graph = build_field_graph(image, out.superpixels, options.nodes, options.bins);
  assign_targets(out.graph, out.superpixels, mask, options.task);
  out.graph.source_id = std::move(source_id);
  return out;
}

void validate(const FieldGraph& g) {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvariantError, why); };
  const auto n = static_cast<Eigen::Index>(g.n);
  if (g.n < 1 || g.n_real < 0 || g.n_real > g.n) fail("node counts out of range");
  if (g.features.rows() != n || g.features.cols() != kFeatureCount) fail("feature matrix shape");
  if (g.adjacency.rows() != n || g.adjacency.cols() != n) fail("adjacency shape");
  if (g.targets.size() != n) fail("target vector length");
  if (g.valid_mask.size() != static_cast<std::size_t>(g.n)) fail("valid mask length");
  if (g.centroids.size() != static_cast<std::size_t>(g.n)) fail("centroid count");
  if (!g.features.allFinite() || !g.adjacency.allFinite() || !g.targets.allFinite()) fail("non-finite value");

  for (Eigen::Index i = 0; i < n; ++i) {
    const bool real = i < g.n_real;
    if (g.valid_mask[i] != (real ? 1 : 0)) fail("valid mask must flag exactly the first n_real nodes");
    if (g.adjacency(i, i) != 0.0) fail("adjacency diagonal must be zero");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double a = g.adjacency(i, j);
      if (a != g.adjacency(j, i)) fail("adjacency is not symmetric");
      if (a < 0.0 || a > 1.0) fail("adjacency entry outside [0, 1]");
    }
    if (!real) {
      if (!g.features.row(i).isZero(0.0) || !g.adjacency.row(i).isZero(0.0)) {
        fail("neutral node carries features or edges");
      }
      if (g.targets[i] != 0.0) fail("neutral node target must be 0");
    }
    const double t = g.targets[i];
    if (!g.task.has_value()) {
      if (t != 0.0) fail("targets set without a task");
    } else if (*g.task == Task::classification) {
      if (t != 0.0 && t != 1.0) fail("classification targets must be 0 or 1");
    } else if (t < 0.0 || t > 1.0) {
      fail("regression targets must lie in [0, 1]");
    }
  }
}

std::string graph_to_json(const FieldGraph& g) {
  using namespace detail;
  std::string out;
  out.reserve(static_cast<std::size_t>(g.n) * g.n * 12 + 4096);
  out += '{';
  append_key(out, "schema_version");
  out += "1,";
  append_key(out, "n");
  append_int(out, g.n);
  out += ',';
  append_key(out, "n_real");
  append_int(out, g.n_real);
  out += ',';
  append_key(out, "task");
  if (g.task) {
    append_string(out, to_string(*g.task));
  } else {
    out += "null";
  }
  out += ',';
  append_key(out, "source_id");
  append_string(out, g.source_id);
  out += ',';

  auto append_rows = [&](const Matrix& m) {
    out += '[';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      if (i > 0) out += ',';
      append_f32_array(out, m.row(i));
    }
    out += ']';
  };
  append_key(out, "features");
  append_rows(g.features);
  out += ',';
  append_key(out, "adjacency");
  append_rows(g.adjacency);
  out += ',';
  append_key(out, "targets");
  append_f32_array(out, g.targets);
  out += ',';
  append_key(out, "valid_mask");
  out += '[';
  for (std::size_t i = 0; i < g.valid_mask.size(); ++i) {
    if (i > 0) out += ',';
    append_int(out, g.valid_mask[i]);
  }
  out += "],";
  append_key(out, "centroids");
  out += '[';
  for (std::size_t i = 0; i < g.centroids.size(); ++i) {
    if (i > 0) out += ',';
    append_f32_array(out, g.centroids[i]);
  }
  out += "]}";
  return out;
}

namespace {

const nlohmann::json& field(const nlohmann::json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw Error(ErrorCode::FormatError, std::string("missing field '") + key + "'");
  return *it;
}

double number(const nlohmann::json& v) {
  if (!v.is_number()) throw Error(ErrorCode::FormatError, "expected a number");
  return static_cast<double>(static_cast<float>(v.get<double>()));
}

const nlohmann::json& array_of(const nlohmann::json& v, std::size_t len, const char* what) {
  if (!v.is_array() || v.size() != len) {
    throw Error(ErrorCode::FormatError, std::string(what) + " must be an array of length " + std::to_string(len));
  }
  return v;
}

Matrix read_rows(const nlohmann::json& v, Eigen::Index rows, Eigen::Index cols, const char* what) {
  Matrix m(rows, cols);
  array_of(v, static_cast<std::size_t>(rows), what);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = array_of(v[i], static_cast<std::size_t>(cols), what);
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = number(row[j]);
  }
  return m;
}

}  // namespace

FieldGraph graph_from_json(std::string_view text) {
  const nlohmann::json doc = detail::parse_json(text);
  if (!doc.is_object()) throw Error(ErrorCode::FormatError, "graph document must be an object");
  const auto& version = field(doc, "schema_version");
  if (!version.is_number_integer() || version.get<int>() != 1) {
    throw Error(ErrorCode::FormatError, "unsupported schema_version");
  }
  FieldGraph g;
  const auto& n = field(doc, "n");
  const auto& n_real = field(doc, "n_real");
  if (!n.is_number_integer() || !n_real.is_number_integer()) {
    throw Error(ErrorCode::FormatError, "n and n_real must be integers");
  }
  g.n = n.get<int>();
  g.n_real = n_real.get<int>();
  if (g.n < 1 || g.n > 100000) throw Error(ErrorCode::FormatError, "n out of range");
  const auto& task = field(doc, "task");
  if (task.is_string()) {
    try {
      g.task = parse_task(task.get<std::string>());
    } catch (const Error&) {
      throw Error(ErrorCode::FormatError, "unknown task");
    }
  } else if (!task.is_null()) {
    throw Error(ErrorCode::FormatError, "task must be a string or null");
  }
  const auto& source = field(doc, "source_id");
  if (!source.is_string()) throw Error(ErrorCode::FormatError, "source_id must be a string");
  g.source_id = source.get<std::string>();

  g.features = read_rows(field(doc, "features"), g.n, kFeatureCount, "features");
  g.adjacency = read_rows(field(doc, "adjacency"), g.n, g.n, "adjacency");
  const auto& targets = array_of(field(doc, "targets"), static_cast<std::size_t>(g.n), "targets");
  g.targets.resize(g.n);
  for (int i = 0; i < g.n; ++i) g.targets[i] = number(targets[i]);
  const auto& mask = array_of(field(doc, "valid_mask"), static_cast<std::size_t>(g.n), "valid_mask");
  g.valid_mask.resize(static_cast<std::size_t>(g.n));
  for (int i = 0; i < g.n; ++i) {
    if (!mask[i].is_number_integer()) throw Error(ErrorCode::FormatError, "valid_mask entries must be integers");
    const auto v = mask[i].get<long long>();
    if (v != 0 && v != 1) throw Error(ErrorCode::InvariantError, "valid_mask entries must be 0 or 1");
    g.valid_mask[i] = static_cast<std::uint8_t>(v);
  }
  const auto& centroids = array_of(field(doc, "centroids"), static_cast<std::size_t>(g.n), "centroids");
  g.centroids.resize(static_cast<std::size_t>(g.n));
  for (int i = 0; i < g.n; ++i) {
    const auto& c = array_of(centroids[i], 2, "centroid");
    g.centroids[i] = {number(c[0]), number(c[1])};
  }
  validate(g);
  return g;
}

void save_graph(const FieldGraph& graph, const std::filesystem::path& path) {
  validate(graph);
  detail::write_text(path, graph_to_json(graph));
}

FieldGraph load_graph(const std::filesystem::path& path) { return graph_from_json(detail::read_text(path)); }

}  // namespace fieldgraph
