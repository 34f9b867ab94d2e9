#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fieldgraph/gcn.hpp"
#include "fieldgraph/graph.hpp"
#include "fieldgraph/metrics.hpp"
#include "fieldgraph/synth.hpp"
#include "fieldgraph/train.hpp"

namespace fieldgraph::cli {

namespace fs = std::filesystem;

struct SynthOptions {
  std::size_t n = 20;
  fs::path out;
  std::uint64_t seed = 0;
  SplitFractions split;
  SynthConfig config;
};

/// Writes field_XXX.png, field_XXX_mask.png and manifest.json into `out`.
void cmd_synth(const SynthOptions& opt);

struct BuildGraphOptions {
  fs::path manifest;               // synth manifest; or
  std::vector<fs::path> images;    // explicit image/mask pairs
  std::vector<fs::path> masks;
  std::string split = "train";     // split recorded for explicit pairs
  fs::path out;
  GraphBuildOptions graph;
  int jobs = 1;
};

/// Writes <id>.json, <id>_labels.png (+ sidecar) and a graph manifest.json.
void cmd_build_graph(const BuildGraphOptions& opt);

/// One graph-manifest entry.
struct GraphEntry {
  std::string id;
  fs::path graph;
  fs::path labels;
  std::string split;
  int n_real = 0;
};

struct GraphManifest {
  fs::path dir;
  std::optional<Task> task;
  std::vector<GraphEntry> fields;

  std::vector<const GraphEntry*> split(const std::string& name) const;  // "all" selects every field
};

/// Accepts either the manifest file or the directory holding it.
GraphManifest load_graph_manifest(const fs::path& path);
std::vector<FieldGraph> load_graphs(const GraphManifest& manifest, const std::string& split);

struct TrainOptions {
  fs::path graphs;
  fs::path out;
  std::string train_split = "train";
  std::string val_split = "val";
  std::optional<Task> task;  // defaults to the manifest's task
  TrainConfig config;
  bool quiet = false;
};

/// Writes final.json, best.json and history.jsonl into `out`.
TrainResult cmd_train(const TrainOptions& opt);

struct EvaluateOptions {
  fs::path checkpoint;
  fs::path graphs;
  std::string split = "test";
  double threshold = kDefaultThreshold;
  bool pr_curve = false;
  int pr_points = 99;
  fs::path out;  // optional report path
};

struct EvaluateResult {
  EvalReport report;
  std::optional<PrCurve> curve;
};

EvaluateResult cmd_evaluate(const EvaluateOptions& opt);

/// Throws FormatError unless the model maps 9 features to one output.
void check_compatible(const GcnModel& model);

struct RenderOptions {
  fs::path image;
  fs::path labels;
  fs::path graph;
  std::optional<fs::path> checkpoint;
  std::string values = "targets";  // or "predictions"
  double threshold = kDefaultThreshold;
  fs::path out;
};

void cmd_render(const RenderOptions& opt);

struct BenchmarkOptions {
  std::optional<fs::path> checkpoint;  // fresh init from `seed` when absent
  fs::path graphs;
  std::string split = "all";
  int reps = 1000;
  int warmup = 50;
  std::uint64_t seed = 0;
};

struct BenchmarkResult {
  int reps = 0;
  int nodes = 0;
  double seconds = 0.0;
  double graphs_per_sec = 0.0;
  double ms_per_graph = 0.0;
};

/// Times the forward pass on precomputed propagation matrices, cycling
/// through the selected graphs. Warm-up passes are not timed.
BenchmarkResult run_benchmark(const std::vector<FieldGraph>& graphs, const GcnModel& model, int reps, int warmup);
BenchmarkResult cmd_benchmark(const BenchmarkOptions& opt);

/// Exit codes: 0 success, 1 runtime error, 2 usage error.
int run(int argc, char** argv);

}  // namespace fieldgraph::cli
