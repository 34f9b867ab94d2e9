#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fieldgraph/error.hpp"
#include "fieldgraph/raster.hpp"
#include "fieldgraph/render.hpp"
#include "fieldgraph/slic.hpp"

namespace fieldgraph::cli {

using ojson = nlohmann::ordered_json;

namespace {

constexpr int kManifestVersion = 1;

void write_json(const fs::path& path, const ojson& doc) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  os << doc.dump(2) << '\n';
  if (!os) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, path.string() + ": " + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
}

fs::path manifest_file(const fs::path& p) { return fs::is_directory(p) ? p / "manifest.json" : p; }

std::string field_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "field_%03zu", i);
  return buf;
}

spdlog::logger& log() {
  static auto logger = [] {
    auto l = spdlog::stderr_color_mt("fieldgraph");
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("FIELDGRAPH_LOG");
    const std::string level = env ? env : "info";
    if (level == "error") l->set_level(spdlog::level::err);
    else if (level == "debug") l->set_level(spdlog::level::debug);
    else l->set_level(spdlog::level::info);
    return l;
  }();
  return *logger;
}

}  // namespace

// ---- synth ----

void cmd_synth(const SynthOptions& opt) {
  opt.config.validate();
  const SplitIndices split = split_indices(opt.n, opt.split, opt.seed);
  ensure_dir(opt.out);

  std::vector<std::string> split_of(opt.n);
  for (auto i : split.train) split_of[i] = "train";
  for (auto i : split.val) split_of[i] = "val";
  for (auto i : split.test) split_of[i] = "test";

  ojson fields = ojson::array();
  for (std::size_t i = 0; i < opt.n; ++i) {
    const std::string id = field_id(i);
    const SynthField f = generate_field(opt.config, field_seed(opt.seed, i));
    save_image_png(f.image, opt.out / (id + ".png"));
    save_mask_png(f.mask, opt.out / (id + "_mask.png"));
    fields.push_back({{"id", id}, {"image", id + ".png"}, {"mask", id + "_mask.png"}, {"split", split_of[i]}});
    log().debug("wrote {}", id);
  }
  auto ids = [](const std::vector<std::size_t>& idx) {
    ojson a = ojson::array();
    for (auto i : idx) a.push_back(field_id(i));
    return a;
  };
  ojson doc;
  doc["schema_version"] = kManifestVersion;
  doc["kind"] = "synth";
  doc["seed"] = opt.seed;
  doc["fields"] = std::move(fields);
  doc["splits"] = {{"train", ids(split.train)}, {"val", ids(split.val)}, {"test", ids(split.test)}};
  write_json(opt.out / "manifest.json", doc);
  log().info("synth: {} fields ({} train / {} val / {} test) in {}", opt.n, split.train.size(), split.val.size(),
             split.test.size(), opt.out.string());
}

// ---- build-graph ----

namespace {

struct FieldSource {
  std::string id;
  fs::path image;
  fs::path mask;
  std::string split;
};

std::vector<FieldSource> field_sources(const BuildGraphOptions& opt) {
  std::vector<FieldSource> out;
  if (!opt.manifest.empty()) {
    const fs::path mf = manifest_file(opt.manifest);
    const auto doc = read_json(mf);
    try {
      for (const auto& f : doc.at("fields")) {
        out.push_back({f.at("id").get<std::string>(), mf.parent_path() / f.at("image").get<std::string>(),
                       mf.parent_path() / f.at("mask").get<std::string>(), f.value("split", std::string("train"))});
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::FormatError, mf.string() + ": " + e.what());
    }
  }
  if (opt.images.size() != opt.masks.size()) {
    throw Error(ErrorCode::InvalidConfig, "every --image needs a matching --mask");
  }
  for (std::size_t i = 0; i < opt.images.size(); ++i) {
    out.push_back({opt.images[i].stem().string(), opt.images[i], opt.masks[i], opt.split});
  }
  if (out.empty()) throw Error(ErrorCode::EmptyDataset, "no fields to build");
  return out;
}

}  // namespace

void cmd_build_graph(const BuildGraphOptions& opt) {
  const auto sources = field_sources(opt);
  ensure_dir(opt.out);
  std::vector<int> n_real(sources.size(), 0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= sources.size()) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        const auto& src = sources[i];
        const RasterImage image = load_image(src.image);
        const BinaryMask mask = load_mask(src.mask, image.width(), image.height());
        const BuiltField built = build_field(image, mask, opt.graph, src.id);
        save_graph(built.graph, opt.out / (src.id + ".json"));
        save_superpixel_map(built.superpixels, opt.out / (src.id + "_labels.png"));
        n_real[i] = built.graph.n_real;
        log().info("{}: n_real = {}", src.id, built.graph.n_real);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const int jobs = std::max(1, std::min<int>(opt.jobs, static_cast<int>(sources.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ojson fields = ojson::array();
  std::map<std::string, ojson> splits{{"train", ojson::array()}, {"val", ojson::array()}, {"test", ojson::array()}};
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& s = sources[i];
    fields.push_back({{"id", s.id},
                      {"graph", s.id + ".json"},
                      {"labels", s.id + "_labels.png"},
                      {"split", s.split},
                      {"n_real", n_real[i]}});
    if (!splits.contains(s.split)) splits[s.split] = ojson::array();
    splits[s.split].push_back(s.id);
  }
  ojson doc;
  doc["schema_version"] = kManifestVersion;
  doc["kind"] = "graphs";
  doc["task"] = std::string(to_string(opt.graph.task));
  doc["nodes"] = opt.graph.nodes;
  doc["fields"] = std::move(fields);
  ojson sp = ojson::object();
  for (auto& [k, v] : splits) sp[k] = std::move(v);
  doc["splits"] = std::move(sp);
  write_json(opt.out / "manifest.json", doc);
}

std::vector<const GraphEntry*> GraphManifest::split(const std::string& name) const {
  std::vector<const GraphEntry*> out;
  for (const auto& f : fields) {
    if (name == "all" || f.split == name) out.push_back(&f);
  }
  return out;
}

GraphManifest load_graph_manifest(const fs::path& path) {
  const fs::path mf = manifest_file(path);
  const auto doc = read_json(mf);
  GraphManifest m;
  m.dir = mf.parent_path();
  try {
    if (doc.value("kind", std::string()) != "graphs") {
      throw Error(ErrorCode::FormatError, mf.string() + " is not a graph manifest");
    }
    if (doc.contains("task")) m.task = parse_task(doc.at("task").get<std::string>());
    for (const auto& f : doc.at("fields")) {
      m.fields.push_back({f.at("id").get<std::string>(), m.dir / f.at("graph").get<std::string>(),
                          m.dir / f.value("labels", std::string()), f.value("split", std::string("train")),
                          f.value("n_real", 0)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, mf.string() + ": " + e.what());
  }
  return m;
}

std::vector<FieldGraph> load_graphs(const GraphManifest& manifest, const std::string& split) {
  std::vector<FieldGraph> out;
  for (const auto* e : manifest.split(split)) out.push_back(load_graph(e->graph));
  return out;
}

// ---- train ----

TrainResult cmd_train(const TrainOptions& opt) {
  const GraphManifest manifest = load_graph_manifest(opt.graphs);
  TrainConfig cfg = opt.config;
  if (opt.task) cfg.task = *opt.task;
  else if (manifest.task) cfg.task = *manifest.task;
  cfg.validate();

  const auto train_set = load_graphs(manifest, opt.train_split);
  const auto val_set = load_graphs(manifest, opt.val_split);
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "split '" + opt.train_split + "' has no graphs");
  if (val_set.empty()) throw Error(ErrorCode::EmptyDataset, "split '" + opt.val_split + "' has no graphs");
  log().info("train: {} train / {} val graphs, task {}, batch {}, epochs {}, lr {}", train_set.size(),
             val_set.size(), to_string(cfg.task), cfg.batch_size, cfg.epochs, cfg.lr0);

  const bool quiet = opt.quiet;
  TrainResult result = train(train_set, val_set, cfg, [quiet](const EpochRecord& r) {
    if (!quiet) {
      std::printf("epoch %d train_loss %.6f val_loss %.6f lr %.3g\n", r.epoch, r.train_loss, r.val_loss, r.lr);
      std::fflush(stdout);
    }
  });
  ensure_dir(opt.out);
  save_checkpoint(result.final_model, opt.out / "final.json");
  save_checkpoint(result.best_model, opt.out / "best.json");
  save_history(result.history, opt.out / "history.jsonl");
  log().info("best epoch {} val_loss {:.6f}", result.history.best_epoch, result.history.best_val_loss);
  return result;
}

// ---- evaluate ----

void check_compatible(const GcnModel& model) {
  const auto w = model.widths();
  if (w.empty() || w.front() != kFeatureCount || w.back() != 1) {
    throw Error(ErrorCode::FormatError, "checkpoint does not map 9 node features to one output");
  }
}

EvaluateResult cmd_evaluate(const EvaluateOptions& opt) {
  const GcnModel model = load_checkpoint(opt.checkpoint);
  check_compatible(model);
  const GraphManifest manifest = load_graph_manifest(opt.graphs);
  const auto graphs = load_graphs(manifest, opt.split);
  if (graphs.empty()) throw Error(ErrorCode::EmptyDataset, "split '" + opt.split + "' has no graphs");

  std::vector<Vector> preds;
  preds.reserve(graphs.size());
  std::vector<ScoredField> scored;
  std::vector<std::string> ids;
  for (const auto& g : graphs) preds.push_back(model_forward(g, model));
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const auto& g = graphs[i];
    scored.push_back({std::span<const double>(preds[i].data(), preds[i].size()),
                      std::span<const double>(g.targets.data(), g.targets.size()), g.valid_mask});
    ids.push_back(g.source_id);
  }

  EvaluateResult res;
  res.report = evaluate(scored, ids, opt.threshold);
  if (opt.pr_curve) res.curve = pr_curve(scored, opt.pr_points);
  if (!opt.out.empty()) {
    if (opt.out.has_parent_path()) ensure_dir(opt.out.parent_path());
    std::ofstream os(opt.out, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot write " + opt.out.string());
    os << report_to_json(res.report, res.curve ? &*res.curve : nullptr) << '\n';
  }
  return res;
}

// ---- render ----

void cmd_render(const RenderOptions& opt) {
  const RasterImage image = load_image(opt.image);
  const SuperpixelMap map = load_superpixel_map(opt.labels);
  const FieldGraph graph = load_graph(opt.graph);
  if (graph.n_real != map.n_regions) {
    throw Error(ErrorCode::DimensionMismatch, "graph and superpixel map disagree on the region count");
  }
  Vector values;
  if (opt.values == "targets") {
    values = graph.targets;
  } else if (opt.values == "predictions") {
    if (!opt.checkpoint) throw Error(ErrorCode::InvalidConfig, "--values predictions needs --checkpoint");
    const GcnModel model = load_checkpoint(*opt.checkpoint);
    check_compatible(model);
    values = model_forward(graph, model);
    if (graph.task.value_or(Task::classification) == Task::classification) {
      for (auto& v : values) v = v >= opt.threshold ? 1.0 : 0.0;
    }
  } else {
    throw Error(ErrorCode::InvalidConfig, "--values must be targets or predictions");
  }
  const RasterImage out = render_overlay(image, map, std::span<const double>(values.data(), values.size()));
  if (opt.out.has_parent_path()) ensure_dir(opt.out.parent_path());
  save_image_png(out, opt.out);
}

// ---- benchmark ----

BenchmarkResult run_benchmark(const std::vector<FieldGraph>& graphs, const GcnModel& model, int reps, int warmup) {
  if (graphs.empty()) throw Error(ErrorCode::EmptyDataset, "no graphs to benchmark");
  if (reps < 1) throw Error(ErrorCode::InvalidConfig, "reps must be positive");
  Eigen::setNbThreads(1);
  const InferenceModel net(model);
  std::vector<MatrixF> props, feats;
  for (const auto& g : graphs) {
    props.push_back(InferenceModel::renormalize(g));
    feats.push_back(g.features.cast<float>());
  }
  float sink = 0.0f;
  const std::size_t m = graphs.size();
  for (int i = 0; i < warmup; ++i) sink += net.predict(props[i % m], feats[i % m])(0);

  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) sink += net.predict(props[i % m], feats[i % m])(0);
  const auto t1 = std::chrono::steady_clock::now();

  BenchmarkResult r;
  r.reps = reps;
  r.nodes = graphs.front().n;
  r.seconds = std::chrono::duration<double>(t1 - t0).count();
  r.graphs_per_sec = reps / r.seconds;
  r.ms_per_graph = 1e3 * r.seconds / reps;
  if (sink == -1.0f) log().debug("sink");  // keep the passes observable
  return r;
}

BenchmarkResult cmd_benchmark(const BenchmarkOptions& opt) {
  const GcnModel model = opt.checkpoint ? load_checkpoint(*opt.checkpoint) : init_params(opt.seed);
  check_compatible(model);
  const GraphManifest manifest = load_graph_manifest(opt.graphs);
  return run_benchmark(load_graphs(manifest, opt.split), model, opt.reps, opt.warmup);
}

// ---- argument parsing ----

namespace {

std::optional<Task> task_flag(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_task(s);
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Superpixel graph convolution for crop stress detection", "fieldgraph"};
  app.require_subcommand(1);

  SynthOptions synth;
  std::string synth_out;
  auto* sy = app.add_subcommand("synth", "Generate a synthetic field dataset");
  sy->add_option("--n", synth.n, "Number of fields")->capture_default_str();
  sy->add_option("--out", synth_out, "Output directory")->required();
  sy->add_option("--seed", synth.seed, "Dataset seed")->capture_default_str();
  sy->add_option("--width", synth.config.width)->capture_default_str();
  sy->add_option("--height", synth.config.height)->capture_default_str();
  sy->add_option("--min-blobs", synth.config.min_blobs)->capture_default_str();
  sy->add_option("--max-blobs", synth.config.max_blobs)->capture_default_str();
  sy->add_option("--jitter", synth.config.color_jitter)->capture_default_str();
  sy->add_option("--zero-dropout", synth.config.zero_dropout)->capture_default_str();
  sy->add_option("--val-fraction", synth.split.val)->capture_default_str();
  sy->add_option("--test-fraction", synth.split.test)->capture_default_str();

  BuildGraphOptions build;
  std::string build_manifest, build_out, build_task = "classification";
  std::vector<std::string> build_images, build_masks;
  auto* bg = app.add_subcommand("build-graph", "Segment fields and write graph files");
  bg->add_option("--manifest", build_manifest, "Synth manifest or its directory");
  bg->add_option("--image", build_images, "Explicit field image (repeatable)");
  bg->add_option("--mask", build_masks, "Stress mask for each --image");
  bg->add_option("--split", build.split, "Split recorded for explicit fields")->capture_default_str();
  bg->add_option("--out", build_out, "Output directory")->required();
  bg->add_option("--nodes", build.graph.nodes, "Superpixels per field")->capture_default_str();
  bg->add_option("--compactness", build.graph.compactness)->capture_default_str();
  bg->add_option("--bins", build.graph.bins, "Histogram bins per channel")->capture_default_str();
  bg->add_option("--max-iter", build.graph.max_iter)->capture_default_str();
  bg->add_option("--task", build_task)->check(CLI::IsMember({"classification", "regression"}))->capture_default_str();
  bg->add_option("--jobs", build.jobs, "Parallel fields")->capture_default_str();

  TrainOptions tr;
  std::string tr_graphs, tr_out, tr_task;
  auto* tc = app.add_subcommand("train", "Train the GCN");
  tc->add_option("--graphs", tr_graphs, "Graph manifest or its directory")->required();
  tc->add_option("--out", tr_out, "Checkpoint directory")->required();
  tc->add_option("--task", tr_task)->check(CLI::IsMember({"classification", "regression"}));
  tc->add_option("--train-split", tr.train_split)->capture_default_str();
  tc->add_option("--val-split", tr.val_split)->capture_default_str();
  tc->add_option("--batch-size", tr.config.batch_size)->capture_default_str();
  tc->add_option("--epochs", tr.config.epochs)->capture_default_str();
  tc->add_option("--lr", tr.config.lr0)->capture_default_str();
  tc->add_option("--patience", tr.config.plateau_patience)->capture_default_str();
  tc->add_option("--factor", tr.config.plateau_factor)->capture_default_str();
  tc->add_option("--lr-min", tr.config.lr_min)->capture_default_str();
  tc->add_option("--l2", tr.config.l2_lambda)->capture_default_str();
  tc->add_option("--seed", tr.config.seed)->capture_default_str();
  tc->add_flag("--quiet", tr.quiet, "Suppress per-epoch lines");

  EvaluateOptions ev;
  std::string ev_ckpt, ev_graphs, ev_out;
  auto* ec = app.add_subcommand("evaluate", "Score a checkpoint on a split");
  ec->add_option("--checkpoint", ev_ckpt)->required();
  ec->add_option("--graphs", ev_graphs, "Graph manifest or its directory")->required();
  ec->add_option("--split", ev.split, "train, val, test or all")->capture_default_str();
  ec->add_option("--threshold", ev.threshold)->capture_default_str();
  ec->add_flag("--pr-curve", ev.pr_curve, "Sweep thresholds and report the best F1");
  ec->add_option("--pr-points", ev.pr_points)->capture_default_str();
  ec->add_option("--out", ev_out, "Report JSON path");

  RenderOptions rd;
  std::string rd_image, rd_labels, rd_graph, rd_ckpt, rd_out;
  auto* rc = app.add_subcommand("render", "Draw node values over a field");
  rc->add_option("--image", rd_image)->required();
  rc->add_option("--labels", rd_labels, "Superpixel label PNG")->required();
  rc->add_option("--graph", rd_graph)->required();
  rc->add_option("--checkpoint", rd_ckpt);
  rc->add_option("--values", rd.values)->check(CLI::IsMember({"targets", "predictions"}))->capture_default_str();
  rc->add_option("--threshold", rd.threshold)->capture_default_str();
  rc->add_option("--out", rd_out)->required();

  BenchmarkOptions bm;
  std::string bm_ckpt, bm_graphs;
  auto* bc = app.add_subcommand("benchmark", "Time single-threaded forward passes");
  bc->add_option("--checkpoint", bm_ckpt);
  bc->add_option("--graphs", bm_graphs, "Graph manifest or its directory")->required();
  bc->add_option("--split", bm.split)->capture_default_str();
  bc->add_option("--reps", bm.reps)->capture_default_str();
  bc->add_option("--warmup", bm.warmup)->capture_default_str();
  bc->add_option("--seed", bm.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc_ = app.exit(e);
    return rc_ == 0 ? 0 : 2;
  }

  try {
    if (*sy) {
      synth.out = synth_out;
      cmd_synth(synth);
    } else if (*bg) {
      build.manifest = build_manifest;
      build.out = build_out;
      build.graph.task = parse_task(build_task);
      build.images.assign(build_images.begin(), build_images.end());
      build.masks.assign(build_masks.begin(), build_masks.end());
      if (build.manifest.empty() && build.images.empty()) {
        std::fprintf(stderr, "build-graph: give --manifest or --image/--mask pairs\n");
        return 2;
      }
      cmd_build_graph(build);
    } else if (*tc) {
      tr.graphs = tr_graphs;
      tr.out = tr_out;
      tr.task = task_flag(tr_task);
      cmd_train(tr);
    } else if (*ec) {
      ev.checkpoint = ev_ckpt;
      ev.graphs = ev_graphs;
      ev.out = ev_out;
      const auto res = cmd_evaluate(ev);
      std::fputs(table_row(res.report).c_str(), stdout);
      if (res.curve) {
        std::printf("best_threshold %.4f best_f1 %.4f\n", res.curve->best_threshold, res.curve->best_f1);
      }
    } else if (*rc) {
      rd.image = rd_image;
      rd.labels = rd_labels;
      rd.graph = rd_graph;
      if (!rd_ckpt.empty()) rd.checkpoint = rd_ckpt;
      rd.out = rd_out;
      cmd_render(rd);
    } else if (*bc) {
      if (!bm_ckpt.empty()) bm.checkpoint = bm_ckpt;
      bm.graphs = bm_graphs;
      const auto r = cmd_benchmark(bm);
      std::printf("reps %d nodes %d seconds %.4f graphs_per_sec %.1f ms_per_graph %.4f\n", r.reps, r.nodes,
                  r.seconds, r.graphs_per_sec, r.ms_per_graph);
    }
  } catch (const Error& e) {
    log().error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    log().error("{}", e.what());
    return 1;
  }
  return 0;
}

}  // namespace fieldgraph::cli
