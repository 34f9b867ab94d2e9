#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "cli.hpp"
#include "fieldgraph/error.hpp"
#include "fieldgraph/gcn.hpp"
#include "fieldgraph/graph.hpp"
#include "fieldgraph/metrics.hpp"
#include "fieldgraph/slic.hpp"
#include "fieldgraph/synth.hpp"
#include "fieldgraph/train.hpp"

namespace py = pybind11;
using namespace fieldgraph;

namespace {

using ImageArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

RasterImage image_from_array(const ImageArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw Error(ErrorCode::ShapeError, "expected an (H, W, 3) uint8 array");
  const auto h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  std::vector<std::uint8_t> data(a.data(), a.data() + a.size());
  return RasterImage(w, h, std::move(data));
}

BinaryMask mask_from_array(const ImageArray& a) {
  if (a.ndim() != 2) throw Error(ErrorCode::ShapeError, "expected an (H, W) mask array");
  std::vector<std::uint8_t> data(a.data(), a.data() + a.size());
  for (auto& v : data) v = v ? 1 : 0;
  return BinaryMask(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), std::move(data));
}

ImageArray image_to_array(const RasterImage& img) {
  ImageArray out({img.height(), img.width(), 3});
  std::memcpy(out.mutable_data(), img.data().data(), img.data().size());
  return out;
}

ImageArray mask_to_array(const BinaryMask& m) {
  ImageArray out({m.height(), m.width()});
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) out.mutable_at(r, c) = m.at(r, c);
  }
  return out;
}

py::array_t<std::int32_t> labels_to_array(const SuperpixelMap& map) {
  py::array_t<std::int32_t> out({map.height, map.width});
  std::memcpy(out.mutable_data(), map.labels.data(), map.labels.size() * sizeof(std::int32_t));
  return out;
}

py::array_t<std::uint8_t> valid_to_array(const FieldGraph& g) {
  py::array_t<std::uint8_t> out(static_cast<py::ssize_t>(g.valid_mask.size()));
  std::memcpy(out.mutable_data(), g.valid_mask.data(), g.valid_mask.size());
  return out;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["threshold"] = r.threshold;
  d["dice_loss"] = r.dice_loss;
  d["precision"] = r.metrics.precision;
  d["recall"] = r.metrics.recall;
  d["f1"] = r.metrics.f1;
  d["iou"] = r.metrics.iou;
  d["tp"] = r.counts.tp;
  d["fp"] = r.counts.fp;
  d["fn"] = r.counts.fn;
  d["tn"] = r.counts.tn;
  return d;
}

}  // namespace

PYBIND11_MODULE(_fieldgraph, m) {
  m.doc() = "Superpixel graph convolution for crop stress detection";

  static py::exception<Error> error(m, "FieldGraphError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::enum_<Task>(m, "Task").value("classification", Task::classification).value("regression", Task::regression);

  m.attr("CANONICAL_PARAM_COUNT") = kCanonicalParamCount;
  m.attr("DEFAULT_THRESHOLD") = kDefaultThreshold;

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("width", &SynthConfig::width)
      .def_readwrite("height", &SynthConfig::height)
      .def_readwrite("min_blobs", &SynthConfig::min_blobs)
      .def_readwrite("max_blobs", &SynthConfig::max_blobs)
      .def_readwrite("color_jitter", &SynthConfig::color_jitter)
      .def_readwrite("zero_dropout", &SynthConfig::zero_dropout);

  m.def(
      "generate_field",
      [](const SynthConfig& cfg, std::uint64_t seed) {
        const SynthField f = generate_field(cfg, seed);
        return py::make_tuple(image_to_array(f.image), mask_to_array(f.mask));
      },
      py::arg("config") = SynthConfig{}, py::arg("seed") = 0, "Returns (image HxWx3 uint8, mask HxW uint8).");

  m.def(
      "segment",
      [](const ImageArray& image, int k, double compactness) {
        return labels_to_array(segment_superpixels(image_from_array(image), {k, compactness}));
      },
      py::arg("image"), py::arg("k") = 400, py::arg("compactness") = 30.0, "Connectivity-enforced SLIC labels.");

  py::class_<FieldGraph>(m, "FieldGraph")
      .def_readonly("n", &FieldGraph::n)
      .def_readonly("n_real", &FieldGraph::n_real)
      .def_readonly("source_id", &FieldGraph::source_id)
      .def_property_readonly("features", [](const FieldGraph& g) { return g.features; })
      .def_property_readonly("adjacency", [](const FieldGraph& g) { return g.adjacency; })
      .def_property_readonly("targets", [](const FieldGraph& g) { return g.targets; })
      .def_property_readonly("valid_mask", &valid_to_array)
      .def_property_readonly("task", [](const FieldGraph& g) { return g.task; })
      .def("to_json", &graph_to_json)
      .def_static("from_json", [](const std::string& s) { return graph_from_json(s); });

  m.def(
      "build_graph",
      [](const ImageArray& image, const ImageArray& mask, Task task, int nodes, double compactness, int bins,
         const std::string& source_id) {
        GraphBuildOptions opt;
        opt.task = task;
        opt.nodes = nodes;
        opt.compactness = compactness;
        opt.bins = bins;
        BuiltField b = build_field(image_from_array(image), mask_from_array(mask), opt, source_id);
        return py::make_tuple(std::move(b.graph), labels_to_array(b.superpixels));
      },
      py::arg("image"), py::arg("mask"), py::arg("task") = Task::classification, py::arg("nodes") = 400,
      py::arg("compactness") = 30.0, py::arg("bins") = 8, py::arg("source_id") = "",
      "Returns (FieldGraph, labels).");
  m.def("save_graph", &save_graph);
  m.def("load_graph", &load_graph);

  py::class_<GcnModel>(m, "GcnModel")
      .def_property_readonly("widths", &GcnModel::widths)
      .def("param_count", [](const GcnModel& g) { return param_count(g); })
      .def("layer_param_counts", [](const GcnModel& g) { return layer_param_counts(g); })
      .def("to_json", &model_to_json)
      .def_static("from_json", [](const std::string& s) { return model_from_json(s); });

  m.def(
      "init_params", [](std::uint64_t seed) { return init_params(seed); }, py::arg("seed") = 0);
  m.def(
      "renormalize", [](const Matrix& a) { return renormalize(a).p; }, py::arg("adjacency"));
  m.def(
      "predict", [](const FieldGraph& g, const GcnModel& model) { return model_forward(g, model); },
      py::arg("graph"), py::arg("model"));
  m.def("save_checkpoint", &save_checkpoint);
  m.def("load_checkpoint", &load_checkpoint);

  m.def(
      "dice_loss",
      [](const Vector& pred, const Vector& target, const std::vector<std::uint8_t>& valid, double eps) {
        return dice_loss(pred, target, valid, eps);
      },
      py::arg("pred"), py::arg("target"), py::arg("valid_mask"), py::arg("epsilon") = 1e-6);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("lr0", &TrainConfig::lr0)
      .def_readwrite("plateau_patience", &TrainConfig::plateau_patience)
      .def_readwrite("plateau_factor", &TrainConfig::plateau_factor)
      .def_readwrite("lr_min", &TrainConfig::lr_min)
      .def_readwrite("l2_lambda", &TrainConfig::l2_lambda)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("task", &TrainConfig::task);

  m.def(
      "train",
      [](const std::vector<FieldGraph>& train_set, const std::vector<FieldGraph>& val_set, const TrainConfig& cfg) {
        TrainResult r = train(train_set, val_set, cfg);
        py::list hist;
        for (const auto& e : r.history.epochs) {
          hist.append(py::dict(py::arg("epoch") = e.epoch, py::arg("train_loss") = e.train_loss,
                               py::arg("val_loss") = e.val_loss, py::arg("lr") = e.lr));
        }
        return py::make_tuple(std::move(r.final_model), std::move(r.best_model), hist);
      },
      py::arg("train_set"), py::arg("val_set"), py::arg("config") = TrainConfig{},
      "Returns (final_model, best_model, history).");

  m.def(
      "evaluate",
      [](const std::vector<FieldGraph>& graphs, const GcnModel& model, double threshold) {
        std::vector<Vector> preds;
        std::vector<ScoredField> scored;
        std::vector<std::string> ids;
        for (const auto& g : graphs) preds.push_back(model_forward(g, model));
        for (std::size_t i = 0; i < graphs.size(); ++i) {
          scored.push_back({{preds[i].data(), static_cast<std::size_t>(preds[i].size())},
                            {graphs[i].targets.data(), static_cast<std::size_t>(graphs[i].targets.size())},
                            graphs[i].valid_mask});
          ids.push_back(graphs[i].source_id);
        }
        return report_dict(evaluate(scored, ids, threshold));
      },
      py::arg("graphs"), py::arg("model"), py::arg("threshold") = kDefaultThreshold);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "fieldgraph");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        return cli::run(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs a CLI subcommand in-process and returns its exit code.");
}
