#include "fieldgraph/gcn.hpp"

#include <cmath>
#include <random>

#include "fieldgraph/error.hpp"
#include "json_util.hpp"

namespace fieldgraph {

std::string_view to_string(Activation a) { return a == Activation::elu ? "elu" : "sigmoid"; }

std::vector<int> GcnModel::widths() const {
  std::vector<int> w;
  if (layers.empty()) return w;
  w.push_back(layers.front().in_width());
  for (const auto& l : layers) w.push_back(l.out_width());
  return w;
}

bool GcnModel::is_canonical() const {
  const auto w = widths();
  return std::equal(w.begin(), w.end(), kCanonicalWidths.begin(), kCanonicalWidths.end());
}

PropagationMatrix renormalize(const Matrix& adjacency) {
  const Eigen::Index n = adjacency.rows();
  if (adjacency.cols() != n) throw Error(ErrorCode::ShapeMismatch, "adjacency must be square");
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = adjacency(i, j);
      if (a < 0.0) throw Error(ErrorCode::NegativeWeight, "adjacency has a negative weight");
      if (j > i && a != adjacency(j, i)) throw Error(ErrorCode::AsymmetricInput, "adjacency is not symmetric");
    }
  }
  Matrix a_tilde = adjacency;
  a_tilde.diagonal().array() += 1.0;
  const Vector inv_sqrt_deg = a_tilde.rowwise().sum().array().rsqrt();
  // Elementwise with the outer product keeps P bit-for-bit symmetric.
  PropagationMatrix out;
  out.p = a_tilde.cwiseProduct(inv_sqrt_deg * inv_sqrt_deg.transpose());
  return out;
}

double elu(double v) { return v > 0.0 ? v : std::expm1(v); }

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

Matrix layer_forward(const PropagationMatrix& prop, const Matrix& x, const GcnLayer& layer) {
  if (x.cols() != layer.weight.rows() || x.rows() != prop.p.rows() || layer.bias.size() != layer.weight.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "layer input has " + std::to_string(x.cols()) +
                                              " columns, layer expects " + std::to_string(layer.weight.rows()));
  }
  // Multiply in whichever order keeps the n x n product narrow.
  Matrix z = layer.weight.rows() <= layer.weight.cols() ? Matrix((prop.p * x) * layer.weight)
                                                        : Matrix(prop.p * (x * layer.weight));
  z.rowwise() += layer.bias.transpose();
  if (layer.activation == Activation::elu) {
    z = z.unaryExpr([](double v) { return elu(v); });
  } else {
    z = z.unaryExpr([](double v) { return sigmoid(v); });
  }
  return z;
}

Vector model_forward(const PropagationMatrix& prop, const Matrix& features, const GcnModel& model) {
  validate(model);
  Matrix h = features;
  for (const auto& layer : model.layers) h = layer_forward(prop, h, layer);
  if (h.cols() != 1) throw Error(ErrorCode::ShapeMismatch, "model must end in a single output column");
  return h.col(0);
}

Vector model_forward(const FieldGraph& graph, const GcnModel& model) {
  return model_forward(renormalize(graph.adjacency), graph.features, model);
}

GcnModel init_params(std::uint64_t seed, std::span<const int> widths) {
  if (widths.size() < 2) throw Error(ErrorCode::ShapeMismatch, "need at least one layer");
  std::mt19937_64 rng(seed);
  GcnModel model;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    if (in < 1 || out < 1) throw Error(ErrorCode::ShapeMismatch, "layer widths must be positive");
    const bool last = l + 2 == widths.size();
    const double bound = std::sqrt(6.0 / (in + out));
    GcnLayer layer;
    layer.weight.resize(in, out);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < in; ++i) {
      for (Eigen::Index j = 0; j < out; ++j) layer.weight(i, j) = dist(rng);
    }
    layer.bias = Vector::Zero(out);
    layer.activation = last ? Activation::sigmoid : Activation::elu;
    layer.l2_regularized = !last;
    model.layers.push_back(std::move(layer));
  }
  return model;
}

std::vector<std::size_t> layer_param_counts(const GcnModel& model) {
  std::vector<std::size_t> counts;
  for (const auto& l : model.layers) {
    counts.push_back(static_cast<std::size_t>(l.weight.size() + l.bias.size()));
  }
  return counts;
}

std::size_t param_count(const GcnModel& model) {
  std::size_t total = 0;
  for (auto c : layer_param_counts(model)) total += c;
  return total;
}

void validate(const GcnModel& model) {
  if (model.layers.empty()) throw Error(ErrorCode::ShapeMismatch, "model has no layers");
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    if (layer.bias.size() != layer.weight.cols()) throw Error(ErrorCode::ShapeMismatch, "bias width mismatch");
    if (l > 0 && layer.in_width() != model.layers[l - 1].out_width()) {
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " input width mismatch");
    }
  }
}

std::string model_to_json(const GcnModel& model) {
  using namespace detail;
  validate(model);
  std::string out = "{";
  append_key(out, "schema_version");
  out += "1,";
  append_key(out, "widths");
  out += '[';
  const auto w = model.widths();
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i > 0) out += ',';
    append_int(out, w[i]);
  }
  out += "],";
  append_key(out, "layers");
  out += '[';
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    if (l > 0) out += ',';
    out += '{';
    append_key(out, "weight");
    out += '[';
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
      if (i > 0) out += ',';
      append_f32_array(out, layer.weight.row(i));
    }
    out += "],";
    append_key(out, "bias");
    append_f32_array(out, layer.bias);
    out += ',';
    append_key(out, "activation");
    append_string(out, to_string(layer.activation));
    out += '}';
  }
  out += "]}";
  return out;
}

GcnModel model_from_json(std::string_view text) {
  const nlohmann::json doc = detail::parse_json(text);
  auto fail = [](const std::string& why) -> void { throw Error(ErrorCode::FormatError, why); };
  GcnModel model;
  try {
    if (!doc.is_object()) fail("checkpoint must be an object");
    if (doc.at("schema_version").get<int>() != 1) fail("unsupported schema_version");
    const auto widths = doc.at("widths").get<std::vector<int>>();
    const auto& layers = doc.at("layers");
    if (widths.size() < 2 || !layers.is_array() || layers.size() + 1 != widths.size()) {
      fail("widths and layers disagree");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& jl = layers[l];
      const int in = widths[l], out = widths[l + 1];
      if (in < 1 || out < 1) fail("layer widths must be positive");
      GcnLayer layer;
      const auto& weight = jl.at("weight");
      if (!weight.is_array() || weight.size() != static_cast<std::size_t>(in)) fail("weight rows mismatch");
      layer.weight.resize(in, out);
      for (int i = 0; i < in; ++i) {
        if (!weight[i].is_array() || weight[i].size() != static_cast<std::size_t>(out)) fail("weight cols mismatch");
        for (int j = 0; j < out; ++j) {
          if (!weight[i][j].is_number()) fail("weight entries must be numbers");
          layer.weight(i, j) = static_cast<float>(weight[i][j].get<double>());
        }
      }
      const auto& bias = jl.at("bias");
      if (!bias.is_array() || bias.size() != static_cast<std::size_t>(out)) fail("bias length mismatch");
      layer.bias.resize(out);
      for (int j = 0; j < out; ++j) {
        if (!bias[j].is_number()) fail("bias entries must be numbers");
        layer.bias[j] = static_cast<float>(bias[j].get<double>());
      }
      const auto act = jl.at("activation").get<std::string>();
      if (act == "elu") {
        layer.activation = Activation::elu;
      } else if (act == "sigmoid") {
        layer.activation = Activation::sigmoid;
      } else {
        fail("unknown activation '" + act + "'");
      }
      layer.l2_regularized = l + 1 < layers.size();
      model.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, e.what());
  }
  if (model.is_canonical() && param_count(model) != kCanonicalParamCount) {
    throw Error(ErrorCode::FormatError, "canonical architecture must have 4577 parameters");
  }
  return model;
}

void save_checkpoint(const GcnModel& model, const std::filesystem::path& path) {
  detail::write_text(path, model_to_json(model));
}

GcnModel load_checkpoint(const std::filesystem::path& path) { return model_from_json(detail::read_text(path)); }

InferenceModel::InferenceModel(const GcnModel& model) {
  validate(model);
  for (const auto& l : model.layers) {
    layers_.push_back({l.weight.cast<float>(), l.bias.transpose().cast<float>(), l.activation});
  }
}

MatrixF InferenceModel::renormalize(const FieldGraph& graph) {
  MatrixF a = graph.adjacency.cast<float>();
  a.diagonal().array() += 1.0f;
  const Eigen::VectorXf d = a.rowwise().sum().array().rsqrt();
  return a.cwiseProduct(d * d.transpose());
}

Eigen::VectorXf InferenceModel::predict(const MatrixF& propagation, const MatrixF& features) const {
  MatrixF h = features;
  for (const auto& l : layers_) {
    MatrixF z = l.weight.rows() <= l.weight.cols() ? MatrixF((propagation * h) * l.weight)
                                                   : MatrixF(propagation * (h * l.weight));
    z.rowwise() += l.bias;
    if (l.activation == Activation::elu) {
      h = z.unaryExpr([](float v) { return v > 0.0f ? v : std::expm1(v); });
    } else {
      h = z.unaryExpr([](float v) { return 1.0f / (1.0f + std::exp(-v)); });
    }
  }
  return h.col(0);
}

Eigen::VectorXf InferenceModel::predict(const FieldGraph& graph) const {
  return predict(renormalize(graph), graph.features.cast<float>());
}

}  // namespace fieldgraph
