#include "fieldgraph/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "fieldgraph/error.hpp"
#include "json_util.hpp"

namespace fieldgraph {

void TrainConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InvalidConfig, why); };
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (!(lr0 >= 0.0) || !(lr_min >= 0.0)) fail("learning rates must be non-negative");
  if (plateau_patience < 1) fail("plateau_patience must be >= 1");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) fail("plateau_factor must lie in (0, 1)");
  if (!(l2_lambda >= 0.0)) fail("l2_lambda must be non-negative");
  if (!(dice_epsilon >= 0.0)) fail("dice_epsilon must be non-negative");
}

namespace {

void check_loss_inputs(const Vector& pred, const Vector& target, std::span<const std::uint8_t> valid_mask) {
  if (pred.size() != target.size() || static_cast<std::size_t>(pred.size()) != valid_mask.size()) {
    throw Error(ErrorCode::ShapeMismatch, "prediction, target and mask lengths differ");
  }
  if (std::none_of(valid_mask.begin(), valid_mask.end(), [](std::uint8_t v) { return v != 0; })) {
    throw Error(ErrorCode::EmptyMask, "no valid nodes");
  }
}

struct DiceSums {
  double intersection = 0.0;
  double total = 0.0;
};

DiceSums dice_sums(const Vector& pred, const Vector& target, std::span<const std::uint8_t> valid_mask) {
  DiceSums s;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    if (!valid_mask[i]) continue;
    s.intersection += pred[i] * target[i];
    s.total += pred[i] + target[i];
  }
  return s;
}

}  // namespace

double dice_loss(const Vector& pred, const Vector& target, std::span<const std::uint8_t> valid_mask,
                 double epsilon) {
  check_loss_inputs(pred, target, valid_mask);
  const DiceSums s = dice_sums(pred, target, valid_mask);
  return 1.0 - (2.0 * s.intersection + epsilon) / (s.total + epsilon);
}

Vector dice_loss_gradient(const Vector& pred, const Vector& target, std::span<const std::uint8_t> valid_mask,
                          double epsilon) {
  check_loss_inputs(pred, target, valid_mask);
  const DiceSums s = dice_sums(pred, target, valid_mask);
  const double num = 2.0 * s.intersection + epsilon;
  const double den = s.total + epsilon;
  Vector g = Vector::Zero(pred.size());
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    if (valid_mask[i]) g[i] = -(2.0 * target[i] * den - num) / (den * den);
  }
  return g;
}

double l2_penalty(const GcnModel& model, double lambda) {
  double sum = 0.0;
  for (const auto& layer : model.layers) {
    if (layer.l2_regularized) sum += layer.weight.squaredNorm();
  }
  return lambda * sum;
}

ParamBuffer ParamBuffer::zeros_like(const GcnModel& model) {
  ParamBuffer b;
  for (const auto& l : model.layers) {
    b.weights.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    b.biases.push_back(Vector::Zero(l.bias.size()));
  }
  return b;
}

ParamBuffer& ParamBuffer::operator+=(const ParamBuffer& other) {
  if (other.weights.size() != weights.size()) throw Error(ErrorCode::ShapeMismatch, "parameter buffers differ");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

ParamBuffer& ParamBuffer::operator*=(double s) {
  for (auto& w : weights) w *= s;
  for (auto& b : biases) b *= s;
  return *this;
}

std::vector<double> ParamBuffer::flatten() const {
  std::vector<double> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].data(), weights[l].data() + weights[l].size());
    out.insert(out.end(), biases[l].data(), biases[l].data() + biases[l].size());
  }
  return out;
}

LossGrad loss_and_gradients(const FieldGraph& graph, const GcnModel& model, double l2_lambda, double dice_epsilon) {
  validate(model);
  if (graph.features.cols() != model.layers.front().in_width()) {
    throw Error(ErrorCode::ShapeMismatch, "graph feature width does not match the model input");
  }
  if (model.layers.back().out_width() != 1) throw Error(ErrorCode::ShapeMismatch, "model must have one output");
  const Matrix p = renormalize(graph.adjacency).p;
  const std::size_t depth = model.layers.size();

  // Forward pass, keeping P*H_{l-1} and the pre-activations.
  std::vector<Matrix> propagated(depth);
  std::vector<Matrix> preact(depth);
  Matrix h = graph.features;
  for (std::size_t l = 0; l < depth; ++l) {
    const auto& layer = model.layers[l];
    propagated[l] = p * h;
    preact[l] = propagated[l] * layer.weight;
    preact[l].rowwise() += layer.bias.transpose();
    h = layer.activation == Activation::elu ? Matrix(preact[l].unaryExpr([](double v) { return elu(v); }))
                                            : Matrix(preact[l].unaryExpr([](double v) { return sigmoid(v); }));
  }
  const Vector pred = h.col(0);

  LossGrad out;
  out.dice = dice_loss(pred, graph.targets, graph.valid_mask, dice_epsilon);
  out.l2 = l2_penalty(model, l2_lambda);
  out.grad = ParamBuffer::zeros_like(model);

  Matrix upstream = dice_loss_gradient(pred, graph.targets, graph.valid_mask, dice_epsilon);
  for (std::size_t l = depth; l-- > 0;) {
    const auto& layer = model.layers[l];
    Matrix dz = upstream;
    if (layer.activation == Activation::elu) {
      dz.array() *= preact[l].unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); }).array();
    } else {
      dz.array() *= preact[l].unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 - s);
      }).array();
    }
    out.grad.weights[l] = propagated[l].transpose() * dz;
    out.grad.biases[l] = dz.colwise().sum().transpose();
    if (l > 0) upstream = p.transpose() * (dz * layer.weight.transpose());
  }
  for (std::size_t l = 0; l < depth; ++l) {
    if (model.layers[l].l2_regularized) out.grad.weights[l] += 2.0 * l2_lambda * model.layers[l].weight;
  }
  return out;
}

ParamBuffer gradients(const FieldGraph& graph, const GcnModel& model, const TrainConfig& cfg) {
  return loss_and_gradients(graph, model, cfg.l2_lambda, cfg.dice_epsilon).grad;
}

AdamState AdamState::for_model(const GcnModel& model) {
  return {ParamBuffer::zeros_like(model), ParamBuffer::zeros_like(model), 0};
}

void adam_step(GcnModel& model, const ParamBuffer& grads, AdamState& state, double lr) {
  const std::size_t depth = model.layers.size();
  auto same_shape = [&](const ParamBuffer& b) {
    if (b.weights.size() != depth || b.biases.size() != depth) return false;
    for (std::size_t l = 0; l < depth; ++l) {
      if (b.weights[l].rows() != model.layers[l].weight.rows() || b.weights[l].cols() != model.layers[l].weight.cols() ||
          b.biases[l].size() != model.layers[l].bias.size()) {
        return false;
      }
    }
    return true;
  };
  if (!same_shape(grads) || !same_shape(state.m) || !same_shape(state.v)) {
    throw Error(ErrorCode::ShapeMismatch, "Adam state or gradients do not match the model");
  }

  ++state.t;
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, static_cast<double>(state.t));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = AdamState::kBeta1 * m + (1.0 - AdamState::kBeta1) * g;
    v = AdamState::kBeta2 * v + (1.0 - AdamState::kBeta2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + AdamState::kEps);
  };
  for (std::size_t l = 0; l < depth; ++l) {
    update(model.layers[l].weight, grads.weights[l], state.m.weights[l], state.v.weights[l]);
    update(model.layers[l].bias, grads.biases[l], state.m.biases[l], state.v.biases[l]);
  }
}

PlateauScheduler::PlateauScheduler(double lr0, int patience, double factor, double lr_min, double min_delta)
    : lr_(lr0),
      patience_(patience),
      factor_(factor),
      lr_min_(lr_min),
      min_delta_(min_delta),
      best_(std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::observe(double val_loss) {
  if (best_ - val_loss >= min_delta_ || std::isinf(best_)) {
    best_ = val_loss;
    wait_ = 0;
    return lr_;
  }
  if (++wait_ >= patience_) {
    lr_ = std::min(lr_, std::max(lr_ * factor_, lr_min_));
    wait_ = 0;
  }
  return lr_;
}

double lr_on_plateau(std::span<const double> val_losses, double lr0, int patience, double factor, double lr_min) {
  PlateauScheduler sched(lr0, patience, factor, lr_min);
  for (double v : val_losses) sched.observe(v);
  return sched.lr();
}

double mean_dice_loss(std::span<const FieldGraph> graphs, const GcnModel& model, double epsilon) {
  if (graphs.empty()) throw Error(ErrorCode::EmptyDataset, "no graphs to evaluate");
  double sum = 0.0;
  for (const auto& g : graphs) sum += dice_loss(model_forward(g, model), g.targets, g.valid_mask, epsilon);
  return sum / static_cast<double>(graphs.size());
}

TrainResult train(std::span<const FieldGraph> train_set, std::span<const FieldGraph> val_set, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  return train(train_set, val_set, cfg, init_params(cfg.seed), on_epoch);
}

TrainResult train(std::span<const FieldGraph> train_set, std::span<const FieldGraph> val_set, const TrainConfig& cfg,
                  GcnModel initial, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  if (val_set.empty()) throw Error(ErrorCode::EmptyDataset, "validation set is empty");
  for (const auto* set : {&train_set, &val_set}) {
    for (const auto& g : *set) {
      if (!g.task.has_value() || *g.task != cfg.task) {
        throw Error(ErrorCode::TaskMismatch, "graph '" + g.source_id + "' does not carry " +
                                                 std::string(to_string(cfg.task)) + " targets");
      }
    }
  }

  TrainResult result;
  GcnModel& model = result.final_model;
  model = std::move(initial);
  validate(model);
  AdamState adam = AdamState::for_model(model);
  PlateauScheduler sched(cfg.lr0, cfg.plateau_patience, cfg.plateau_factor, cfg.lr_min, cfg.plateau_min_delta);
  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eedULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  result.best_model = model;
  result.history.best_val_loss = std::numeric_limits<double>::infinity();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr = sched.lr();
    std::shuffle(order.begin(), order.end(), rng);
    double dice_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      ParamBuffer acc = ParamBuffer::zeros_like(model);
      for (std::size_t i = start; i < stop; ++i) {
        LossGrad lg = loss_and_gradients(train_set[order[i]], model, 0.0, cfg.dice_epsilon);
        acc += lg.grad;
        dice_sum += lg.dice;
      }
      acc *= 1.0 / static_cast<double>(stop - start);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        if (model.layers[l].l2_regularized) acc.weights[l] += 2.0 * cfg.l2_lambda * model.layers[l].weight;
      }
      adam_step(model, acc, adam, lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = dice_sum / static_cast<double>(order.size());
    rec.val_loss = mean_dice_loss(val_set, model, cfg.dice_epsilon);
    rec.lr = lr;
    result.history.epochs.push_back(rec);
    if (rec.val_loss < result.history.best_val_loss) {
      result.history.best_val_loss = rec.val_loss;
      result.history.best_epoch = epoch;
      result.best_model = model;
    }
    sched.observe(rec.val_loss);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

void save_history(const TrainHistory& history, const std::filesystem::path& path) {
  std::string text;
  for (const auto& e : history.epochs) {
    const nlohmann::ordered_json line = {
        {"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}, {"lr", e.lr}};
    text += line.dump();
    text += '\n';
  }
  detail::write_text(path, text);
}

}  // namespace fieldgraph
