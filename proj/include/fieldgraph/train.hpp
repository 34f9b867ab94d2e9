#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "fieldgraph/gcn.hpp"
#include "fieldgraph/graph.hpp"

namespace fieldgraph {

struct TrainConfig {
  int batch_size = 32;
  int epochs = 200;
  double lr0 = 1e-3;
  int plateau_patience = 10;
  double plateau_factor = 0.1;
  double lr_min = 1e-6;
  double plateau_min_delta = 1e-6;
  double l2_lambda = 0.01;
  double dice_epsilon = 1e-6;
  std::uint64_t seed = 0;
  Task task = Task::classification;

  /// Throws InvalidConfig.
  void validate() const;
};

/// Soft Dice loss over valid nodes:
/// 1 - (2 sum p t + eps) / (sum p + sum t + eps). Throws EmptyMask.
double dice_loss(const Vector& pred, const Vector& target, std::span<const std::uint8_t> valid_mask,
                 double epsilon);
/// d(dice_loss)/d(pred); zero at invalid nodes.
Vector dice_loss_gradient(const Vector& pred, const Vector& target, std::span<const std::uint8_t> valid_mask,
                          double epsilon);

/// lambda * sum of squared weights over L2-flagged layers (biases excluded).
double l2_penalty(const GcnModel& model, double lambda);

/// Parameter-shaped buffer: gradients and Adam moments.
struct ParamBuffer {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static ParamBuffer zeros_like(const GcnModel& model);
  ParamBuffer& operator+=(const ParamBuffer& other);
  ParamBuffer& operator*=(double s);
  /// Flattened in layer order, weight (row-major) then bias.
  std::vector<double> flatten() const;
};

struct LossGrad {
  double dice = 0.0;
  double l2 = 0.0;
  ParamBuffer grad;
  double total() const { return dice + l2; }
};

/// Reverse-mode gradient of dice_loss + l2_penalty through model_forward.
LossGrad loss_and_gradients(const FieldGraph& graph, const GcnModel& model, double l2_lambda, double dice_epsilon);
ParamBuffer gradients(const FieldGraph& graph, const GcnModel& model, const TrainConfig& cfg);

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  ParamBuffer m;
  ParamBuffer v;
  std::int64_t t = 0;

  static AdamState for_model(const GcnModel& model);
};

/// One bias-corrected Adam update in place. Throws ShapeMismatch.
void adam_step(GcnModel& model, const ParamBuffer& grads, AdamState& state, double lr);

/// Reduce-on-plateau schedule: when the validation loss has not improved by
/// at least min_delta for `patience` epochs, lr <- max(lr * factor, lr_min)
/// and the wait counter restarts.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr0, int patience, double factor, double lr_min, double min_delta = 1e-6);

  /// Records one epoch's validation loss and returns the rate for the next epoch.
  double observe(double val_loss);
  double lr() const noexcept { return lr_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double lr_min_;
  double min_delta_;
  double best_;
  int wait_ = 0;
};

/// Replays a validation-loss history through PlateauScheduler.
double lr_on_plateau(std::span<const double> val_losses, double lr0, int patience, double factor, double lr_min);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
};

struct TrainResult {
  GcnModel final_model;
  GcnModel best_model;
  TrainHistory history;
};

/// Mean per-graph Dice loss over a dataset.
double mean_dice_loss(std::span<const FieldGraph> graphs, const GcnModel& model, double epsilon);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Seeded mini-batch Adam. Batch objective: mean per-graph Dice + L2.
/// train_loss in the history is the mean per-graph Dice seen during the epoch.
TrainResult train(std::span<const FieldGraph> train_set, std::span<const FieldGraph> val_set,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});
/// Same, starting from a given model instead of init_params(cfg.seed).
TrainResult train(std::span<const FieldGraph> train_set, std::span<const FieldGraph> val_set,
                  const TrainConfig& cfg, GcnModel initial, const EpochCallback& on_epoch = {});

/// JSON lines: {"epoch", "train_loss", "val_loss", "lr"}.
void save_history(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace fieldgraph
