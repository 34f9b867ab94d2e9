#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fieldgraph/matrix.hpp"

namespace fieldgraph {

inline constexpr double kDefaultThreshold = 0.4;

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const noexcept { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  bool degenerate = false;  // some ratio was 0/0 and reported as 0
};

/// label = 1 iff pred >= threshold.
std::vector<std::uint8_t> binarize(std::span<const double> pred, double threshold);

/// Counts over valid nodes; any target > 0 counts as positive. Throws LengthMismatch.
ConfusionCounts confusion(std::span<const std::uint8_t> pred_labels, std::span<const double> targets,
                          std::span<const std::uint8_t> valid_mask);

Metrics metrics(const ConfusionCounts& counts);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;
  double best_threshold = 0.0;  // argmax F1, ties to the lowest threshold
  double best_f1 = 0.0;
};

/// Thresholds (i + 1) / (n + 1), i = 0..n-1, pooled over all fields.
struct ScoredField {
  std::span<const double> preds;
  std::span<const double> targets;
  std::span<const std::uint8_t> valid_mask;
};
PrCurve pr_curve(std::span<const ScoredField> fields, int n_thresholds);
PrCurve pr_curve(std::span<const double> preds, std::span<const double> targets,
                 std::span<const std::uint8_t> valid_mask, int n_thresholds);

struct FieldReport {
  std::string source_id;
  double dice_loss = 0.0;
  ConfusionCounts counts;
  Metrics metrics;
};

/// Micro-averaged metrics pooled over fields, plus per-field rows.
struct EvalReport {
  double threshold = kDefaultThreshold;
  double dice_loss = 0.0;         // mean of per-field Dice losses
  double pooled_dice_loss = 0.0;  // Dice over all valid nodes at once
  ConfusionCounts counts;
  Metrics metrics;
  std::vector<FieldReport> per_field;
};

/// Regression targets enter the confusion counts as target > 0, which is
/// exactly the classification target of the same region.
EvalReport evaluate(std::span<const ScoredField> fields, std::span<const std::string> source_ids, double threshold,
                    double dice_epsilon = 1e-6);

std::string report_to_json(const EvalReport& report, const PrCurve* curve = nullptr);
/// "dice precision recall f1 iou" row with a header line.
std::string table_row(const EvalReport& report);

}  // namespace fieldgraph
