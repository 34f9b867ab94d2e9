#include "fieldgraph/metrics.hpp"

#include <cstdio>
#include <nlohmann/json.hpp>

#include "fieldgraph/error.hpp"
#include "fieldgraph/train.hpp"

namespace fieldgraph {

std::vector<std::uint8_t> binarize(std::span<const double> pred, double threshold) {
  std::vector<std::uint8_t> labels(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) labels[i] = pred[i] >= threshold ? 1 : 0;
  return labels;
}

ConfusionCounts confusion(std::span<const std::uint8_t> pred_labels, std::span<const double> targets,
                          std::span<const std::uint8_t> valid_mask) {
  if (pred_labels.size() != targets.size() || targets.size() != valid_mask.size()) {
    throw Error(ErrorCode::LengthMismatch, "labels, targets and mask lengths differ");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!valid_mask[i]) continue;
    const bool predicted = pred_labels[i] != 0;
    const bool actual = targets[i] > 0.0;
    if (predicted && actual) {
      ++c.tp;
    } else if (predicted) {
      ++c.fp;
    } else if (actual) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

Metrics metrics(const ConfusionCounts& c) {
  Metrics m;
  auto ratio = [&m](double num, double den) {
    if (den == 0.0) {
      m.degenerate = true;
      return 0.0;
    }
    return num / den;
  };
  const auto tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  // Count forms of the harmonic mean and Jaccard index.
  m.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  m.iou = ratio(tp, tp + fp + fn);
  return m;
}

PrCurve pr_curve(std::span<const ScoredField> fields, int n_thresholds) {
  if (n_thresholds < 2) throw Error(ErrorCode::InvalidConfig, "need at least 2 thresholds");
  PrCurve curve;
  curve.best_f1 = -1.0;
  for (int i = 0; i < n_thresholds; ++i) {
    const double t = static_cast<double>(i + 1) / static_cast<double>(n_thresholds + 1);
    ConfusionCounts total;
    for (const auto& f : fields) total += confusion(binarize(f.preds, t), f.targets, f.valid_mask);
    const Metrics m = metrics(total);
    curve.points.push_back({t, m.precision, m.recall, m.f1});
    if (m.f1 > curve.best_f1) {
      curve.best_f1 = m.f1;
      curve.best_threshold = t;
    }
  }
  return curve;
}

PrCurve pr_curve(std::span<const double> preds, std::span<const double> targets,
                 std::span<const std::uint8_t> valid_mask, int n_thresholds) {
  const ScoredField field{preds, targets, valid_mask};
  return pr_curve(std::span<const ScoredField>(&field, 1), n_thresholds);
}

EvalReport evaluate(std::span<const ScoredField> fields, std::span<const std::string> source_ids, double threshold,
                    double dice_epsilon) {
  if (fields.empty()) throw Error(ErrorCode::EmptyDataset, "nothing to evaluate");
  if (source_ids.size() != fields.size()) throw Error(ErrorCode::LengthMismatch, "one source id per field");
  EvalReport report;
  report.threshold = threshold;
  double dice_sum = 0.0;
  double intersection = 0.0, mass = 0.0;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    const auto& f = fields[k];
    if (f.preds.size() != f.targets.size() || f.preds.size() != f.valid_mask.size()) {
      throw Error(ErrorCode::LengthMismatch, "field '" + source_ids[k] + "' has mismatched lengths");
    }
    FieldReport row;
    row.source_id = source_ids[k];
    const Vector pred = Eigen::Map<const Vector>(f.preds.data(), static_cast<Eigen::Index>(f.preds.size()));
    const Vector target = Eigen::Map<const Vector>(f.targets.data(), static_cast<Eigen::Index>(f.targets.size()));
    row.dice_loss = dice_loss(pred, target, f.valid_mask, dice_epsilon);
    row.counts = confusion(binarize(f.preds, threshold), f.targets, f.valid_mask);
    row.metrics = metrics(row.counts);
    for (std::size_t i = 0; i < f.preds.size(); ++i) {
      if (!f.valid_mask[i]) continue;
      intersection += f.preds[i] * f.targets[i];
      mass += f.preds[i] + f.targets[i];
    }
    dice_sum += row.dice_loss;
    report.counts += row.counts;
    report.per_field.push_back(std::move(row));
  }
  report.dice_loss = dice_sum / static_cast<double>(fields.size());
  report.pooled_dice_loss = 1.0 - (2.0 * intersection + dice_epsilon) / (mass + dice_epsilon);
  report.metrics = metrics(report.counts);
  return report;
}

namespace {

nlohmann::ordered_json counts_json(const ConfusionCounts& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

void put_metrics(nlohmann::ordered_json& j, const Metrics& m) {
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["iou"] = m.iou;
  j["degenerate"] = m.degenerate;
}

}  // namespace

std::string report_to_json(const EvalReport& report, const PrCurve* curve) {
  nlohmann::ordered_json j;
  j["threshold"] = report.threshold;
  j["dice_loss"] = report.dice_loss;
  j["pooled_dice_loss"] = report.pooled_dice_loss;
  put_metrics(j, report.metrics);
  j["counts"] = counts_json(report.counts);
  auto& rows = j["per_field"] = nlohmann::ordered_json::array();
  for (const auto& f : report.per_field) {
    nlohmann::ordered_json row;
    row["source_id"] = f.source_id;
    row["dice_loss"] = f.dice_loss;
    put_metrics(row, f.metrics);
    row["counts"] = counts_json(f.counts);
    rows.push_back(std::move(row));
  }
  if (curve != nullptr) {
    auto& pc = j["pr_curve"];
    pc["best_threshold"] = curve->best_threshold;
    pc["best_f1"] = curve->best_f1;
    auto& pts = pc["points"] = nlohmann::ordered_json::array();
    for (const auto& p : curve->points) {
      pts.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}});
    }
  }
  return j.dump(2);
}

std::string table_row(const EvalReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-10s %-10s %-10s %-10s %-10s\n%-10.4f %-10.4f %-10.4f %-10.4f %-10.4f\n",
                "dice_loss", "precision", "recall", "f1", "iou", report.dice_loss, report.metrics.precision,
                report.metrics.recall, report.metrics.f1, report.metrics.iou);
  return buf;
}

}  // namespace fieldgraph
