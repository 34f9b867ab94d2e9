#include <gtest/gtest.h>

#include <random>

#include "fieldgraph/metrics.hpp"
#include "test_support.hpp"

namespace fieldgraph {
namespace {

using testing::throws_code;

TEST(Binarize, ThresholdIsInclusive) {
  const std::vector<double> p{0.39, 0.40, 0.41};
  EXPECT_EQ(binarize(p, 0.4), (std::vector<std::uint8_t>{0, 1, 1}));
  EXPECT_EQ(binarize(p, 0.0), (std::vector<std::uint8_t>{1, 1, 1}));
}

TEST(Confusion, OneOfEach) {
  const std::vector<std::uint8_t> labels{1, 1, 0, 0, 1};
  const std::vector<double> targets{1, 0, 1, 0, 1};
  const std::vector<std::uint8_t> valid{1, 1, 1, 1, 0};
  EXPECT_EQ(confusion(labels, targets, valid), (ConfusionCounts{1, 1, 1, 1}));
}

TEST(Confusion, RegressionTargetsCountWhenPositive) {
  const std::vector<std::uint8_t> labels{1, 0, 1};
  const std::vector<double> targets{0.01, 0.3, 0.0};
  const std::vector<std::uint8_t> valid{1, 1, 1};
  EXPECT_EQ(confusion(labels, targets, valid), (ConfusionCounts{1, 1, 1, 0}));
  const std::vector<std::uint8_t> short_mask{1, 1};
  EXPECT_TRUE(throws_code([&] { confusion(labels, targets, short_mask); }, ErrorCode::LengthMismatch));
}

TEST(Metrics, Example) {
  const Metrics m = metrics({2, 4, 1, 10});
  EXPECT_DOUBLE_EQ(m.precision, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
  EXPECT_NEAR(m.f1, 0.444, 1e-3);
  EXPECT_DOUBLE_EQ(m.f1, 2.0 * (1.0 / 3.0) * (2.0 / 3.0) / (1.0 / 3.0 + 2.0 / 3.0));
  EXPECT_DOUBLE_EQ(m.iou, 2.0 / 7.0);
  EXPECT_FALSE(m.degenerate);
}

TEST(Metrics, DegenerateCases) {
  const Metrics none = metrics({0, 0, 0, 5});
  EXPECT_TRUE(none.degenerate);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  const Metrics no_pred = metrics({0, 0, 3, 5});
  EXPECT_TRUE(no_pred.degenerate);
  EXPECT_EQ(no_pred.recall, 0.0);
  EXPECT_EQ(no_pred.f1, 0.0);
}

TEST(Metrics, IouNeverExceedsF1) {
  std::mt19937_64 rng(61);
  std::uniform_int_distribution<int> count(0, 50);
  for (int trial = 0; trial < 500; ++trial) {
    const Metrics m = metrics({count(rng), count(rng), count(rng), count(rng)});
    EXPECT_LE(m.iou, m.f1 + 1e-15);
    EXPECT_GE(m.f1, 0.0);
    EXPECT_LE(m.f1, 1.0);
    // F1 sits between precision and recall when both are defined.
    if (!m.degenerate) {
      EXPECT_LE(m.f1, std::max(m.precision, m.recall) + 1e-15);
      EXPECT_GE(m.f1, std::min(m.precision, m.recall) - 1e-15);
    }
  }
}

TEST(PrCurve, ArgmaxMatchesExhaustiveGrid) {
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> preds(300), targets(300);
    std::vector<std::uint8_t> valid(300);
    for (std::size_t i = 0; i < 300; ++i) {
      targets[i] = unit(rng) < 0.3 ? 1.0 : 0.0;
      preds[i] = std::clamp(0.3 * targets[i] + 0.7 * unit(rng), 0.0, 1.0);
      valid[i] = i < 280;
    }
    const PrCurve curve = pr_curve(preds, targets, valid, 99);
    ASSERT_EQ(curve.points.size(), 99u);
    double best = -1.0, best_t = 0.0;
    for (int i = 1; i <= 99; ++i) {
      const double t = i / 100.0;
      int tp = 0, fp = 0, fn = 0;
      for (std::size_t k = 0; k < 280; ++k) {
        const bool p = preds[k] >= t, a = targets[k] > 0.0;
        tp += p && a;
        fp += p && !a;
        fn += !p && a;
      }
      const double f1 = 2.0 * tp + fp + fn > 0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0;
      EXPECT_NEAR(curve.points[i - 1].threshold, t, 1e-15);
      EXPECT_DOUBLE_EQ(curve.points[i - 1].f1, f1);
      if (f1 > best) {
        best = f1;
        best_t = t;
      }
    }
    EXPECT_NEAR(curve.best_threshold, best_t, 1e-15);
    EXPECT_EQ(curve.best_f1, best);
  }
}

TEST(PrCurve, RecallFallsAsThresholdRises) {
  std::mt19937_64 rng(63);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> preds(100), targets(100);
  std::vector<std::uint8_t> valid(100, 1);
  for (std::size_t i = 0; i < 100; ++i) {
    preds[i] = unit(rng);
    targets[i] = unit(rng) < 0.5;
  }
  const PrCurve c = pr_curve(preds, targets, valid, 49);
  for (std::size_t i = 1; i < c.points.size(); ++i) EXPECT_LE(c.points[i].recall, c.points[i - 1].recall);
  EXPECT_TRUE(throws_code([&] { pr_curve(preds, targets, valid, 1); }, ErrorCode::InvalidConfig));
}

TEST(Evaluate, PoolsCountsOverFields) {
  const std::vector<double> p1{0.9, 0.1, 0.5}, t1{1, 0, 0};
  const std::vector<double> p2{0.2, 0.8, 0.0}, t2{1, 1, 0};
  const std::vector<std::uint8_t> v1{1, 1, 1}, v2{1, 1, 0};
  const std::vector<ScoredField> fields{{p1, t1, v1}, {p2, t2, v2}};
  const std::vector<std::string> ids{"a", "b"};
  const EvalReport r = evaluate(fields, ids, 0.4);
  EXPECT_EQ(r.counts, (ConfusionCounts{2, 1, 1, 1}));
  EXPECT_EQ(r.per_field.size(), 2u);
  EXPECT_EQ(r.per_field[0].counts, (ConfusionCounts{1, 1, 0, 1}));
  EXPECT_EQ(r.per_field[1].source_id, "b");
  EXPECT_DOUBLE_EQ(r.metrics.f1, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(r.dice_loss, 0.5 * (r.per_field[0].dice_loss + r.per_field[1].dice_loss));

  const std::string row = table_row(r);
  EXPECT_NE(row.find("dice_loss"), std::string::npos);
  EXPECT_NE(row.find("0.6667"), std::string::npos);
  const std::string json = report_to_json(r);
  EXPECT_NE(json.find("\"per_field\""), std::string::npos);

  EXPECT_TRUE(throws_code([] { evaluate({}, {}, 0.4); }, ErrorCode::EmptyDataset));
  const std::vector<std::string> one{"a"};
  EXPECT_TRUE(throws_code([&] { evaluate(fields, one, 0.4); }, ErrorCode::LengthMismatch));
}

}  // namespace
}  // namespace fieldgraph
