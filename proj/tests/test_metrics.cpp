// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mcdn/metrics.hpp"
#include "mcdn/rng.hpp"

namespace mcdn {
namespace {

// O(P*N) pairwise count; ties score one half.
double pairwise_auroc(const std::vector<double> &s, const std::vector<int> &y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

// Average precision by scanning every distinct threshold from the top.
double threshold_auprc(const std::vector<double> &s, const std::vector<int> &y) {
  std::set<double, std::greater<>> thresholds(s.begin(), s.end());
  double positives = 0.0;
  for (int v : y)
    positives += v;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, predicted = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) {
        predicted += 1.0;
        tp += y[i];
      }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

Instance random_instance(Rng &rng) {
  Instance inst;
  const std::size_t n = 2 + rng.below(49);
  const bool coarse = rng.below(2) == 0; // coarse grid forces ties
  for (std::size_t i = 0; i < n; ++i) {
    inst.scores.push_back(coarse ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform());
    inst.labels.push_back(static_cast<int>(rng.below(2)));
  }
  inst.labels[0] = 1;
  inst.labels[1] = 0;
  return inst;
}

TEST(Metrics, ThreePointExample) {
  const std::vector<double> s{0.9, 0.8, 0.3};
  const std::vector<int> y{1, 0, 1};
  const auto r = compute_metrics(s, y);
  EXPECT_EQ(r.counts.tp, 1u);
  EXPECT_EQ(r.counts.fp, 1u);
  EXPECT_EQ(r.counts.fn, 1u);
  EXPECT_EQ(r.counts.tn, 0u);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.f1, 0.5);
  EXPECT_DOUBLE_EQ(r.accuracy, 1.0 / 3.0);
  ASSERT_TRUE(r.auroc.has_value());
  EXPECT_DOUBLE_EQ(*r.auroc, 0.5);
}

TEST(Metrics, PerfectScores) {
  const std::vector<double> s{0.9, 0.2, 0.8, 0.1};
  const std::vector<int> y{1, 0, 1, 0};
  const auto r = compute_metrics(s, y);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.precision, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.f1, 1.0);
  EXPECT_EQ(*r.auroc, 1.0);
  EXPECT_EQ(*r.auprc, 1.0);
}

TEST(Metrics, AllPositivePredictionsOnTrainingSplitBalance) {
  const std::size_t pos = 7606, neg = 79290;
  std::vector<double> s(pos + neg, 1.0);
  std::vector<int> y(pos + neg, 0);
  std::fill(y.begin(), y.begin() + pos, 1);
  const auto r = compute_metrics(s, y);
  EXPECT_EQ(r.counts.total(), 86896u);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.precision, 7606.0 / 86896.0);
  EXPECT_NEAR(r.precision, 0.0875, 5e-5);
}

TEST(Metrics, ThresholdIsInclusive) {
  const auto c = confusion(std::vector<double>{0.5, 0.4999}, std::vector<int>{1, 1});
  EXPECT_EQ(c.tp, 1u);
  EXPECT_EQ(c.fn, 1u);
}

TEST(Metrics, F1IsZeroWithoutTruePositives) {
  const auto r = compute_metrics(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0});
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_EQ(r.precision, 0.0);
}

TEST(Auroc, ClosedForms) {
  EXPECT_EQ(auroc(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0}), 1.0);
  EXPECT_EQ(auroc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, std::vector<int>{1, 0, 0, 1}), 0.5);
  EXPECT_EQ(auroc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}), 0.0);
}

TEST(Auroc, SingleClassIsUndefined) {
  EXPECT_THROW(auroc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 1}), std::domain_error);
  EXPECT_THROW(auroc(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 0}), std::domain_error);
  const auto r = compute_metrics(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 0});
  EXPECT_FALSE(r.auroc.has_value());
  EXPECT_FALSE(r.auprc.has_value());
}

TEST(Auroc, MatchesPairwiseOracle) {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(rng);
    EXPECT_NEAR(auroc(inst.scores, inst.labels), pairwise_auroc(inst.scores, inst.labels), 1e-9)
        << trial;
  }
}

TEST(Auroc, InvariantUnderMonotoneTransform) {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = random_instance(rng);
    const double before = auroc(inst.scores, inst.labels);
    for (double &s : inst.scores)
      s = std::exp(3.0 * s) - 7.0;
    EXPECT_NEAR(auroc(inst.scores, inst.labels), before, 1e-12);
  }
}

TEST(Auprc, ClosedForms) {
  EXPECT_EQ(auprc(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0}), 1.0);
  for (std::size_t m = 1; m <= 20; ++m) {
    std::vector<double> s;
    std::vector<int> y(m, 0);
    for (std::size_t i = 0; i < m; ++i)
      s.push_back(static_cast<double>(m - i));
    y[m - 1] = 1;
    EXPECT_NEAR(auprc(s, y), 1.0 / static_cast<double>(m), 1e-15) << m;
  }
}

TEST(Auprc, MatchesThresholdOracle) {
  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(rng);
    EXPECT_NEAR(auprc(inst.scores, inst.labels), threshold_auprc(inst.scores, inst.labels), 1e-9)
        << trial;
  }
}

TEST(Metrics, RejectsBadInput) {
  EXPECT_THROW(confusion(std::vector<double>{0.1}, std::vector<int>{1, 0}),
               std::invalid_argument);
  EXPECT_THROW(confusion(std::vector<double>{0.1}, std::vector<int>{2}), std::invalid_argument);
}

TEST(Metrics, JsonCarriesCounts) {
  const auto j = to_json(compute_metrics(std::vector<double>{0.9, 0.8, 0.3},
                                         std::vector<int>{1, 0, 1}));
  EXPECT_EQ(j.at("tp"), 1);
  EXPECT_EQ(j.at("f1"), 0.5);
  EXPECT_EQ(j.at("auroc"), 0.5);
}

} // namespace
} // namespace mcdn
