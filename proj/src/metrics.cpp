// SPDX-License-Identifier: Apache-2.0
#include "mcdn/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mcdn {

namespace {

void check_inputs(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("metrics: score and label counts differ");
  for (int y : labels)
    if (y != 0 && y != 1)
      throw std::invalid_argument("metrics: labels must be 0 or 1");
}

std::size_t count_positive(std::span<const int> labels) {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

} // namespace

Confusion confusion(std::span<const double> scores, std::span<const int> labels,
                    double threshold) {
  check_inputs(scores, labels);
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1)
      ++(predicted ? c.tp : c.fn);
    else
      ++(predicted ? c.fp : c.tn);
  }
  return c;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const std::size_t pos = count_positive(labels), neg = labels.size() - pos;
  if (pos == 0 || neg == 0)
    throw std::domain_error("AUROC is undefined unless both classes are present");
  // Mann-Whitney U with mid-ranks for ties.
  const auto idx = order_by_score(scores, false);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]])
      ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (labels[idx[t]] == 1)
        rank_sum += mid_rank;
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs(scores, labels);
  const std::size_t pos = count_positive(labels);
  if (pos == 0)
    throw std::domain_error("AUPRC is undefined without positives");
  const auto idx = order_by_score(scores, true);
  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      tp += labels[idx[j]] == 1 ? 1 : 0;
      ++j;
    }
    seen = j;
    const double recall = static_cast<double>(tp) / static_cast<double>(pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

MetricsReport compute_metrics(std::span<const double> scores, std::span<const int> labels) {
  MetricsReport r;
  r.counts = confusion(scores, labels);
  const auto &c = r.counts;
  const auto ratio = [](std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
  };
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  const std::size_t pos = count_positive(labels);
  if (pos > 0 && pos < labels.size())
    r.auroc = auroc(scores, labels);
  if (pos > 0)
    r.auprc = auprc(scores, labels);
  return r;
}

nlohmann::json to_json(const MetricsReport &r) {
  using nlohmann::json;
  auto optional = [](const std::optional<double> &v) { return v ? json(*v) : json(nullptr); };
  return json{{"accuracy", r.accuracy},
              {"precision", r.precision},
              {"recall", r.recall},
              {"f1", r.f1},
              {"auroc", optional(r.auroc)},
              {"auprc", optional(r.auprc)},
              {"tp", r.counts.tp},
              {"fp", r.counts.fp},
              {"tn", r.counts.tn},
              {"fn", r.counts.fn}};
}

} // namespace mcdn
