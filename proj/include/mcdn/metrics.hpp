// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>

#include "json.hpp"

namespace mcdn {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct MetricsReport {
  Confusion counts;
  double accuracy = 0.0;
  double precision = 0.0; ///< 0 when nothing is predicted causal
  double recall = 0.0;    ///< 0 when there are no positives
  double f1 = 0.0;        ///< 0 when precision + recall is 0
  std::optional<double> auroc; ///< absent when only one class is present
  std::optional<double> auprc; ///< absent when there are no positives
};

/// Predictions are causal when score >= threshold.
Confusion confusion(std::span<const double> scores, std::span<const int> labels,
                    double threshold = 0.5);

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Throws std::domain_error unless both classes occur.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Average precision over descending distinct score thresholds. Throws
/// std::domain_error when there are no positives.
double auprc(std::span<const double> scores, std::span<const int> labels);

MetricsReport compute_metrics(std::span<const double> scores, std::span<const int> labels);

nlohmann::json to_json(const MetricsReport &report);

} // namespace mcdn
