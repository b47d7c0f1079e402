// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcdn/metrics.hpp"
#include "mcdn/model.hpp"

namespace mcdn {

/// Halves (by `factor`) the learning rate once validation F1 has gone
/// `patience` epochs without a new best, then starts counting again.
class PlateauSchedule {
public:
  PlateauSchedule(double lr, std::size_t patience, double factor);

  /// Records one epoch's F1. Returns true when the rate was just reduced.
  bool observe(double f1);
  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t epochs_since_best() const { return since_best_; }

private:
  double lr_;
  std::size_t patience_;
  double factor_;
  double best_ = -1.0;
  std::size_t since_best_ = 0;
};

/// Raised when a batch produces a non-finite loss.
class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct EpochRecord {
  std::size_t epoch = 0; ///< 1-based
  double lr = 0.0;       ///< rate used during this epoch
  double train_loss = 0.0;
  double train_focal = 0.0;
  MetricsReport valid;
  bool improved = false;
  bool lr_reduced = false;
};

nlohmann::json to_json(const EpochRecord &record);

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::vector<double> batch_losses;
  std::size_t best_epoch = 0;
  double best_f1 = -1.0;
  std::string best_checkpoint; ///< serialized model at the best epoch
};

/// Evaluation pass with dropout disabled.
MetricsReport evaluate(const Model &model, std::span<const SegmentedExample> data,
                       std::size_t batch_size = 32);

/// Fits `model` with Adam on seeded-shuffled batches, using the model's train
/// and loss config. After training the model holds the best-F1 parameters.
/// Each epoch record is passed to `on_epoch` and, if given, written to
/// `epoch_log` as one JSON line.
TrainResult train(Model &model, std::span<const SegmentedExample> train_set,
                  std::span<const SegmentedExample> valid_set, std::ostream *epoch_log = nullptr,
                  const std::function<void(const EpochRecord &)> &on_epoch = {});

} // namespace mcdn
