// SPDX-License-Identifier: Apache-2.0
#include "mcdn/trainer.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mcdn/checkpoint.hpp"
#include "mcdn/optim.hpp"

namespace mcdn {

PlateauSchedule::PlateauSchedule(double lr, std::size_t patience, double factor)
    : lr_(lr), patience_(patience), factor_(factor) {
  if (lr <= 0.0 || patience == 0 || factor <= 0.0 || factor > 1.0)
    throw std::invalid_argument("PlateauSchedule: invalid settings");
}

bool PlateauSchedule::observe(double f1) {
  if (f1 > best_) {
    best_ = f1;
    since_best_ = 0;
    return false;
  }
  if (++since_best_ >= patience_) {
    lr_ *= factor_;
    since_best_ = 0;
    return true;
  }
  return false;
}

nlohmann::json to_json(const EpochRecord &r) {
  auto j = nlohmann::json{{"epoch", r.epoch},
                          {"lr", r.lr},
                          {"train_loss", r.train_loss},
                          {"train_focal", r.train_focal},
                          {"valid_F1", r.valid.f1},
                          {"improved", r.improved},
                          {"lr_reduced", r.lr_reduced}};
  j["valid"] = to_json(r.valid);
  return j;
}

MetricsReport evaluate(const Model &model, std::span<const SegmentedExample> data,
                       std::size_t batch_size) {
  std::vector<int> labels;
  labels.reserve(data.size());
  for (const auto &ex : data) {
    if (!ex.label)
      throw std::invalid_argument("evaluate: every example needs a label");
    labels.push_back(*ex.label);
  }
  std::vector<double> scores;
  scores.reserve(data.size());
  for (const auto &p : model.predict(data, batch_size))
    scores.push_back(p[kCausalClass]);
  return compute_metrics(scores, labels);
}

namespace {

std::string parameter_norms(const Model &model) {
  std::ostringstream os;
  for (const auto &p : model.params().entries()) {
    double sq = 0.0;
    for (double v : p.value.data())
      sq += v * v;
    os << "\n  " << p.name << " |w|=" << std::sqrt(sq);
    if (p.value.has_grad()) {
      double gsq = 0.0;
      for (double g : p.value.grad())
        gsq += g * g;
      os << " |g|=" << std::sqrt(gsq);
    }
  }
  return os.str();
}

} // namespace

TrainResult train(Model &model, std::span<const SegmentedExample> train_set,
                  std::span<const SegmentedExample> valid_set, std::ostream *epoch_log,
                  const std::function<void(const EpochRecord &)> &on_epoch) {
  if (train_set.empty() || valid_set.empty())
    throw std::invalid_argument("train: training and validation sets must be nonempty");
  for (const auto &ex : train_set)
    if (!ex.label)
      throw std::invalid_argument("train: every training example needs a label");

  const TrainConfig cfg = model.config().train;
  Rng root(cfg.seed);
  Rng shuffle_rng = root.fork(1);
  Rng dropout_rng = root.fork(2);
  const DropoutContext dropout{model.config().model.dropout, &dropout_rng, true};

  std::vector<Tensor> params = model.params().trainable();
  AdamState adam;
  PlateauSchedule schedule(cfg.lr, cfg.patience, cfg.lr_decay);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    record.lr = schedule.lr();
    const AdamConfig adam_cfg{schedule.lr(), 0.9, 0.999, 1e-8};
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0, focal_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      std::vector<SegmentedExample> chunk;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch); ++i)
        chunk.push_back(train_set[order[i]]);
      const auto batch = model.encode(chunk);
      model.params().zero_grad();
      auto obj = model.objective(batch, dropout);
      const double loss = obj.total.item();
      if (!std::isfinite(loss))
        throw TrainingError("non-finite loss " + std::to_string(loss) + " at epoch " +
                            std::to_string(epoch) + ", batch " + std::to_string(batches) +
                            "; parameter norms:" + parameter_norms(model));
      obj.total.backward();
      clip_global_norm(params, cfg.clip_norm);
      adam_step(params, adam, adam_cfg);
      result.batch_losses.push_back(loss);
      loss_sum += loss;
      focal_sum += obj.focal;
      ++batches;
    }
    record.train_loss = loss_sum / static_cast<double>(batches);
    record.train_focal = focal_sum / static_cast<double>(batches);
    record.valid = evaluate(model, valid_set, cfg.batch);
    record.improved = record.valid.f1 > result.best_f1;
    if (record.improved) {
      result.best_f1 = record.valid.f1;
      result.best_epoch = epoch;
      result.best_checkpoint = serialize_model(model);
    }
    record.lr_reduced = schedule.observe(record.valid.f1);
    if (epoch_log)
      *epoch_log << to_json(record).dump() << '\n' << std::flush;
    if (on_epoch)
      on_epoch(record);
    result.epochs.push_back(record);
  }
  restore_parameters(model, result.best_checkpoint);
  return result;
}

} // namespace mcdn
