// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "mcdn/checkpoint.hpp"
#include "mcdn/diagnostics.hpp"
#include "mcdn/synthetic.hpp"
#include "mcdn/trainer.hpp"

namespace mcdn {
namespace {

Config tiny_config() {
  auto c = reduced_config();
  c.model.d = 8;
  c.model.n_blocks = 1;
  c.model.k = 6;
  c.model.dg = 4;
  c.train.batch = 8;
  c.train.epochs = 3;
  c.train.lr = 1e-3;
  return c;
}

Model tiny_model(const std::vector<SegmentedExample> &data, std::uint64_t seed = 1,
                 Config c = tiny_config()) {
  return Model(c, build_vocab(data, nullptr), seed);
}

// ---------------------------------------------------------------- schedule

TEST(PlateauSchedule, HalvesAfterTwoStaleEpochs) {
  PlateauSchedule s(1e-4, 2, 0.5);
  const std::vector<double> f1{0.50, 0.60, 0.59, 0.58};
  std::vector<bool> reduced;
  for (double f : f1)
    reduced.push_back(s.observe(f));
  EXPECT_EQ(reduced, (std::vector<bool>{false, false, false, true}));
  EXPECT_DOUBLE_EQ(s.lr(), 5e-5);
  EXPECT_EQ(s.best(), 0.60);
  EXPECT_EQ(s.epochs_since_best(), 0u);
}

TEST(PlateauSchedule, TiesDoNotCountAsImprovement) {
  PlateauSchedule s(1.0, 2, 0.5);
  s.observe(0.7);
  EXPECT_FALSE(s.observe(0.7));
  EXPECT_TRUE(s.observe(0.7));
  EXPECT_FALSE(s.observe(0.7));
  EXPECT_TRUE(s.observe(0.7));
  EXPECT_DOUBLE_EQ(s.lr(), 0.25);
  EXPECT_FALSE(s.observe(0.71));
  EXPECT_DOUBLE_EQ(s.lr(), 0.25);
}

TEST(PlateauSchedule, RejectsBadSettings) {
  EXPECT_THROW(PlateauSchedule(0.0, 2, 0.5), std::invalid_argument);
  EXPECT_THROW(PlateauSchedule(1e-4, 0, 0.5), std::invalid_argument);
  EXPECT_THROW(PlateauSchedule(1e-4, 2, 1.5), std::invalid_argument);
}

// ---------------------------------------------------------------- training

TEST(Train, SameSeedGivesIdenticalLosses) {
  const auto data = make_marker_dataset(24, 3);
  auto a = tiny_model(data), b = tiny_model(data);
  const auto ra = train(a, data, data);
  const auto rb = train(b, data, data);
  ASSERT_EQ(ra.batch_losses.size(), 9u);
  EXPECT_EQ(ra.batch_losses, rb.batch_losses);
  EXPECT_EQ(serialize_model(a), serialize_model(b));
}

TEST(Train, DifferentSeedGivesDifferentLosses) {
  const auto data = make_marker_dataset(24, 3);
  auto a = tiny_model(data);
  auto c = tiny_config();
  c.train.seed = 2;
  auto b = tiny_model(data, 1, c);
  EXPECT_NE(train(a, data, data).batch_losses, train(b, data, data).batch_losses);
}

TEST(Train, LearningRateOnlyFallsAtPlateaus) {
  const auto data = make_marker_dataset(16, 4);
  auto c = tiny_config();
  c.train.epochs = 8;
  auto model = tiny_model(data, 2, c);
  const auto r = train(model, data, data);
  ASSERT_EQ(r.epochs.size(), 8u);
  for (std::size_t i = 1; i < r.epochs.size(); ++i) {
    const auto &prev = r.epochs[i - 1], &cur = r.epochs[i];
    if (prev.lr_reduced)
      EXPECT_DOUBLE_EQ(cur.lr, prev.lr * 0.5);
    else
      EXPECT_EQ(cur.lr, prev.lr);
  }
}

TEST(Train, EndsAtBestEpochParameters) {
  const auto data = make_marker_dataset(16, 5);
  auto model = tiny_model(data, 3);
  const auto r = train(model, data, data);
  ASSERT_GE(r.best_epoch, 1u);
  EXPECT_EQ(r.best_f1, r.epochs[r.best_epoch - 1].valid.f1);
  EXPECT_EQ(evaluate(model, data).f1, r.best_f1);
  EXPECT_EQ(serialize_model(model), r.best_checkpoint);
}

TEST(Train, WritesOneJsonLinePerEpoch) {
  const auto data = make_marker_dataset(16, 6);
  auto model = tiny_model(data);
  std::ostringstream log;
  std::size_t callbacks = 0;
  train(model, data, data, &log, [&](const EpochRecord &) { ++callbacks; });
  EXPECT_EQ(callbacks, 3u);
  std::istringstream in(log.str());
  std::string line;
  std::size_t epoch = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("epoch"), ++epoch);
    for (const char *key : {"lr", "train_loss", "valid_F1", "valid"})
      EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(epoch, 3u);
}

TEST(Train, DoesNotMutateEvaluationData) {
  const auto data = make_marker_dataset(16, 7);
  const auto valid = make_marker_dataset(8, 8);
  const auto copy = valid;
  auto model = Model(tiny_config(), build_vocab(data, nullptr), 1);
  train(model, data, valid);
  ASSERT_EQ(copy.size(), valid.size());
  for (std::size_t i = 0; i < copy.size(); ++i) {
    EXPECT_EQ(copy[i].tokens, valid[i].tokens);
    EXPECT_EQ(copy[i].label, valid[i].label);
  }
}

TEST(Train, EvaluationIsDeterministic) {
  const auto data = make_marker_dataset(16, 9);
  const auto model = tiny_model(data, 4);
  const auto a = model.predict(data), b = model.predict(data);
  EXPECT_EQ(a, b);
}

TEST(Train, NonFiniteLossIsReported) {
  const auto data = make_marker_dataset(8, 10);
  auto model = tiny_model(data);
  model.params().get("head.b4").mutable_data()[0] = std::numeric_limits<double>::quiet_NaN();
  try {
    train(model, data, data);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError &e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("non-finite"), std::string::npos);
    EXPECT_NE(what.find("batch 0"), std::string::npos);
    EXPECT_NE(what.find("head.b4"), std::string::npos);
  }
}

TEST(Train, RejectsUnlabelledOrEmptyInput) {
  auto data = make_marker_dataset(4, 11);
  auto model = tiny_model(data);
  EXPECT_THROW(train(model, {}, data), std::invalid_argument);
  data[1].label.reset();
  EXPECT_THROW(train(model, data, make_marker_dataset(4, 12)), std::invalid_argument);
}

// ---------------------------------------------------------------- checkpoint

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto data = make_marker_dataset(8, 13);
  const auto model = tiny_model(data);
  const auto first = serialize_model(model);
  const auto loaded = deserialize_model(first);
  EXPECT_EQ(serialize_model(loaded), first);
}

TEST(Checkpoint, ParametersEqualAtStoragePrecision) {
  const auto data = make_marker_dataset(8, 14);
  const auto model = tiny_model(data);
  const auto loaded = deserialize_model(serialize_model(model));
  EXPECT_EQ(to_json(loaded.config()), to_json(model.config()));
  EXPECT_EQ(loaded.vocab().tokens(), model.vocab().tokens());
  const auto &a = model.params().entries(), &b = loaded.params().entries();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    for (std::size_t j = 0; j < a[i].value.numel(); ++j)
      EXPECT_EQ(static_cast<double>(static_cast<float>(a[i].value.at(j))), b[i].value.at(j));
  }
}

TEST(Checkpoint, FileRoundTripKeepsMetrics) {
  const auto data = make_marker_dataset(16, 15);
  auto model = tiny_model(data);
  train(model, data, data);
  const auto path = std::filesystem::temp_directory_path() / "mcdn_roundtrip.ckpt";
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(model.predict(data), loaded.predict(data));
  EXPECT_EQ(to_json(evaluate(model, data)), to_json(evaluate(loaded, data)));
  const auto again = std::filesystem::temp_directory_path() / "mcdn_roundtrip2.ckpt";
  save_checkpoint(loaded, again);
  std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}),
      sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
}

TEST(Checkpoint, TruncationIsAStructuredError) {
  const auto data = make_marker_dataset(8, 16);
  const auto bytes = serialize_model(tiny_model(data));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{7}, std::size_t{20},
                          bytes.size() / 2, bytes.size() - 1}) {
    try {
      deserialize_model(std::string_view(bytes).substr(0, cut));
      FAIL() << "cut at " << cut;
    } catch (const CheckpointError &e) {
      EXPECT_TRUE(e.kind() == CheckpointError::Kind::truncated ||
                  e.kind() == CheckpointError::Kind::bad_magic)
          << cut;
    }
  }
}

TEST(Checkpoint, FailedRestoreLeavesModelUntouched) {
  const auto data = make_marker_dataset(8, 17);
  auto target = tiny_model(data, 1);
  const auto source = serialize_model(tiny_model(data, 2));
  const auto before = serialize_model(target);
  EXPECT_THROW(restore_parameters(target, std::string_view(source).substr(0, source.size() - 5)),
               CheckpointError);
  EXPECT_EQ(serialize_model(target), before);
  restore_parameters(target, source);
  EXPECT_EQ(serialize_model(target), source);
}

TEST(Checkpoint, VersionAndMagicAreChecked) {
  const auto data = make_marker_dataset(8, 18);
  auto bytes = serialize_model(tiny_model(data));
  auto wrong_version = bytes;
  wrong_version[4] = static_cast<char>(kCheckpointVersion + 1);
  try {
    deserialize_model(wrong_version);
    FAIL();
  } catch (const CheckpointError &e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::version);
    EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos);
  }
  auto wrong_magic = bytes;
  wrong_magic[0] = 'X';
  try {
    deserialize_model(wrong_magic);
    FAIL();
  } catch (const CheckpointError &e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::bad_magic);
  }
  try {
    deserialize_model(bytes + "extra");
    FAIL();
  } catch (const CheckpointError &e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::malformed);
  }
}

TEST(Checkpoint, MissingFileIsAnIoError) {
  try {
    load_checkpoint("/nonexistent/dir/model.ckpt");
    FAIL();
  } catch (const CheckpointError &e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::io);
  }
}

} // namespace
} // namespace mcdn
