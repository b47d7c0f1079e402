// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "mcdn/optim.hpp"
#include "test_helpers.hpp"

using namespace mcdn;

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  std::vector<Tensor> params{Tensor::vector({1.0, -2.0}, true)};
  AdamState state;
  for (int i = 0; i < 50; ++i) {
    params[0].zero_grad();
    adam_step(params, state, AdamConfig{});
  }
  EXPECT_EQ(params[0].at(0), 1.0);
  EXPECT_EQ(params[0].at(1), -2.0);
  EXPECT_EQ(state.step, 50u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<Tensor> params{Tensor::scalar(0.0, true)};
  params[0].mutable_grad()[0] = 1.0;
  AdamState state;
  adam_step(params, state, AdamConfig{});
  // m_hat = v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(params[0].item(), -1e-4 / (1.0 + 1e-8), 1e-18);
}

TEST(Adam, FirstStepBoundedRegardlessOfScale) {
  for (double g : {1e-6, 1e-2, 1.0, 1e3, 1e9}) {
    std::vector<Tensor> params{Tensor::scalar(0.0, true)};
    params[0].mutable_grad()[0] = g;
    AdamState state;
    AdamConfig cfg;
    adam_step(params, state, cfg);
    EXPECT_LE(std::abs(params[0].item()), cfg.lr / (1.0 - 1e-12));
  }
}

TEST(Adam, MatchesHandRecurrenceOverSteps) {
  std::vector<Tensor> params{Tensor::scalar(0.5, true)};
  AdamState state;
  AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  double w = 0.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const double g = 2.0 * w; // d/dw of w^2
    params[0].mutable_grad()[0] = g;
    adam_step(params, state, cfg);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    w -= 0.01 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_DOUBLE_EQ(params[0].item(), w);
  }
}

TEST(Adam, BitwiseDeterministic) {
  auto run = [] {
    Rng rng(5);
    std::vector<Tensor> params{mcdn::testing::random_tensor({3, 3}, rng)};
    AdamState state;
    for (int i = 0; i < 10; ++i) {
      auto g = params[0].mutable_grad();
      for (double &x : g)
        x = rng.normal();
      adam_step(params, state, AdamConfig{});
    }
    return std::vector<double>(params[0].data().begin(), params[0].data().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(ClipGlobalNorm, Examples) {
  std::vector<Tensor> params{Tensor::vector({0, 0}, true)};
  params[0].mutable_grad()[0] = 3.0;
  params[0].mutable_grad()[1] = 4.0;
  EXPECT_DOUBLE_EQ(clip_global_norm(params, 1.0), 5.0);
  EXPECT_NEAR(params[0].grad()[0], 0.6, 1e-15);
  EXPECT_NEAR(params[0].grad()[1], 0.8, 1e-15);

  params[0].mutable_grad()[0] = 0.3;
  params[0].mutable_grad()[1] = 0.4;
  clip_global_norm(params, 1.0);
  EXPECT_EQ(params[0].grad()[0], 0.3);

  params[0].zero_grad();
  clip_global_norm(params, 1.0);
  EXPECT_EQ(params[0].grad()[0], 0.0);
  EXPECT_THROW(clip_global_norm(params, 0.0), std::invalid_argument);
}

TEST(ClipGlobalNorm, SpansSeveralTensors) {
  std::vector<Tensor> params{Tensor::scalar(0, true), Tensor::vector({0, 0}, true)};
  params[0].mutable_grad()[0] = 2.0;
  params[1].mutable_grad()[0] = 2.0;
  params[1].mutable_grad()[1] = 1.0;
  clip_global_norm(params, 1.5);
  EXPECT_NEAR(global_grad_norm(params), 1.5, 1e-12);
  EXPECT_NEAR(params[1].grad()[1], 0.5, 1e-12);
}
