// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "mcdn/gradcheck.hpp"
#include "mcdn/ops.hpp"
#include "test_helpers.hpp"

using namespace mcdn;

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor::from({0, 2}, {}), ShapeError);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), ShapeError);
  auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_DOUBLE_EQ(t.at(1, 2), 6.0);
}

TEST(Tensor, ProductRule) {
  auto x = Tensor::scalar(3.0, true);
  auto y = Tensor::scalar(-2.5, true);
  ops::mul(x, y).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], -2.5);
  EXPECT_DOUBLE_EQ(y.grad()[0], 3.0);
}

TEST(Tensor, BackwardAccumulatesOnLeaves) {
  auto x = Tensor::scalar(2.0, true);
  auto loss = ops::mul(x, x);
  loss.backward();
  loss.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 8.0);
  x.zero_grad();
  loss.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
}

TEST(Tensor, BackwardOnNonScalarThrows) {
  auto x = Tensor::vector({1.0, 2.0}, true);
  EXPECT_THROW(ops::scale(x, 2.0).backward(), ShapeError);
}

TEST(Tensor, SharedSubexpressionGetsBothPaths) {
  auto x = Tensor::scalar(1.5, true);
  auto s = ops::sigmoid(x);
  ops::add(s, ops::mul(s, s)).backward();
  const double sv = 1.0 / (1.0 + std::exp(-1.5));
  EXPECT_NEAR(x.grad()[0], (1.0 + 2.0 * sv) * sv * (1.0 - sv), 1e-15);
}

TEST(Tensor, NoGradGuardSkipsRecording) {
  auto x = Tensor::scalar(2.0, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = ops::mul(x, x);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(ops::mul(x, x).requires_grad());
}

TEST(Tensor, DeepChainDoesNotOverflowStack) {
  auto x = Tensor::scalar(0.1, true);
  Tensor y = x;
  for (int i = 0; i < 200000; ++i)
    y = ops::add_scalar(y, 0.0);
  y.backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
}

TEST(FiniteDiff, QuadraticAtThree) {
  auto g = finite_diff([](const Tensor &t) { return t.item() * t.item(); },
                       Tensor::scalar(3.0), 1e-4);
  EXPECT_NEAR(g.item(), 6.0, 1e-7);
}

TEST(FiniteDiff, ConstantIsZero) {
  auto g = finite_diff([](const Tensor &) { return 4.2; }, Tensor::vector({1, 2, 3}), 1e-4);
  for (double v : g.data())
    EXPECT_EQ(v, 0.0);
}

TEST(FiniteDiff, SineAtOriginWithinTaylorBound) {
  const double eps = 1e-3;
  auto g = finite_diff([](const Tensor &t) { return std::sin(t.item()); },
                       Tensor::scalar(0.0), eps);
  EXPECT_NEAR(g.item(), 1.0, eps * eps);
}

TEST(FiniteDiff, LeavesThetaUntouched) {
  auto theta = Tensor::vector({1.0, -2.0});
  finite_diff([](const Tensor &t) { return t.at(0) * t.at(1); }, theta, 1e-3);
  EXPECT_EQ(theta.at(0), 1.0);
  EXPECT_EQ(theta.at(1), -2.0);
}

TEST(FiniteDiff, RejectsNonPositiveEps) {
  EXPECT_THROW(finite_diff([](const Tensor &) { return 0.0; }, Tensor::scalar(1), 0.0),
               std::invalid_argument);
}

TEST(RelativeError, NormForm) {
  std::vector<double> a{1.0, 0.0}, b{1.0, 0.0}, c{0.0, 0.0};
  EXPECT_EQ(relative_error(a, b), 0.0);
  EXPECT_EQ(relative_error(c, c), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(a, c), 1.0);
}

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(7);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(3);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}));
}
