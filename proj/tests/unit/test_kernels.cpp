// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include <gtest/gtest.h>

#include <cmath>

#include "cldg/error.hpp"
#include "cldg/kernels.hpp"
#include "oracles.hpp"

namespace cldg {
namespace {

using oracle::max_rel_err;
using oracle::numeric_grad;
using oracle::random_tensor;
using oracle::weighted_sum;

constexpr int kInstances = 25;

TEST(Tensor, ShapeAndDataMustAgree) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  const Tensor t({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (Shape{3, 2}));
  EXPECT_THROW(t.reshaped({4, 2}), DimensionError);
}

TEST(Tensor, GradIsLazyAndSeparateFromEquality) {
  Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  Tensor b = a;
  EXPECT_FALSE(a.has_grad());
  a.grad()[0] = 5.0;
  EXPECT_TRUE(a.has_grad());
  EXPECT_EQ(a, b);
  a.drop_grad();
  const Tensor& ca = a;
  EXPECT_THROW((void)ca.grad(), ArgumentError);
}

TEST(Conv1d, MatchesNaiveOracleBitExactly) {
  Rng rng(11);
  for (int n = 0; n < 50; ++n) {
    const std::size_t in = 1 + rng.index(4), out = 1 + rng.index(5), k = 1 + rng.index(5);
    const std::size_t stride = 1 + rng.index(3), len = k + rng.index(20);
    const ConvParams p = oracle::random_conv(out, in, k, stride, rng);
    const Tensor x = random_tensor({in, len}, rng);
    const Tensor y = conv1d_forward(x, p);
    EXPECT_EQ(y, oracle::naive_conv1d(x, p)) << "instance " << n;
  }
}

TEST(Conv1d, HandWorkedCase) {
  ConvParams p = ConvParams::zeros(1, 1, 2);
  p.weights = Tensor({1, 1, 2}, {1.0, -1.0});
  p.bias = Tensor({1}, {0.5});
  const Tensor y = conv1d_forward(Tensor::from_rows({{1, 3, 6, 10}}), p);
  EXPECT_EQ(y, Tensor::from_rows({{-1.5, -2.5, -3.5}}));
}

TEST(Conv1d, RejectsBadShapes) {
  const ConvParams p = ConvParams::zeros(2, 3, 4);
  EXPECT_THROW(conv1d_forward(Tensor({2, 10}), p), DimensionError);
  EXPECT_THROW(conv1d_forward(Tensor({3, 3}), p), DimensionError);
}

TEST(Conv1d, GradientsMatchFiniteDifferences) {
  Rng rng(12);
  for (int n = 0; n < kInstances; ++n) {
    const std::size_t in = 1 + rng.index(3), out = 1 + rng.index(3), k = 1 + rng.index(4);
    const std::size_t stride = 1 + rng.index(2), len = k + 1 + rng.index(8);
    ConvParams p = oracle::random_conv(out, in, k, stride, rng);
    Tensor x = random_tensor({in, len}, rng);
    const Tensor r = random_tensor({out, p.output_length(len)}, rng);
    const auto g = conv1d_backward(x, p, r);
    auto loss = [&] { return weighted_sum(conv1d_forward(x, p), r); };
    EXPECT_LT(max_rel_err(g.dx.data(), numeric_grad(x.data(), loss)), oracle::kFdTolerance);
    EXPECT_LT(max_rel_err(g.dw.data(), numeric_grad(p.weights.data(), loss)), oracle::kFdTolerance);
    EXPECT_LT(max_rel_err(g.db.data(), numeric_grad(p.bias.data(), loss)), oracle::kFdTolerance);
  }
}

TEST(Conv1d, MacCountsPerPhase) {
  Rng rng(1);
  const ConvParams p = oracle::random_conv(4, 3, 5, 1, rng);
  const Tensor x = random_tensor({3, 20}, rng);
  MacCounter m;
  const Tensor y = conv1d_forward(x, p, &m);
  EXPECT_EQ(m.forward, 4u * 3 * 5 * 16);
  conv1d_backward(x, p, y, {true, false}, &m);
  EXPECT_EQ(m.backward_data, 4u * 3 * 5 * 16);
  EXPECT_EQ(m.backward_weight, 0u);
  conv1d_backward(x, p, y, {false, true}, &m);
  EXPECT_EQ(m.backward_weight, 4u * 3 * 5 * 16);
}

TEST(Fc, GradientsMatchFiniteDifferences) {
  Rng rng(13);
  for (int n = 0; n < kInstances; ++n) {
    const std::size_t c = 1 + rng.index(3), len = 1 + rng.index(4), out = 1 + rng.index(4);
    FcParams p = oracle::random_fc(c * len, out, rng);
    Tensor x = random_tensor({c, len}, rng);
    const Tensor r = random_tensor({out, 1}, rng);
    const auto g = fc_backward(x, p, r);
    auto loss = [&] { return weighted_sum(fc_forward(x, p), r); };
    EXPECT_EQ(g.dx.shape(), x.shape());
    EXPECT_LT(max_rel_err(g.dx.data(), numeric_grad(x.data(), loss)), oracle::kFdTolerance);
    EXPECT_LT(max_rel_err(g.dw.data(), numeric_grad(p.weights.data(), loss)), oracle::kFdTolerance);
    EXPECT_LT(max_rel_err(g.db.data(), numeric_grad(p.bias.data(), loss)), oracle::kFdTolerance);
  }
}

TEST(Fc, FlattensRowMajorAndCountsMacs) {
  FcParams p = FcParams::zeros(4, 1);
  p.weights = Tensor({1, 4}, {1, 10, 100, 1000});
  MacCounter m;
  const Tensor y = fc_forward(Tensor::from_rows({{1, 2}, {3, 4}}), p, &m);
  EXPECT_EQ(y[0], 4321.0);
  EXPECT_EQ(m.forward, 4u);
  EXPECT_THROW(fc_forward(Tensor({1, 5}), p), DimensionError);
}

TEST(Relu, GradientMatchesFiniteDifferencesAwayFromZero) {
  Rng rng(14);
  for (int n = 0; n < kInstances; ++n) {
    Tensor x = random_tensor({2, 7}, rng);
    for (double& v : x.data()) {
      if (std::abs(v) < 1e-3) v = 0.5;
    }
    const Tensor r = random_tensor({2, 7}, rng);
    auto loss = [&] { return weighted_sum(relu_forward(x), r); };
    const Tensor dx = relu_backward(x, r);
    EXPECT_LT(max_rel_err(dx.data(), numeric_grad(x.data(), loss)), oracle::kFdTolerance);
  }
}

TEST(MaxPool, FirstMaximumWinsTiesAndRoutesGradient) {
  const Tensor x = Tensor::from_rows({{1, 3, 3, 2, 5, 5}});
  const auto r = maxpool1d_forward(x, 2);
  EXPECT_EQ(r.out, Tensor::from_rows({{3, 3, 5}}));
  EXPECT_EQ(r.argmax, (std::vector<std::size_t>{1, 2, 4}));
  const Tensor dx = maxpool1d_backward(x.shape(), r.argmax, Tensor::from_rows({{1, 2, 3}}));
  EXPECT_EQ(dx, Tensor::from_rows({{0, 1, 2, 0, 3, 0}}));
  EXPECT_THROW(maxpool1d_forward(x, 7), DimensionError);
}

TEST(MaxPool, DropsIncompleteTailWindow) {
  const auto r = maxpool1d_forward(Tensor::from_rows({{1, 2, 3, 4, 9}}), 2);
  EXPECT_EQ(r.out, Tensor::from_rows({{2, 4}}));
}

TEST(MaxPool, GradientMatchesFiniteDifferences) {
  Rng rng(15);
  for (int n = 0; n < kInstances; ++n) {
    Tensor x = random_tensor({3, 12}, rng);
    const auto fwd = maxpool1d_forward(x, 3);
    const Tensor r = random_tensor(fwd.out.shape(), rng);
    auto loss = [&] { return weighted_sum(maxpool1d_forward(x, 3).out, r); };
    const Tensor dx = maxpool1d_backward(x.shape(), fwd.argmax, r);
    EXPECT_LT(max_rel_err(dx.data(), numeric_grad(x.data(), loss)), oracle::kFdTolerance);
  }
}

TEST(GlobalAvgPool, ForwardAndGradient) {
  EXPECT_EQ(global_avg_pool_forward(Tensor::from_rows({{1, 3}, {2, 6}})),
            Tensor::from_rows({{2}, {4}}));
  Rng rng(16);
  Tensor x = random_tensor({4, 9}, rng);
  const Tensor r = random_tensor({4, 1}, rng);
  auto loss = [&] { return weighted_sum(global_avg_pool_forward(x), r); };
  const Tensor dx = global_avg_pool_backward(x.shape(), r);
  EXPECT_LT(max_rel_err(dx.data(), numeric_grad(x.data(), loss)), oracle::kFdTolerance);
}

TEST(SoftmaxCrossEntropy, GradientAndStability) {
  Rng rng(17);
  for (int n = 0; n < kInstances; ++n) {
    Tensor z = random_tensor({2, 1}, rng, -5.0, 5.0);
    const std::size_t label = rng.index(2);
    const auto r = softmax_cross_entropy(z, label);
    auto loss = [&] { return softmax_cross_entropy(z, label).loss; };
    EXPECT_LT(max_rel_err(r.dlogits.data(), numeric_grad(z.data(), loss)), oracle::kFdTolerance);
  }
  const auto big = softmax_cross_entropy(Tensor({2, 1}, {1000.0, -1000.0}), 0);
  EXPECT_TRUE(std::isfinite(big.loss));
  EXPECT_GE(big.loss, 0.0);
  EXPECT_NEAR(softmax_cross_entropy(Tensor({2, 1}, {0.0, 0.0}), 1).loss, std::log(2.0), 1e-15);
}

TEST(ArgmaxAndSoftmax, Basics) {
  EXPECT_EQ(argmax(Tensor({3, 1}, {0.1, 0.7, 0.7})), 1u);
  const auto p = softmax(Tensor({2, 1}, {1.0, 1.0}));
  EXPECT_DOUBLE_EQ(p[0], 0.5);
}

}  // namespace
}  // namespace cldg
