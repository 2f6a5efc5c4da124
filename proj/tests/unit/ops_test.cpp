// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "gen.hpp"
#include "gradcheck.hpp"
#include "qat/autodiff/graph.hpp"
#include "qat/autodiff/ops.hpp"
#include "qat/error.hpp"

namespace qat::ad {
namespace {

using T = Tensor<double>;
using testing::weighted_sum;

T make(Shape s, std::vector<double> v) { return T(std::move(s), std::move(v)); }

TEST(Ops, MatmulIdentity) {
  Graph<double> g;
  auto a = make({2, 2}, {1, 2, 3, 4});
  auto out = matmul(g.constant(make({2, 2}, {1, 0, 0, 1})), g.constant(a));
  EXPECT_EQ(out.value(), a);
}

TEST(Ops, MatmulTransposedRightOperand) {
  Graph<double> g;
  auto out = matmul(g.constant(make({1, 2}, {1, 2})), g.constant(make({3, 2}, {1, 0, 0, 1, 1, 1})), true);
  EXPECT_EQ(out.value(), make({1, 3}, {1, 2, 3}));
  EXPECT_THROW(matmul(g.constant(make({1, 2}, {1, 2})), g.constant(make({3, 2}, {0, 0, 0, 0, 0, 0}))),
               ShapeError);
}

TEST(Ops, IdentityConvolution) {
  testing::Gen gen(1);
  Graph<double> g;
  auto x = gen.tensor({2, 1, 5, 4});
  auto out = conv2d(g.constant(x), g.constant(make({1, 1, 1, 1}, {1})), {1, 0});
  EXPECT_EQ(out.value(), x);
}

TEST(Ops, ConvolutionHandComputed) {
  Graph<double> g;
  auto x = g.constant(make({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
  auto ones = g.constant(T({1, 1, 2, 2}, 1.0));
  EXPECT_EQ(conv2d(x, ones, {1, 0}).value(), make({1, 1, 2, 2}, {12, 16, 24, 28}));
  EXPECT_EQ(conv2d(x, ones, {2, 1}).value(), make({1, 1, 2, 2}, {1, 5, 11, 28}));
  EXPECT_THROW(conv2d(x, g.constant(T({1, 2, 2, 2}, 1.0))), ShapeError);
}

TEST(Ops, Clip01) {
  Graph<double> g;
  EXPECT_EQ(clip01(g.constant(make({3}, {-0.5, 0.3, 1.7}))).value(), make({3}, {0, 0.3, 1}));
}

TEST(Ops, ClipGradientMaskIncludesBothBounds) {
  Graph<double> g;
  auto x = g.input(make({5}, {-0.1, 0.0, 0.5, 1.0, 1.7}));
  g.backward(weighted_sum(clip01(x), T({5}, 1.0)));
  EXPECT_EQ(g.grad(x), make({5}, {0, 1, 1, 1, 0}));
}

TEST(Ops, ReluAndTanh) {
  Graph<double> g;
  EXPECT_EQ(relu(g.constant(make({3}, {-2, 0, 3}))).value(), make({3}, {0, 0, 3}));
  EXPECT_DOUBLE_EQ(tanh(g.constant(make({1}, {0.5}))).value()[0], std::tanh(0.5));
}

TEST(Ops, AddBroadcastsTrailingBias) {
  Graph<double> g;
  auto out = add(g.constant(make({2, 3}, {1, 2, 3, 4, 5, 6})), g.constant(make({3}, {10, 20, 30})));
  EXPECT_EQ(out.value(), make({2, 3}, {11, 22, 33, 14, 25, 36}));
  EXPECT_THROW(add(g.constant(T({2, 3})), g.constant(T({2}))), ShapeError);
}

TEST(Ops, ScaleLayer) {
  Graph<double> g;
  auto x = g.constant(make({2}, {100, -50}));
  EXPECT_EQ(scale_layer(x, g.constant(T::scalar(0.01))).value(), make({2}, {1, -0.5}));
  const T before = x.value();
  EXPECT_EQ(scale_layer(x, g.constant(T::scalar(1.0))).value(), before);
}

TEST(Ops, MaxAndAveragePooling) {
  Graph<double> g;
  auto x = g.constant(make({1, 1, 4, 4}, {1, 2, 5, 6, 3, 4, 7, 8, 9, 10, 13, 14, 11, 12, 15, 16}));
  EXPECT_EQ(maxpool2d(x).value(), make({1, 1, 2, 2}, {4, 8, 12, 16}));
  EXPECT_EQ(avgpool2d(x).value(), make({1, 1, 2, 2}, {2.5, 6.5, 10.5, 14.5}));
  EXPECT_EQ(avgpool2d(x, {0, 1}).value(), make({1, 1, 1, 1}, {8.5}));
}

TEST(Ops, FlattenKeepsBatch) {
  Graph<double> g;
  EXPECT_EQ(flatten(g.constant(T({3, 2, 2, 2}))).shape(), (Shape{3, 8}));
}

TEST(Ops, SoftmaxCrossEntropyOfUniformLogits) {
  Graph<double> g;
  const int labels[] = {0, 1};
  auto loss = softmax_cross_entropy(g.constant(T({2, 2}, 0.0)), std::span<const int>(labels));
  EXPECT_NEAR(loss.value().item(), std::log(2.0), 1e-15);
  const int bad[] = {0, 2};
  EXPECT_THROW(softmax_cross_entropy(g.constant(T({2, 2}, 0.0)), std::span<const int>(bad)), ShapeError);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  testing::Gen gen(3);
  auto p = softmax(gen.tensor<float>({8, 10}, -20, 20));
  for (std::size_t i = 0; i < 8; ++i) {
    double s = 0;
    for (std::size_t k = 0; k < 10; ++k) s += p[i * 10 + k];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Ops, MseHalfMeanOverElements) {
  Graph<double> g;
  auto a = g.input(make({2}, {1, 0}));
  auto b = g.input(make({2}, {0, 0}));
  auto r = mse_half(a, b);
  EXPECT_DOUBLE_EQ(r.value().item(), 0.25);
  g.backward(r);
  EXPECT_EQ(g.grad(a), make({2}, {0.5, 0}));
  EXPECT_EQ(g.grad(b), make({2}, {-0.5, 0}));
}

TEST(Ops, BatchNormTrainNormalisesEachChannel) {
  testing::Gen gen(11);
  Graph<double> g;
  BatchNormBuffers<double> buf(3);
  auto x = gen.tensor({8, 3, 5, 5}, -3, 7);
  auto y = batchnorm2d(g.constant(x), g.constant(T({3}, 1.0)), g.constant(T({3}, 0.0)), buf, BnMode::train);
  const std::size_t per = 8 * 25;
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0, sq = 0;
    for (std::size_t n = 0; n < 8; ++n) {
      for (std::size_t k = 0; k < 25; ++k) {
        const double v = y.value()[(n * 3 + c) * 25 + k];
        mean += v;
        sq += v * v;
      }
    }
    mean /= per;
    EXPECT_NEAR(mean, 0.0, 1e-3);
    EXPECT_NEAR(sq / per - mean * mean, 1.0, 1e-3);
  }
}

TEST(Ops, BatchNormRunningStatsFollowMomentumRule) {
  Graph<double> g;
  BatchNormBuffers<double> buf(1);
  // Channel values 1,3 -> batch mean 2, unbiased variance 2.
  auto x = make({2, 1}, {1, 3});
  auto gamma = g.constant(T({1}, 1.0));
  auto beta = g.constant(T({1}, 0.0));
  batchnorm2d(g.constant(x), gamma, beta, buf, BnMode::train);
  EXPECT_NEAR(buf.running_mean[0], 0.1 * 2.0, 1e-15);
  EXPECT_NEAR(buf.running_var[0], 0.9 * 1.0 + 0.1 * 2.0, 1e-15);
  for (int i = 0; i < 400; ++i) batchnorm2d(g.constant(x), gamma, beta, buf, BnMode::train);
  EXPECT_NEAR(buf.running_mean[0], 2.0, 1e-12);
  EXPECT_NEAR(buf.running_var[0], 2.0, 1e-12);

  auto frozen = buf.running_mean;
  batchnorm2d(g.constant(x), gamma, beta, buf, BnMode::train, false);
  EXPECT_EQ(buf.running_mean, frozen);
}

TEST(Ops, BatchNormEvalUsesRunningStats) {
  Graph<double> g;
  BatchNormBuffers<double> buf(1);
  buf.running_mean[0] = 1.0;
  buf.running_var[0] = 4.0;
  auto y = batchnorm2d(g.constant(make({2, 1}, {1, 5})), g.constant(T({1}, 2.0)), g.constant(T({1}, 0.5)), buf,
                       BnMode::eval);
  EXPECT_NEAR(y.value()[0], 0.5, 1e-12);
  EXPECT_NEAR(y.value()[1], 2.0 * 4.0 / std::sqrt(4.0 + 1e-5) + 0.5, 1e-12);
}

}  // namespace
}  // namespace qat::ad
