// Copyright 2026 The radioasr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "radioasr/error.h"
#include "radioasr/gradcheck.h"
#include "radioasr/tensor.h"

namespace radioasr::ad {
namespace {

Tensor P(Shape s, std::vector<double> v) { return Tensor::Parameter(std::move(s), std::move(v)); }

TEST(TensorTest, ForwardValues) {
  const Tensor a = P({2, 2}, {1, 2, 3, 4});
  const Tensor b = P({2, 2}, {5, 6, 7, 8});
  const Tensor m = MatMul(a, b);
  EXPECT_EQ(std::vector<double>(m.data().begin(), m.data().end()),
            (std::vector<double>{19, 22, 43, 50}));
  const Tensor bias = Add(a, P({2}, {10, 20}));
  EXPECT_EQ(bias.at(1, 1), 24);
  EXPECT_NEAR(Softplus(Tensor::Scalar(0)).item(), std::log(2.0), 1e-15);
  const Tensor sm = Softmax(P({1, 3}, {1, 2, 3}));
  const double z = std::exp(1) + std::exp(2) + std::exp(3);
  EXPECT_NEAR(sm.at(0, 2), std::exp(3) / z, 1e-15);
  const Tensor lsm = LogSoftmax(P({1, 3}, {1000, 0, -1000}));
  EXPECT_NEAR(lsm.at(0, 0), 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(lsm.at(0, 2)));
}

TEST(TensorTest, ShapeErrors) {
  const Tensor a = P({2, 3}, std::vector<double>(6, 1));
  EXPECT_THROW(MatMul(a, a), InvalidInputError);
  EXPECT_THROW(Add(a, P({2}, {1, 2})), InvalidInputError);
  EXPECT_THROW(Reshape(a, {4, 2}), InvalidInputError);
  EXPECT_THROW(Slice(a, 0, 1, 3), InvalidInputError);
  EXPECT_THROW(Backward(a), InvalidInputError);
}

TEST(TensorTest, GradientAccumulatesAcrossUses) {
  const Tensor x = P({1}, {3.0});
  const Tensor y = Sum(Add(Mul(x, x), Scale(x, 2.0)));  // x^2 + 2x
  const Gradients g = Backward(y);
  EXPECT_DOUBLE_EQ(g.Get(x)[0], 8.0);
}

TEST(TensorTest, BackwardIsRepeatable) {
  const Tensor x = P({3}, {0.1, -0.2, 0.3});
  const Tensor y = Sum(Tanh(Mul(x, x)));
  const auto g1 = Backward(y).Get(x);
  const auto g2 = Backward(y).Get(x);
  EXPECT_EQ(g1, g2);
  const auto g3 = Backward(y, 2.0).Get(x);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(g3[i], 2 * g1[i]);
}

TEST(TensorTest, StopGradientBlocksFlow) {
  const Tensor x = P({2}, {1.0, 2.0});
  const Tensor y = Sum(Mul(x, StopGradient(x)));
  EXPECT_DOUBLE_EQ(y.item(), 5.0);
  const auto g = Backward(y).Get(x);
  EXPECT_DOUBLE_EQ(g[0], 1.0);
  EXPECT_DOUBLE_EQ(g[1], 2.0);
}

TEST(TensorTest, NoGradGuardDetaches) {
  const Tensor x = P({2}, {1.0, 2.0});
  Tensor y;
  {
    NoGradGuard guard;
    EXPECT_FALSE(GradEnabled());
    y = Sum(Mul(x, x));
  }
  EXPECT_TRUE(GradEnabled());
  EXPECT_FALSE(y.requires_grad());
  EXPECT_DOUBLE_EQ(y.item(), 5.0);
  EXPECT_THROW(Backward(y), InvalidStateError);
}

TEST(TensorTest, UnreachableInputHasZeroGradient) {
  const Tensor x = P({2}, {1.0, 2.0});
  const Tensor unused = P({2}, {3.0, 4.0});
  const Gradients g = Backward(Sum(x));
  EXPECT_EQ(g.Find(unused), nullptr);
  EXPECT_EQ(g.Get(unused), (std::vector<double>{0, 0}));
}

TEST(TensorTest, DebugChecksCatchNonFinite) {
  SetDebugChecks(true);
  EXPECT_THROW(Log(P({1}, {-1.0})), NumericError);
  SetDebugChecks(false);
  EXPECT_NO_THROW(Log(P({1}, {-1.0})));
}

TEST(TensorTest, MaskedFillZeroesGradient) {
  const Tensor x = P({1, 3}, {0.5, 0.1, -0.3});
  const std::vector<std::uint8_t> mask = {0, 1, 0};
  const Tensor y = Softmax(MaskedFill(x, mask, -1e9));
  EXPECT_NEAR(y.at(0, 1), 0.0, 1e-300);
  const auto g = Backward(RandomProjection(y, 3)).Get(x);
  EXPECT_EQ(g[1], 0.0);
}

TEST(TensorTest, ConvOutputLength) {
  std::mt19937_64 rng(1);
  const Tensor x = Tensor::Zeros({9, 2});
  const Tensor w = Tensor::Zeros({3, 6}, true);
  EXPECT_EQ(Conv1d(x, w, Tensor(), 3, 2, 1).rows(), 5u);  // ceil(9 / 2)
  EXPECT_EQ(Conv1d(x, w, Tensor(), 3, 1, 1).rows(), 9u);
}

TEST(TensorTest, DepthwiseConvMatchesLoop) {
  const Tensor x = P({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor w = P({2, 3}, {0.1, 0.2, 0.3, -1, 0, 1});
  const Tensor y = DepthwiseConv1d(x, w);
  for (int t = 0; t < 4; ++t)
    for (int c = 0; c < 2; ++c) {
      double want = 0;
      for (int k = 0; k < 3; ++k) {
        const int src = t + k - 1;
        if (src >= 0 && src < 4) want += w.at(c, k) * x.at(src, c);
      }
      EXPECT_NEAR(y.at(t, c), want, 1e-15);
    }
}

TEST(GradCheckTest, DetectsWrongGradient) {
  // A custom op with a deliberately wrong backward must be flagged.
  const Tensor x = P({3}, {0.3, 0.5, -0.2});
  auto bad_square = [&] {
    std::vector<double> v(3);
    for (int i = 0; i < 3; ++i) v[i] = x.at(i) * x.at(i);
    return Sum(MakeResult({3}, v, {x},
                          [](const Node& self, std::span<const double> g, BackwardContext& ctx) {
                            auto gx = ctx.Grad(self, 0);
                            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
                          },
                          "bad_square"));
  };
  EXPECT_FALSE(CheckGradients("bad", bad_square, {x}).passed);
  EXPECT_TRUE(CheckGradients("good", [&] { return Sum(Mul(x, x)); }, {x}).passed);
}

}  // namespace
}  // namespace radioasr::ad
