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
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "radioasr/ctc.h"
#include "radioasr/error.h"
#include "radioasr/tensor.h"

namespace radioasr {
namespace {

using ad::Tensor;

std::vector<double> RandomLogProbs(std::size_t frames, std::size_t vocab, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0, 1.5);
  std::vector<double> lp(frames * vocab);
  for (std::size_t t = 0; t < frames; ++t) {
    double z = 0;
    for (std::size_t k = 0; k < vocab; ++k) z += std::exp(lp[t * vocab + k] = g(rng));
    for (std::size_t k = 0; k < vocab; ++k) lp[t * vocab + k] -= std::log(z);
  }
  return lp;
}

struct BruteForce {
  double prob = 0;              // P(target)
  std::vector<double> occupancy;  // sum over valid paths of P(path) [t, k], / P
};

// Enumerates all vocab^frames label paths.
BruteForce Enumerate(const std::vector<double>& lp, std::size_t frames, std::size_t vocab,
                     const std::vector<int>& target) {
  BruteForce out;
  out.occupancy.assign(frames * vocab, 0);
  std::vector<int> path(frames, 0);
  std::function<void(std::size_t)> rec = [&](std::size_t t) {
    if (t == frames) {
      if (CtcCollapse(path) != target) return;
      double p = 1;
      for (std::size_t i = 0; i < frames; ++i) p *= std::exp(lp[i * vocab + path[i]]);
      out.prob += p;
      for (std::size_t i = 0; i < frames; ++i) out.occupancy[i * vocab + path[i]] += p;
      return;
    }
    for (std::size_t k = 0; k < vocab; ++k) {
      path[t] = static_cast<int>(k);
      rec(t + 1);
    }
  };
  rec(0);
  for (auto& o : out.occupancy) o /= out.prob;
  return out;
}

std::vector<std::vector<int>> AllTargets(std::size_t vocab, std::size_t max_len) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::function<void()> rec = [&] {
    if (!cur.empty()) out.push_back(cur);
    if (cur.size() == max_len) return;
    for (std::size_t k = 1; k < vocab; ++k) {
      cur.push_back(static_cast<int>(k));
      rec();
      cur.pop_back();
    }
  };
  rec();
  return out;
}

TEST(CtcTest, SingleFrameUniform) {
  const std::vector<double> lp = {std::log(0.5), std::log(0.5)};
  const std::vector<int> target = {1};
  EXPECT_NEAR(CtcNegLogLikelihood(lp, 1, 2, target), -std::log(0.5), 1e-15);
}

TEST(CtcTest, TwoFramesThreePaths) {
  // Paths aa, a-, -a.
  const double pa0 = 0.7, pa1 = 0.4;
  const std::vector<double> lp = {std::log(1 - pa0), std::log(pa0), std::log(1 - pa1),
                                  std::log(pa1)};
  const std::vector<int> target = {1};
  const double p = pa0 * pa1 + pa0 * (1 - pa1) + (1 - pa0) * pa1;
  EXPECT_NEAR(CtcNegLogLikelihood(lp, 2, 2, target), -std::log(p), 1e-14);
}

// The full grid: every T' <= 4, vocab size 2..3 (blank included), every
// target of length <= 3, feasible or not.
TEST(CtcTest, ExhaustiveGridMatchesEnumeration) {
  std::mt19937_64 rng(17);
  std::size_t checked = 0, infeasible = 0;
  for (std::size_t frames = 1; frames <= 4; ++frames)
    for (std::size_t vocab = 2; vocab <= 3; ++vocab)
      for (const auto& target : AllTargets(vocab, 3)) {
        const auto lp = RandomLogProbs(frames, vocab, rng);
        if (frames < CtcMinFrames(target)) {
          EXPECT_THROW(CtcNegLogLikelihood(lp, frames, vocab, target), AlignmentInfeasibleError);
          EXPECT_EQ(Enumerate(lp, frames, vocab, target).prob, 0.0);
          ++infeasible;
          continue;
        }
        const BruteForce bf = Enumerate(lp, frames, vocab, target);
        const double nll = CtcNegLogLikelihood(lp, frames, vocab, target);
        ASSERT_NEAR(nll, -std::log(bf.prob), 1e-10);
        // Gradient w.r.t. log-probabilities is minus the occupancy.
        const Tensor x = Tensor::Parameter({frames, vocab}, lp);
        const Tensor loss = CtcLoss(x, target);
        ASSERT_NEAR(loss.item(), nll, 1e-12);
        const auto g = ad::Backward(loss).Get(x);
        for (std::size_t i = 0; i < g.size(); ++i) ASSERT_NEAR(g[i], -bf.occupancy[i], 1e-10);
        ++checked;
      }
  // 17 targets per frame count; 32 of the 68 instances are feasible.
  EXPECT_EQ(checked, 32u);
  EXPECT_EQ(infeasible, 36u);
}

TEST(CtcTest, MinFrames) {
  EXPECT_EQ(CtcMinFrames(std::vector<int>{1, 2, 3}), 3u);
  EXPECT_EQ(CtcMinFrames(std::vector<int>{1, 1, 1}), 5u);
  EXPECT_EQ(CtcMinFrames(std::vector<int>{1, 2, 2}), 4u);
}

TEST(CtcTest, InputValidation) {
  const Tensor x = Tensor::Parameter({3, 3}, std::vector<double>(9, std::log(1.0 / 3)));
  EXPECT_THROW(CtcLoss(x, std::vector<int>{0}), InvalidInputError);
  EXPECT_THROW(CtcLoss(x, std::vector<int>{3}), InvalidInputError);
  EXPECT_THROW(CtcLoss(x, std::vector<int>{1, 1, 1}), AlignmentInfeasibleError);
  EXPECT_NO_THROW(CtcLoss(x, std::vector<int>{1, 1}));
}

TEST(CtcTest, CollapseMergesRepeatsAndDropsBlanks) {
  EXPECT_EQ(CtcCollapse(std::vector<int>{0, 1, 1, 0, 1, 2, 2, 0}), (std::vector<int>{1, 1, 2}));
  EXPECT_TRUE(CtcCollapse(std::vector<int>{0, 0}).empty());
}

// With T' = |target| and no repeated neighbours there is exactly one
// alignment; raising the logit of the symbol it uses at any frame cannot
// increase the loss.
TEST(CtcTest, LossNonIncreasingInAlignedSymbolLogit) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 1);
  const std::vector<int> target = {1, 3, 2, 1};
  const std::size_t frames = target.size(), vocab = 4;
  std::vector<double> logits(frames * vocab);
  for (auto& v : logits) v = g(rng);
  auto loss_at = [&](const std::vector<double>& lg) {
    const Tensor x = Tensor::Constant({frames, vocab}, lg);
    return CtcLoss(ad::LogSoftmax(x), target).item();
  };
  const double base = loss_at(logits);
  for (std::size_t t = 0; t < frames; ++t)
    for (double delta : {0.01, 0.5, 3.0}) {
      auto up = logits;
      up[t * vocab + target[t]] += delta;
      EXPECT_LE(loss_at(up), base) << "frame " << t;
    }
}

// The unrestricted statement (any target symbol, any frame) does not hold:
// with target "ab" over two frames the only alignment puts b at frame 1,
// so favouring a there makes the loss worse.
TEST(CtcTest, NonAlignedTargetSymbolCanIncreaseLoss) {
  const std::vector<int> target = {1, 2};
  std::vector<double> logits(2 * 3, 0.0);
  auto loss_at = [&](const std::vector<double>& lg) {
    return CtcLoss(ad::LogSoftmax(Tensor::Constant({2, 3}, lg)), target).item();
  };
  auto up = logits;
  up[1 * 3 + 1] += 1.0;
  EXPECT_GT(loss_at(up), loss_at(logits));
}

}  // namespace
}  // namespace radioasr
