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

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <gtest/gtest.h>

#include "radioasr/checkpoint.h"
#include "radioasr/config.h"
#include "radioasr/error.h"
#include "radioasr/optim.h"
#include "radioasr/parallel.h"

namespace radioasr {
namespace {

namespace fs = std::filesystem;
using ad::Tensor;

TEST(AdamTest, MatchesClosedFormForTwoSteps) {
  const Tensor w = Tensor::Parameter({2}, {1.0, -2.0});
  AdamOptions o;
  o.lr = 0.1;
  Adam adam({w}, o);
  const std::vector<double> g1 = {0.5, -3.0}, g2 = {-1.0, 1.0};
  adam.Step({g1});
  for (int j = 0; j < 2; ++j) {
    // First step: m_hat = g, v_hat = g^2.
    const double want = (j == 0 ? 1.0 : -2.0) - 0.1 * g1[j] / (std::abs(g1[j]) + o.eps);
    EXPECT_NEAR(w.data()[j], want, 1e-15);
  }
  const std::vector<double> before(w.data().begin(), w.data().end());
  adam.Step({g2});
  for (int j = 0; j < 2; ++j) {
    const double m = 0.9 * 0.1 * g1[j] + 0.1 * g2[j];
    const double v = 0.999 * 0.001 * g1[j] * g1[j] + 0.001 * g2[j] * g2[j];
    const double m_hat = m / (1 - 0.81), v_hat = v / (1 - 0.999 * 0.999);
    EXPECT_NEAR(w.data()[j], before[j] - 0.1 * m_hat / (std::sqrt(v_hat) + o.eps), 1e-14);
  }
  EXPECT_EQ(adam.step(), 2);
  EXPECT_THROW(adam.Step({{1.0}}), InvalidInputError);
}

TEST(AdamTest, StateSurvivesCheckpoint) {
  const Tensor a = Tensor::Parameter({3}, {1, 2, 3});
  const Tensor b = Tensor::Parameter({3}, {1, 2, 3});
  Adam x({a}), y({b});
  x.Step({{0.1, -0.2, 0.3}});
  y.Step({{0.1, -0.2, 0.3}});
  Checkpoint ck;
  x.Save(ck, {"p"});
  Adam z({b});
  z.Load(ck, {"p"});
  x.Step({{0.3, 0.3, -0.1}});
  z.Step({{0.3, 0.3, -0.1}});
  EXPECT_EQ(std::vector<double>(a.data().begin(), a.data().end()),
            std::vector<double>(b.data().begin(), b.data().end()));
}

TEST(ClipTest, GlobalNorm) {
  std::vector<std::vector<double>> g = {{3.0}, {4.0, 0.0}};
  EXPECT_DOUBLE_EQ(GlobalNorm(g), 5.0);
  EXPECT_DOUBLE_EQ(ClipGlobalNorm(g, 1.0), 5.0);
  EXPECT_NEAR(g[0][0], 0.6, 1e-15);
  EXPECT_NEAR(g[1][0], 0.8, 1e-15);
  std::vector<std::vector<double>> small = {{0.3}};
  ClipGlobalNorm(small, 1.0);
  EXPECT_EQ(small[0][0], 0.3);
}

TEST(CheckpointTest, RoundTripAndCorruption) {
  const std::string path = ::testing::TempDir() + "/util_test.ckpt";
  Checkpoint ck;
  ck.meta["config"] = "a = 1\n";
  ck.Put("w", {2, 2}, {1.5, -2.25, 1e-300, 3.0});
  ck.Put("b", {1}, {7});
  SaveCheckpoint(path, ck);
  EXPECT_FALSE(fs::exists(path + ".tmp"));
  const Checkpoint back = LoadCheckpoint(path);
  EXPECT_EQ(back.meta, ck.meta);
  EXPECT_EQ(back.Get("w").shape, (ad::Shape{2, 2}));
  EXPECT_EQ(back.Get("w").data, ck.Get("w").data);
  EXPECT_THROW(back.Get("nope"), InvalidInputError);
  EXPECT_THROW(ck.Put("b", {1}, {1}), InvalidInputError);
  EXPECT_THROW(ck.Put("c", {3}, {1}), InvalidInputError);

  const auto size = fs::file_size(path);
  fs::resize_file(path, size - 5);
  EXPECT_THROW(LoadCheckpoint(path), IoError);
  std::ofstream(path, std::ios::binary) << "NOTACKPT0000";
  EXPECT_THROW(LoadCheckpoint(path), IoError);
  EXPECT_THROW(LoadCheckpoint(path + ".missing"), IoError);
}

TEST(ConfigTest, ParseAndTypedAccess) {
  const Config c = Config::Parse(
      "# comment\n\n"
      "train.steps = 10\n"
      "loss.beta=0.25\n"
      "train.steps = 20\n"
      "flag = true\n"
      "name =  some value  \n");
  EXPECT_EQ(c.GetInt("train.steps", 0), 20);
  EXPECT_DOUBLE_EQ(c.GetDouble("loss.beta", 0), 0.25);
  EXPECT_TRUE(c.GetBool("flag", false));
  EXPECT_EQ(c.GetString("name", ""), "some value");
  EXPECT_EQ(c.GetInt("absent", 7), 7);
  EXPECT_THROW(c.GetInt("loss.beta", 0), InvalidInputError);
  EXPECT_THROW(c.GetDouble("name", 0), InvalidInputError);
  EXPECT_THROW(Config::Parse("no equals sign"), InvalidInputError);
  EXPECT_THROW(Config::Load("/nonexistent/plan.cfg"), IoError);
  EXPECT_EQ(Config::Parse(c.Dump()).values(), c.values());
  EXPECT_EQ(c.UnknownKeys({"train.steps", "loss.beta", "flag"}),
            std::vector<std::string>{"name"});
}

TEST(ParallelTest, EachIndexOnceAndErrorsPropagate) {
  for (std::size_t workers : {1u, 2u, 5u}) {
    std::vector<std::atomic<int>> hits(37);
    ParallelFor(hits.size(), workers, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(ParallelFor(10, workers,
                             [](std::size_t i) {
                               if (i == 6) throw std::runtime_error("boom");
                             }),
                 std::runtime_error);
  }
  EXPECT_GE(ResolveWorkers(0), 1u);
  EXPECT_EQ(ResolveWorkers(3), 3u);
}

}  // namespace
}  // namespace radioasr
