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
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "radioasr/error.h"
#include "radioasr/joint_training.h"

namespace radioasr {
namespace {

std::vector<Example> SyntheticExamples(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 0.05);
  std::uniform_real_distribution<double> f(200, 2000);
  const Vocabulary vocab = Vocabulary::Default();
  const std::string texts[] = {"ab", "cad", "je", "bif", "hg"};
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    ex.id = "utt" + std::to_string(i);
    const double hz = f(rng);
    const std::size_t len = 512 + 128 * (14 + i % 3);
    for (std::size_t s = 0; s < len; ++s) {
      const double c = 0.3 * std::sin(2 * std::numbers::pi * hz * s / 16000);
      ex.clean.samples.push_back(c);
      ex.noisy.samples.push_back(c + g(rng));
    }
    ex.target.text = texts[i % 5];
    ex.target.tokens = vocab.Encode(ex.target.text);
    out.push_back(std::move(ex));
  }
  return out;
}

TrainConfig TinyConfig(TrainingMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.se.n_blstm_layers = 1;
  c.se.hidden_units = 4;
  c.se.dropout = 0.1;
  c.asr.n_encoder_layers = 1;
  c.asr.n_decoder_layers = 1;
  c.asr.d_model = 8;
  c.asr.n_heads = 2;
  c.asr.conv_kernel = 3;
  c.asr.dropout = 0.1;
  c.features.n_mels = 20;
  c.batch_size = 2;
  c.steps = 4;
  c.lr = 0.01;
  c.seed = 3;
  return c;
}

std::unique_ptr<JointModel> TinyModel(std::uint64_t seed = 5) {
  const TrainConfig c = TinyConfig(TrainingMode::kMtjl);
  return std::make_unique<JointModel>(c.se, c.asr, c.features, Vocabulary::Default(), seed);
}

std::vector<std::vector<double>> Snapshot(const JointModel& m) {
  std::vector<std::vector<double>> out;
  for (const auto& p : m.ParameterTensors()) out.emplace_back(p.data().begin(), p.data().end());
  return out;
}

std::vector<double> GradOf(const Tensor& loss, const Tensor& p) {
  return ad::Backward(loss).Get(p);
}

UtteranceLosses AllLosses(const JointModel& m, const Example& ex, double lambda) {
  LossRequest req;
  req.se = req.asr_noisy = req.asr_clean = true;
  return ComputeLosses(m, ex, req, PhaseMode::kPreserve, lambda, {});
}

TEST(JointTrainingTest, CleanLossNeverReachesSe) {
  const auto model = TinyModel();
  const auto ex = SyntheticExamples(1, 1)[0];
  const auto losses = AllLosses(*model, ex, 0.3);
  const ad::Gradients g = ad::Backward(losses.asr_clean);
  const auto params = model->ParameterTensors();
  const auto is_se = model->SeMask();
  std::size_t n_se = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!is_se[i]) continue;
    ++n_se;
    for (double v : g.Get(params[i])) ASSERT_EQ(v, 0.0);
  }
  EXPECT_GT(n_se, 0u);
  // And L_SE has no path into the ASR network.
  const ad::Gradients gs = ad::Backward(losses.se);
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!is_se[i]) {
      for (double v : gs.Get(params[i])) ASSERT_EQ(v, 0.0);
    }
}

TEST(JointTrainingTest, MtjlEndpoints) {
  const auto model = TinyModel();
  const auto ex = SyntheticExamples(1, 2)[0];
  const double lambda = 0.3;
  const auto losses = AllLosses(*model, ex, lambda);
  const LossWeights b0{lambda, 0.0, 0.7};
  const auto mono = RoutedGradients(*model, losses, TrainingMode::kJointMonotask, b0);
  const auto mtjl0 = RoutedGradients(*model, losses, TrainingMode::kMtjl, b0);
  ASSERT_EQ(mono.size(), mtjl0.size());
  for (std::size_t i = 0; i < mono.size(); ++i)
    for (std::size_t k = 0; k < mono[i].size(); ++k) ASSERT_EQ(mono[i][k], mtjl0[i][k]);

  const LossWeights b1{lambda, 1.0, 0.7};
  const auto mtjl1 = RoutedGradients(*model, losses, TrainingMode::kMtjl, b1);
  const auto is_se = model->SeMask();
  const auto params = model->ParameterTensors();
  const auto se_only = GradOf(losses.se, params[0]);
  for (std::size_t i = 0; i < mtjl1.size(); ++i)
    if (!is_se[i]) {
      for (double v : mtjl1[i]) ASSERT_EQ(v, 0.0);
    }
  ASSERT_TRUE(is_se[0]);
  for (std::size_t k = 0; k < se_only.size(); ++k) ASSERT_NEAR(mtjl1[0][k], se_only[k], 1e-15);
  EXPECT_TRUE(MtjlLoss(losses.asr_noisy, losses.se, 0.5).defined());
  EXPECT_NEAR(MtjlLoss(losses.asr_noisy, losses.se, 0.25).item(),
              0.75 * losses.asr_noisy.item() + 0.25 * losses.se.item(), 1e-12);
}

// Independent route: per parameter group, one backward pass through the
// scalar combination that group should see. L_C carries no SE gradient and
// L_SE no ASR gradient, so each group gets exactly its routed weights.
TEST(JointTrainingTest, DualChannelRoutingMatchesGroupwiseLosses) {
  const auto model = TinyModel();
  const auto ex = SyntheticExamples(1, 4)[0];
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<std::pair<double, double>> settings = {{0.3, 0.7}, {u(rng), u(rng)}, {u(rng), u(rng)}};
  const auto losses = AllLosses(*model, ex, 0.3);
  const auto params = model->ParameterTensors();
  const auto is_se = model->SeMask();
  for (auto [beta, gamma] : settings) {
    const LossWeights w{0.3, beta, gamma};
    const auto routed = RoutedGradients(*model, losses, TrainingMode::kDcMtjl, w);
    using ad::Add;
    using ad::Scale;
    const Tensor se_view = Add(Add(Scale(losses.asr_noisy, 1 - beta), Scale(losses.se, beta)),
                               Scale(losses.asr_clean, gamma));
    const Tensor asr_view = Add(Add(Scale(losses.asr_noisy, 1 - gamma),
                                    Scale(losses.asr_clean, gamma)), Scale(losses.se, 0.7));
    const ad::Gradients gse = ad::Backward(se_view);
    const ad::Gradients gasr = ad::Backward(asr_view);
    double worst = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto want = is_se[i] ? gse.Get(params[i]) : gasr.Get(params[i]);
      for (std::size_t k = 0; k < want.size(); ++k)
        worst = std::max(worst, std::abs(routed[i][k] - want[k]));
    }
    EXPECT_LE(worst, 1e-10) << "beta " << beta << " gamma " << gamma;
  }
}

TEST(JointTrainingTest, RequestsFollowMode) {
  const LossWeights w;
  EXPECT_FALSE(RequestFor(TrainingMode::kBaseline, w).through_se);
  EXPECT_FALSE(RequestFor(TrainingMode::kBaseline, w).se);
  EXPECT_TRUE(RequestFor(TrainingMode::kMtjl, w).se);
  EXPECT_FALSE(RequestFor(TrainingMode::kMtjl, w).asr_clean);
  EXPECT_TRUE(RequestFor(TrainingMode::kDcMtjl, w).asr_clean);
  EXPECT_FALSE(UsesSe(TrainingMode::kBaseline));
  EXPECT_TRUE(UsesSe(TrainingMode::kDisjoint));
  EXPECT_EQ(ParseTrainingMode(TrainingModeName(TrainingMode::kDcMtjl)), TrainingMode::kDcMtjl);
  EXPECT_THROW(ParseTrainingMode("joint-ish"), InvalidInputError);
  EXPECT_THROW((LossWeights{0.3, 1.5, 0.7}.Validate()), InvalidInputError);
}

TEST(TrainerTest, BatchesAndStepsAreDeterministic) {
  const auto data = SyntheticExamples(6, 7);
  Trainer a(TinyConfig(TrainingMode::kDcMtjl), data, {}, Vocabulary::Default());
  Trainer b(TinyConfig(TrainingMode::kDcMtjl), data, {}, Vocabulary::Default());
  for (std::size_t s = 0; s < 6; ++s) EXPECT_EQ(a.BatchIndices(s), b.BatchIndices(s));
  std::vector<std::size_t> seen;
  for (std::size_t s = 0; s < 3; ++s)
    for (auto i : a.BatchIndices(s)) seen.push_back(i);
  std::sort(seen.begin(), seen.end());
  EXPECT_EQ(seen, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));  // one epoch covers all
  for (int s = 0; s < 2; ++s) {
    a.Step();
    b.Step();
  }
  EXPECT_EQ(Snapshot(a.model()), Snapshot(b.model()));
}

TEST(TrainerTest, WorkerCountDoesNotChangeResult) {
  const auto data = SyntheticExamples(4, 8);
  TrainConfig c1 = TinyConfig(TrainingMode::kMtjl), c3 = c1;
  c3.workers = 3;
  Trainer a(c1, data, {}, Vocabulary::Default());
  Trainer b(c3, data, {}, Vocabulary::Default());
  a.Step();
  b.Step();
  EXPECT_EQ(Snapshot(a.model()), Snapshot(b.model()));
}

TEST(TrainerTest, ResumeIsBitwiseIdentical) {
  const auto data = SyntheticExamples(5, 9);
  const std::string ckpt = ::testing::TempDir() + "/resume_test.ckpt";
  for (TrainingMode mode : {TrainingMode::kDcMtjl, TrainingMode::kDisjoint}) {
    TrainConfig cfg = TinyConfig(mode);
    cfg.se_steps = 2;
    Trainer straight(cfg, data, {}, Vocabulary::Default());
    for (int s = 0; s < 4; ++s) straight.Step();
    Trainer first(cfg, data, {}, Vocabulary::Default());
    first.Step();
    first.Step();
    first.SaveCheckpoint(ckpt);
    Trainer second(cfg, data, {}, Vocabulary::Default());
    second.Resume(ckpt);
    EXPECT_EQ(second.step(), 2u);
    second.Step();
    second.Step();
    EXPECT_EQ(Snapshot(second.model()), Snapshot(straight.model())) << TrainingModeName(mode);
  }
}

TEST(TrainerTest, DisjointFreezesTheOtherNetwork) {
  TrainConfig cfg = TinyConfig(TrainingMode::kDisjoint);
  cfg.se_steps = 2;
  cfg.steps = 2;
  Trainer t(cfg, SyntheticExamples(4, 10), {}, Vocabulary::Default());
  const auto is_se = t.model().SeMask();
  auto changed = [&](const auto& before, bool se_group) {
    const auto now = Snapshot(t.model());
    bool any = false;
    for (std::size_t i = 0; i < now.size(); ++i)
      if (is_se[i] == se_group) any |= now[i] != before[i];
    return any;
  };
  const auto p0 = Snapshot(t.model());
  EXPECT_EQ(t.Step().phase, "se");
  t.Step();
  EXPECT_TRUE(changed(p0, true));
  EXPECT_FALSE(changed(p0, false));
  const auto p1 = Snapshot(t.model());
  EXPECT_EQ(t.Step().phase, "asr");
  t.Step();
  EXPECT_FALSE(changed(p1, true));
  EXPECT_TRUE(changed(p1, false));
}

TEST(TrainerTest, BaselineNeverTouchesSe) {
  Trainer t(TinyConfig(TrainingMode::kBaseline), SyntheticExamples(3, 11), {},
            Vocabulary::Default());
  const auto p0 = Snapshot(t.model());
  t.Step();
  const auto p1 = Snapshot(t.model());
  const auto is_se = t.model().SeMask();
  bool asr_moved = false;
  for (std::size_t i = 0; i < p0.size(); ++i) {
    if (is_se[i]) EXPECT_EQ(p0[i], p1[i]);
    else asr_moved |= p0[i] != p1[i];
  }
  EXPECT_TRUE(asr_moved);
}

TEST(TrainerTest, DivergenceLeavesParametersUntouched) {
  TrainConfig cfg = TinyConfig(TrainingMode::kMtjl);
  cfg.lr = 1e300;
  Trainer t(cfg, SyntheticExamples(2, 12), {}, Vocabulary::Default());
  bool diverged = false;
  for (int s = 0; s < 5 && !diverged; ++s) {
    const auto before = Snapshot(t.model());
    try {
      t.Step();
    } catch (const DivergenceError&) {
      diverged = true;
      EXPECT_EQ(Snapshot(t.model()), before);
    }
  }
  EXPECT_TRUE(diverged);
}

TEST(TrainConfigTest, RoundTripsThroughConfig) {
  TrainConfig c = TinyConfig(TrainingMode::kDcMtjl);
  c.weights = {0.2, 0.35, 0.65};
  c.se.mask_activation = ActivationKind::kMetaAcon;
  c.se.phase_mode = PhaseMode::kDiscard;
  c.train_manifest = "data/train.tsv";
  c.target_train_cer = 0.1;
  const Config dumped = c.ToConfig();
  const TrainConfig back = TrainConfig::FromConfig(Config::Parse(dumped.Dump()));
  EXPECT_EQ(back.ToConfig().Dump(), dumped.Dump());
  EXPECT_EQ(back.weights.beta, 0.35);
  EXPECT_EQ(back.se.mask_activation, ActivationKind::kMetaAcon);
  EXPECT_THROW(TrainConfig::FromConfig(Config::Parse("train.bogus = 1")), InvalidInputError);
  EXPECT_THROW(TrainConfig::FromConfig(Config::Parse("loss.beta = 2")).Validate(),
               InvalidInputError);
}

TEST(JointModelTest, CheckpointRoundTrip) {
  const auto a = TinyModel(5);
  a->mvn.mean = Eigen::VectorXd::Constant(20, 0.5);
  a->mvn.std = Eigen::VectorXd::Constant(20, 2.0);
  Checkpoint ck;
  a->Save(ck);
  const auto b = TinyModel(99);
  EXPECT_NE(Snapshot(*a), Snapshot(*b));
  b->LoadParameters(ck);
  EXPECT_EQ(Snapshot(*a), Snapshot(*b));
  EXPECT_EQ(b->mvn.std(3), 2.0);
  const auto ex = SyntheticExamples(1, 13)[0];
  EXPECT_EQ(DecodeWaveform(*a, ex.noisy, TrainingMode::kMtjl, PhaseMode::kPreserve,
                           DecodeMode::kAttention).tokens,
            DecodeWaveform(*b, ex.noisy, TrainingMode::kMtjl, PhaseMode::kPreserve,
                           DecodeMode::kAttention).tokens);
}

TEST(JointTrainingTest, SpeedPerturbTriplesData) {
  const auto data = SyntheticExamples(2, 14);
  const auto sp = SpeedPerturbExamples(data);
  ASSERT_EQ(sp.size(), 6u);
  std::size_t perturbed = 0;
  for (const auto& e : sp)
    if (e.id.find("_sp") != std::string::npos) {
      ++perturbed;
      EXPECT_EQ(e.clean.size(), e.noisy.size());
    }
  EXPECT_EQ(perturbed, 4u);
}

}  // namespace
}  // namespace radioasr
