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
#include "radioasr/se_frontend.h"

namespace radioasr {
namespace {

Waveform RandomWave(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  Waveform w;
  w.samples.resize(n);
  for (auto& v : w.samples) v = g(rng);
  return w;
}

double RmsDiff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return std::sqrt(s / a.size());
}

class FeaturePathTest : public ::testing::Test {
 protected:
  FeatureConfig fc;
  Matrix fb = fc.Filterbank();
  Waveform wave = RandomWave(512 + 128 * 20, 3);
  Tensor spec = ad::PackSpectrogram(Stft(wave, fc.stft));
  std::size_t frames = spec.rows();
  std::size_t bins = fc.stft.n_fft / 2 + 1;
};

TEST_F(FeaturePathTest, UnitMaskPathsAgree) {
  const Tensor ones = Tensor::Constant({frames, bins}, std::vector<double>(frames * bins, 1.0));
  const auto d = FeaturesFromMask(spec, ones, PhaseMode::kDiscard, fc.stft, fb);
  const auto p = FeaturesFromMask(spec, ones, PhaseMode::kPreserve, fc.stft, fb);
  ASSERT_EQ(d.features.shape(), p.features.shape());
  double worst = 0;
  for (std::size_t i = 0; i < d.features.size(); ++i)
    worst = std::max(worst, std::abs(d.features.data()[i] - p.features.data()[i]));
  EXPECT_LT(worst, 1e-5);
  EXPECT_FALSE(d.enhanced_wave.defined());
  EXPECT_TRUE(p.enhanced_wave.defined());
}

TEST_F(FeaturePathTest, RandomMaskPathsDiffer) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> m(frames * bins);
  for (auto& v : m) v = u(rng);
  const Tensor mask = Tensor::Constant({frames, bins}, m);
  const auto d = FeaturesFromMask(spec, mask, PhaseMode::kDiscard, fc.stft, fb);
  const auto p = FeaturesFromMask(spec, mask, PhaseMode::kPreserve, fc.stft, fb);
  EXPECT_GT(RmsDiff(d.features, p.features), 1e-3);
}

TEST_F(FeaturePathTest, DiscardFeaturesAreLogMelOfMaskedPower) {
  const Tensor half = Tensor::Constant({frames, bins}, std::vector<double>(frames * bins, 0.5));
  const auto d = FeaturesFromMask(spec, half, PhaseMode::kDiscard, fc.stft, fb);
  MagnitudeSpectrogram mag = Magnitude(Stft(wave, fc.stft));
  mag.mag *= 0.5;
  const MelFeatures want = LogMel(mag, fc.n_mels, fc.sample_rate);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t m = 0; m < fc.n_mels; ++m)
      ASSERT_NEAR(d.features.at(t, m), want.feats(t, m), 1e-9);
}

TEST(SeNetworkTest, MaskIsNonNegativeForEveryActivation) {
  const FeatureConfig fc;
  const Waveform w = RandomWave(512 + 128 * 6, 5);
  for (ActivationKind act : {ActivationKind::kRelu, ActivationKind::kMish,
                             ActivationKind::kSwish, ActivationKind::kMetaAcon}) {
    ParameterSet params;
    std::mt19937_64 rng(1);
    SeConfig cfg;
    cfg.hidden_units = 8;
    cfg.n_blstm_layers = 1;
    cfg.mask_activation = act;
    cfg.head_bias_init = -0.5;  // pushes pre-activations negative
    const SeNetwork net(params, cfg, fc, rng);
    const Tensor mask = net.EstimateMask(MagnitudeTensor(w, fc.stft), {});
    ASSERT_EQ(mask.cols(), fc.stft.n_fft / 2 + 1);
    for (double v : mask.data()) ASSERT_GE(v, 0.0) << ActivationName(act);
  }
}

TEST(SeNetworkTest, HeadBiasStartsAtConfiguredValue) {
  ParameterSet params;
  std::mt19937_64 rng(2);
  SeConfig cfg;
  cfg.hidden_units = 4;
  const SeNetwork net(params, cfg, FeatureConfig{}, rng);
  for (double b : net.head.bias.data()) EXPECT_EQ(b, 1.0);
  EXPECT_NE(params.Find("se.head.bias"), nullptr);
}

TEST(SeNetworkTest, EnhanceKeepsInputLength) {
  ParameterSet params;
  std::mt19937_64 rng(3);
  SeConfig cfg;
  cfg.hidden_units = 4;
  cfg.n_blstm_layers = 1;
  const SeNetwork net(params, cfg, FeatureConfig{}, rng);
  const Waveform w = RandomWave(512 + 128 * 5 + 77, 4);
  const auto out = Enhance(net, w, PhaseMode::kPreserve);
  ASSERT_TRUE(out.enhanced_wave.has_value());
  EXPECT_EQ(out.enhanced_wave->size(), w.size());
  EXPECT_EQ(EnhanceWaveform(net, w).size(), w.size());
}

TEST(SeNetworkTest, ConfigValidation) {
  SeConfig cfg;
  cfg.dropout = 1.0;
  EXPECT_THROW(cfg.Validate(), InvalidInputError);
  cfg = SeConfig{};
  cfg.n_blstm_layers = 0;
  EXPECT_THROW(cfg.Validate(), InvalidInputError);
  EXPECT_EQ(ParsePhaseMode("discard"), PhaseMode::kDiscard);
  EXPECT_THROW(ParsePhaseMode("keep"), InvalidInputError);
}

TEST(SeLossTest, MeanSquaredError) {
  const Tensor a = Tensor::Constant({1, 2}, {1.0, 3.0});
  const Tensor b = Tensor::Constant({1, 2}, {0.0, 1.0});
  EXPECT_DOUBLE_EQ(SeLoss(a, b).item(), 2.5);
}

}  // namespace
}  // namespace radioasr
