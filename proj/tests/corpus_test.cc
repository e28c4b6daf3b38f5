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
#include <complex>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "radioasr/corpus.h"
#include "radioasr/error.h"

namespace radioasr {
namespace {

namespace fs = std::filesystem;

std::string ReadAll(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double Energy(const std::vector<double>& x) {
  double e = 0;
  for (double v : x) e += v * v;
  return e;
}

TEST(CorpusTest, SnrWithinTenthOfDecibel) {
  DegradeConfig cfg;
  const auto texts = SampleTranscripts(50, 3, 10, kDefaultAlphabet, 21);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto rng = UtteranceRng(21, "snr" + std::to_string(i));
    const Waveform clean = SynthClean(texts[i], rng);
    const DegradeDetail d = DegradeDetailed(clean, cfg, rng);
    // Oracle: energy ratio of the pre-noise reference and the noise
    // actually present in the output.
    std::vector<double> noise(d.output.size());
    for (std::size_t k = 0; k < noise.size(); ++k)
      noise[k] = d.output.samples[k] / d.scale - d.reference[k] - d.interference[k];
    const double snr = 10 * std::log10(Energy(d.reference) / Energy(noise));
    EXPECT_NEAR(snr, 0.0, 0.1) << texts[i];
    EXPECT_NEAR(MeasuredSnrDb(d), 0.0, 1e-9);
  }
}

TEST(CorpusTest, OutputPeakIsLimited) {
  DegradeConfig cfg;
  cfg.snr_db = -10;
  auto rng = UtteranceRng(3, "peak");
  const Waveform clean = SynthClean("abcdefg", rng);
  const DegradeDetail d = DegradeDetailed(clean, cfg, rng);
  double peak = 0;
  for (double v : d.output.samples) peak = std::max(peak, std::abs(v));
  EXPECT_LE(peak, kNoisyPeakLimit + 1e-12);
  EXPECT_LT(d.scale, 1.0);
}

// Band energies of filtered white noise, measured on the FFT.
TEST(CorpusTest, BandpassAttenuatesOneOctaveOutsideTheBand) {
  const std::size_t n = 1 << 15;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  const auto y = BandpassFilter(x, 300, 3400, 16000);
  auto density = [&](const std::vector<double>& s, double lo, double hi) {
    std::vector<std::complex<double>> spec(n / 2 + 1);
    RealFft(s, spec);
    double e = 0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < spec.size(); ++k) {
      const double f = 16000.0 * k / n;
      if (f >= lo && f <= hi) {
        e += std::norm(spec[k]);
        ++count;
      }
    }
    return e / count;
  };
  auto gain_db = [&](double lo, double hi) {
    return 10 * std::log10(density(y, lo, hi) / density(x, lo, hi));
  };
  const double pass = gain_db(600, 3000);
  EXPECT_NEAR(pass, 0.0, 1.0);
  EXPECT_LE(gain_db(1, 150), pass - 20);
  EXPECT_LE(gain_db(6800, 8000), pass - 20);
  // Attenuation grows with distance from the edge.
  EXPECT_LT(gain_db(4500, 5500), pass - 5);
}

TEST(CorpusTest, DegradeReducesToClippingWhenEverythingElseIsOff) {
  DegradeConfig cfg;
  cfg.snr_db = std::numeric_limits<double>::infinity();
  cfg.bandpass = false;
  cfg.clip_drive = 1.0;
  cfg.interference_prob = 0.0;
  auto rng = UtteranceRng(5, "id");
  Waveform clean = SynthClean("hij", rng);
  const Waveform out = Degrade(clean, cfg, rng);
  ASSERT_EQ(out.size(), clean.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    ASSERT_EQ(out.samples[i], std::tanh(clean.samples[i]));
    ASSERT_NEAR(out.samples[i], clean.samples[i], std::pow(kCleanPeak, 3) / 3 + 1e-12);
  }
}

TEST(CorpusTest, SynthLengthAndFormants) {
  auto rng = UtteranceRng(1, "len");
  for (std::size_t n = 1; n <= 5; ++n)
    EXPECT_EQ(SynthClean(std::string(n, 'c'), rng).size(), SynthLength(n));
  std::set<std::pair<double, double>> distinct;
  for (char c : std::string(kDefaultAlphabet)) distinct.insert(CharFormants(c, kDefaultAlphabet));
  EXPECT_EQ(distinct.size(), 10u);
  EXPECT_THROW(CharFormants('z', kDefaultAlphabet), InvalidInputError);
}

TEST(CorpusTest, TranscriptsAreDistinctAndInRange) {
  const auto t = SampleTranscripts(200, 3, 10, kDefaultAlphabet, 2);
  ASSERT_EQ(t.size(), 200u);
  EXPECT_EQ(std::set<std::string>(t.begin(), t.end()).size(), 200u);
  for (const auto& s : t) {
    EXPECT_GE(s.size(), 3u);
    EXPECT_LE(s.size(), 10u);
  }
  EXPECT_EQ(t, SampleTranscripts(200, 3, 10, kDefaultAlphabet, 2));
}

TEST(CorpusTest, UtteranceRngDependsOnSeedAndId) {
  auto a = UtteranceRng(1, "x"), b = UtteranceRng(1, "x");
  auto c = UtteranceRng(2, "x"), d = UtteranceRng(1, "y");
  const auto va = a();
  EXPECT_EQ(va, b());
  EXPECT_NE(va, c());
  EXPECT_NE(va, d());
}

TEST(CorpusTest, GenerationIsIdenticalForAnyWorkerCount) {
  const fs::path root = fs::path(::testing::TempDir()) / "corpus_det";
  fs::remove_all(root);
  for (std::size_t workers : {1u, 3u}) {
    CorpusSpec spec;
    spec.out_dir = (root / std::to_string(workers)).string();
    spec.n_train = 4;
    spec.n_valid = 2;
    spec.n_test = 2;
    spec.seed = 9;
    spec.workers = workers;
    GenerateCorpus(spec);
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(root / "1")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root / "1");
    ASSERT_TRUE(fs::exists(root / "3" / rel)) << rel;
    EXPECT_EQ(ReadAll(e.path()), ReadAll(root / "3" / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 8u * 2 + 3 + 1);

  const auto train = LoadManifest((root / "1" / "train.jsonl").string());
  ASSERT_EQ(train.size(), 4u);
  const UtterancePair p = LoadPair(train[0]);
  EXPECT_EQ(p.clean.size(), p.noisy.size());
  EXPECT_EQ(p.clean.size(), SynthLength(p.transcript.size()));
  EXPECT_NEAR(train[0].duration_s, p.clean.duration(), 1e-9);
}

TEST(CorpusTest, ManifestRoundTripAndErrors) {
  const fs::path dir = fs::path(::testing::TempDir()) / "manifest_rt";
  fs::create_directories(dir);
  std::ofstream(dir / "a.wav") << "x";
  std::ofstream(dir / "b.wav") << "x";
  const std::vector<ManifestRecord> recs = {{"u1", "a.wav", "b.wav", "abc", 1.5}};
  WriteManifest((dir / "m.jsonl").string(), recs);
  const auto back = LoadManifest((dir / "m.jsonl").string());
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].id, "u1");
  EXPECT_EQ(back[0].transcript, "abc");
  EXPECT_EQ(fs::path(back[0].clean_path), dir / "a.wav");
  std::ofstream(dir / "bad.jsonl") << "{not json\n";
  EXPECT_ANY_THROW(LoadManifest((dir / "bad.jsonl").string()));
  EXPECT_THROW(LoadManifest((dir / "missing.jsonl").string()), IoError);
}

TEST(CorpusTest, TokenizeRoundTrip) {
  const Vocabulary v = Vocabulary::Default();
  const auto seq = Tokenize("jihg", v);
  EXPECT_EQ(Detokenize(seq, v), "jihg");
  EXPECT_THROW(Tokenize("", v), InvalidInputError);
}

TEST(CorpusTest, ConfigValidation) {
  DegradeConfig cfg;
  cfg.clip_drive = 0.5;
  EXPECT_THROW(cfg.Validate(), InvalidInputError);
  cfg = DegradeConfig{};
  cfg.high_hz = 9000;
  EXPECT_THROW(cfg.Validate(), InvalidInputError);
}

}  // namespace
}  // namespace radioasr
