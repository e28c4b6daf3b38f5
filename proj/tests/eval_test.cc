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
#include <map>
#include <queue>
#include <random>

#include <gtest/gtest.h>

#include "radioasr/error.h"
#include "radioasr/eval.h"

namespace radioasr {
namespace {

TEST(WerTest, HandComputedExamples) {
  const std::vector<int> abc = {1, 2, 3}, axc = {1, 9, 3};
  const WerResult r = Wer(abc, axc);
  EXPECT_EQ(r.substitutions, 1u);
  EXPECT_EQ(r.deletions + r.insertions, 0u);
  EXPECT_DOUBLE_EQ(r.wer, 1.0 / 3);

  const std::vector<int> a = {1};
  const WerResult ins = Wer(a, abc);
  EXPECT_EQ(ins.insertions, 2u);
  EXPECT_EQ(ins.substitutions + ins.deletions, 0u);
  EXPECT_DOUBLE_EQ(ins.wer, 2.0);

  EXPECT_EQ(Wer(std::string("kitten"), std::string("sitting")).errors(), 3u);
  EXPECT_THROW(Wer(std::vector<int>{}, a), InvalidInputError);
  EXPECT_EQ(EditDistance(std::vector<int>{}, abc), 3u);
}

std::vector<std::vector<int>> AllStrings(int symbols, std::size_t max_len) {
  std::vector<std::vector<int>> out = {{}};
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].size() == max_len) continue;
    for (int s = 0; s < symbols; ++s) {
      auto next = out[i];
      next.push_back(s);
      out.push_back(next);
    }
  }
  return out;
}

// Shortest sequence of single-symbol edits, by breadth-first search over
// strings. Intermediate strings never need to be longer than the longer
// endpoint, so the search space is the same bounded set.
std::map<std::vector<int>, int> EditBfs(const std::vector<int>& src, int symbols,
                                        std::size_t max_len) {
  std::map<std::vector<int>, int> dist{{src, 0}};
  std::queue<std::vector<int>> q;
  q.push(src);
  while (!q.empty()) {
    const auto cur = q.front();
    q.pop();
    const int d = dist[cur];
    std::vector<std::vector<int>> next;
    for (std::size_t i = 0; i < cur.size(); ++i) {
      auto del = cur;
      del.erase(del.begin() + i);
      next.push_back(del);
      for (int s = 0; s < symbols; ++s) {
        auto sub = cur;
        sub[i] = s;
        next.push_back(sub);
      }
    }
    if (cur.size() < max_len)
      for (std::size_t i = 0; i <= cur.size(); ++i)
        for (int s = 0; s < symbols; ++s) {
          auto ins = cur;
          ins.insert(ins.begin() + i, s);
          next.push_back(ins);
        }
    for (auto& n : next)
      if (dist.emplace(n, d + 1).second) q.push(n);
  }
  return dist;
}

TEST(WerTest, ExhaustiveAgainstBreadthFirstEditSearch) {
  const auto all = AllStrings(3, 5);
  ASSERT_EQ(all.size(), 364u);
  std::size_t pairs = 0;
  for (const auto& ref : all) {
    const auto dist = EditBfs(ref, 3, 5);
    for (const auto& hyp : all) {
      const int want = dist.at(hyp);
      ASSERT_EQ(EditDistance(ref, hyp), static_cast<std::size_t>(want));
      if (ref.empty()) continue;
      const WerResult r = Wer(ref, hyp);
      ASSERT_EQ(r.errors(), static_cast<std::size_t>(want));
      ASSERT_EQ(r.ref_tokens, ref.size());
      ASSERT_EQ(ref.size() - r.deletions + r.insertions, hyp.size());
      ASSERT_DOUBLE_EQ(r.wer, static_cast<double>(want) / ref.size());
      ++pairs;
    }
  }
  EXPECT_EQ(pairs, 363u * 364u);
}

TEST(WerTest, SwapExchangesInsertionsAndDeletions) {
  const auto all = AllStrings(3, 5);
  for (const auto& a : all)
    for (const auto& b : all) {
      if (a.empty() || b.empty()) continue;
      const WerResult ab = Wer(a, b), ba = Wer(b, a);
      ASSERT_EQ(ab.substitutions, ba.substitutions);
      ASSERT_EQ(ab.insertions, ba.deletions);
      ASSERT_EQ(ab.deletions, ba.insertions);
    }
}

TEST(WerTest, AccumulatesCorpusCounts) {
  WerResult total;
  total += Wer(std::string("abc"), std::string("abd"));
  total += Wer(std::string("a"), std::string(""));
  EXPECT_EQ(total.ref_tokens, 4u);
  EXPECT_EQ(total.errors(), 2u);
  EXPECT_DOUBLE_EQ(total.wer, 0.5);
}

std::vector<double> RandomVec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

TEST(SiSnrTest, ScaleInvariant) {
  const auto ref = RandomVec(400, 1);
  auto est = RandomVec(400, 2);
  for (std::size_t i = 0; i < est.size(); ++i) est[i] = ref[i] + 0.5 * est[i];
  const double base = SiSnr(est, ref);
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    auto scaled = est;
    for (auto& v : scaled) v *= c;
    EXPECT_NEAR(SiSnr(scaled, ref), base, 1e-9);
  }
}

TEST(SiSnrTest, OrthogonalDecompositionClosedForm) {
  // est = a * ref + e with <e, ref> = 0.
  const auto ref = RandomVec(256, 3);
  auto e = RandomVec(256, 4);
  double er = 0, rr = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    er += e[i] * ref[i];
    rr += ref[i] * ref[i];
  }
  for (std::size_t i = 0; i < e.size(); ++i) e[i] -= er / rr * ref[i];
  const double a = 0.8;
  std::vector<double> est(ref.size());
  double ee = 0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    est[i] = a * ref[i] + 0.3 * e[i];
    ee += 0.09 * e[i] * e[i];
  }
  EXPECT_NEAR(SiSnr(est, ref), 10 * std::log10(a * a * rr / ee), 1e-9);
}

TEST(SiSnrTest, CapsAndErrors) {
  const auto ref = RandomVec(64, 5);
  EXPECT_EQ(SiSnr(ref, ref), kSiSnrCapDb);
  std::vector<double> orth(64, 0.0);
  orth[0] = ref[1];
  orth[1] = -ref[0];
  EXPECT_EQ(SiSnr(orth, ref), -kSiSnrCapDb);
  EXPECT_THROW(SiSnr(std::vector<double>(63, 1.0), ref), InvalidInputError);
  EXPECT_THROW(SiSnr(ref, std::vector<double>(64, 0.0)), InvalidInputError);
}

TEST(SeMetricsTest, IdenticalSignals) {
  Waveform w;
  w.samples = RandomVec(2000, 6);
  const SeMetrics m = ComputeSeMetrics(w, w);
  EXPECT_EQ(m.spectral_mse, 0.0);
  EXPECT_EQ(m.si_snr_db, kSiSnrCapDb);
}

TEST(ComparisonTest, DefaultSystems) {
  const auto systems = DefaultComparisonSystems();
  std::map<std::string, int> per_table;
  for (const auto& s : systems) ++per_table[s.table];
  EXPECT_EQ(per_table["systems"], 7);
  EXPECT_EQ(per_table["gamma"], 5);
  EXPECT_EQ(per_table["activation"], 3);
  for (const auto& s : systems) {
    if (s.table == "gamma") {
      EXPECT_EQ(s.mode, TrainingMode::kDcMtjl);
      EXPECT_EQ(s.activation, ActivationKind::kMish);
    }
    if (s.table == "activation") {
      EXPECT_EQ(s.mode, TrainingMode::kMtjl);
    }
  }
  int baselines = 0;
  for (const auto& s : systems) baselines += s.mode == TrainingMode::kBaseline;
  EXPECT_EQ(baselines, 2);  // with and without speed perturbation
}

TEST(ComparisonTest, ReportTextLabelsCharacterErrorRate) {
  ComparisonReport rep;
  SystemResult r;
  r.spec = DefaultComparisonSystems()[0];
  r.test_cer = 0.25;
  r.valid_cer = 0.3;
  rep.systems.push_back(r);
  const std::string text = rep.ToText();
  EXPECT_EQ(text.rfind("Character error rate", 0), 0u);
  EXPECT_NE(text.find(r.spec.label), std::string::npos);
  EXPECT_NE(rep.ToJson().find("test_cer"), std::string::npos);
}

TEST(ComparisonTest, PlanRequiresOutputAndSplits) {
  EXPECT_THROW(RunComparison(Config::Parse("data.train = x.jsonl")), InvalidInputError);
}

}  // namespace
}  // namespace radioasr
