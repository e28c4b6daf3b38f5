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

#ifndef RADIOASR_EVAL_H_
#define RADIOASR_EVAL_H_

#include <span>
#include <string>
#include <vector>

#include "radioasr/joint_training.h"

namespace radioasr {

struct WerResult {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_tokens = 0;
  double wer = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  WerResult& operator+=(const WerResult& o);
  std::string ToJson() const;
};

// Unit-cost Levenshtein alignment. Among minimal alignments the one with the
// most substitutions is reported (substitution preferred over insertion over
// deletion); the insertion and deletion counts then follow from the lengths,
// so swapping ref and hyp keeps S and exchanges I and D.
// Throws InvalidInputError on an empty reference.
WerResult Wer(std::span<const int> ref, std::span<const int> hyp);
WerResult Wer(const TokenSequence& ref, const TokenSequence& hyp);
// Character-level convenience.
WerResult Wer(const std::string& ref, const std::string& hyp);

// Plain edit distance (no tie-breaking), allows an empty reference.
std::size_t EditDistance(std::span<const int> a, std::span<const int> b);

inline constexpr double kSiSnrCapDb = 60.0;

// Scale-invariant SNR in dB, clamped to [-60, 60]. Throws on unequal
// lengths or a silent reference.
double SiSnr(std::span<const double> est, std::span<const double> ref);
double SiSnr(const Waveform& est, const Waveform& ref);

struct SeMetrics {
  double spectral_mse = 0;  // mean (|S_est| - |S_ref|)^2
  double si_snr_db = 0;
};

SeMetrics ComputeSeMetrics(const Waveform& est, const Waveform& ref,
                           const StftParams& stft = {});

struct UtteranceResult {
  std::string id;
  std::string reference;
  std::string hypothesis;
  WerResult wer;
  double si_snr_noisy = NAN;
  double si_snr_enhanced = NAN;
};

struct CorpusResult {
  WerResult total;  // summed counts; total.wer is corpus-level CER
  double mean_si_snr_noisy = NAN;
  double mean_si_snr_enhanced = NAN;
  std::vector<UtteranceResult> utterances;

  std::string ToJson(bool include_utterances) const;
};

CorpusResult EvaluateExamples(const JointModel& model, TrainingMode mode,
                              PhaseMode phase, const std::vector<Example>& examples,
                              DecodeMode decode, std::size_t workers);

// ---------------------------------------------------------------------------
// Comparison suite.

struct SystemSpec {
  std::string table;  // "systems", "gamma", "activation"
  std::string label;
  std::string description;
  TrainingMode mode = TrainingMode::kMtjl;
  PhaseMode phase = PhaseMode::kPreserve;
  ActivationKind activation = ActivationKind::kRelu;
  double beta = 0.3;
  double gamma = 0.7;
  bool speed_perturb = false;
};

// The seven-system table, the gamma sweep {0.3, ..., 0.7} (dual-channel,
// Mish) and the activation sweep {ReLU, Mish, meta-ACON} (single-channel).
std::vector<SystemSpec> DefaultComparisonSystems();

struct SystemResult {
  SystemSpec spec;
  double valid_cer = NAN;
  double test_cer = NAN;
  double si_snr_enhanced = NAN;
  double seconds = 0;
  std::size_t steps = 0;
  bool reused = false;  // identical configuration trained earlier in the run
};

struct ComparisonReport {
  std::vector<SystemResult> systems;
  double mean_si_snr_noisy = NAN;
  std::string ToText() const;
  std::string ToJson() const;
};

// Plan file: any training keys (shared base configuration) plus
//   data.test, compare.out, compare.steps, compare.se_steps,
//   compare.gammas, compare.activations, compare.tables.
ComparisonReport RunComparison(const Config& plan,
                               const std::function<void(const std::string&)>& log = {});

}  // namespace radioasr

#endif  // RADIOASR_EVAL_H_
