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

#ifndef RADIOASR_JOINT_TRAINING_H_
#define RADIOASR_JOINT_TRAINING_H_

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "radioasr/asr_backend.h"
#include "radioasr/checkpoint.h"
#include "radioasr/config.h"
#include "radioasr/optim.h"
#include "radioasr/se_frontend.h"

namespace radioasr {

// kBaseline: ASR on MVN noisy features, no SE.
// kDisjoint: SE trained on L_SE alone, then ASR on frozen-SE features.
// kJointMonotask: SE and ASR trained end-to-end on L_ASR only.
// kMtjl: (1 - beta) L_ASR + beta L_SE, one backward pass.
// kDcMtjl: dual-channel routing; ASR gets gamma dL_C + (1 - gamma) dL_N,
//          SE gets beta dL_SE + (1 - beta) dL_N.
enum class TrainingMode { kBaseline, kDisjoint, kJointMonotask, kMtjl, kDcMtjl };

TrainingMode ParseTrainingMode(const std::string& name);
std::string TrainingModeName(TrainingMode mode);
bool UsesSe(TrainingMode mode);

struct LossWeights {
  double lambda = 0.3;
  double beta = 0.3;
  double gamma = 0.7;

  void Validate() const;
};

struct TrainConfig {
  TrainingMode mode = TrainingMode::kMtjl;
  LossWeights weights;
  SeConfig se;
  AsrConfig asr;
  FeatureConfig features;

  std::string train_manifest;
  std::string valid_manifest;
  std::string vocab_path;  // empty: vocab.txt beside the train manifest, else default
  std::string run_dir;
  std::size_t max_train = 0;  // 0 = whole manifest
  bool speed_perturb = false;

  double lr = 0.002;
  std::size_t batch_size = 32;
  std::size_t steps = 2000;
  std::size_t se_steps = 0;  // disjoint SE phase; 0 = same as steps
  std::size_t valid_every = 200;
  std::size_t valid_max = 0;  // 0 = whole validation split
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  std::size_t log_every = 1;
  // Stop early once greedy-attention CER on the training subset is at or
  // below this value (checked at validation points); negative disables.
  double target_train_cer = -1.0;
  bool debug_checks = false;

  static TrainConfig FromConfig(const Config& c);
  Config ToConfig() const;
  static const std::vector<std::string>& KnownKeys();
  void Validate() const;
};

struct Example {
  std::string id;
  Waveform clean;
  Waveform noisy;
  TokenSequence target;
};

// SE and ASR networks sharing one parameter registry ("se." and "asr."
// prefixes), plus the global MVN statistics and vocabulary.
class JointModel {
 public:
  JointModel(const SeConfig& se_cfg, const AsrConfig& asr_cfg,
             const FeatureConfig& features, Vocabulary vocab, std::uint64_t seed);
  JointModel(const JointModel&) = delete;
  JointModel& operator=(const JointModel&) = delete;

  ParameterSet params;
  FeatureConfig features;
  Vocabulary vocab;
  SeNetwork se;
  AsrModel asr;
  MvnStats mvn;  // identity until assigned

  std::vector<Tensor> ParameterTensors() const;
  std::vector<std::string> ParameterNames() const;
  // true for SE parameters, in ParameterTensors() order.
  std::vector<bool> SeMask() const;

  Tensor Normalize(const Tensor& log_mel) const;

  // Writes parameters, MVN statistics and vocabulary into `ckpt`.
  void Save(Checkpoint& ckpt) const;
  void LoadParameters(const Checkpoint& ckpt);
};

// Builds a model from a checkpoint written by the trainer; the resolved
// training config is returned through `cfg`.
std::unique_ptr<JointModel> LoadModel(const std::string& path,
                                      TrainConfig* cfg = nullptr);

struct UtteranceLosses {
  Tensor se;         // L_SE on masked magnitudes
  Tensor asr_noisy;  // L_ASR^N (through SE unless baseline)
  Tensor asr_clean;  // L_ASR^C (dc-mtjl only; never touches SE)
};

// Which losses to build for one utterance.
struct LossRequest {
  bool se = false;
  bool asr_noisy = true;
  bool asr_clean = false;
  bool through_se = true;  // false: plain noisy features (baseline)
  // Precomputed ASR input features (frozen SE); bypasses the front-end.
  const Tensor* fixed_features = nullptr;
};

LossRequest RequestFor(TrainingMode mode, const LossWeights& w);

UtteranceLosses ComputeLosses(const JointModel& model, const Example& ex,
                              const LossRequest& req, PhaseMode phase,
                              double lambda, const ForwardContext& ctx);

// (1 - beta) L_ASR + beta L_SE; a zero-weighted term is left out.
Tensor MtjlLoss(const Tensor& asr, const Tensor& se, double beta);

// Gradients (ParameterTensors() order) that the given mode applies for
// these losses. For kDcMtjl, dL_N is computed once and scaled per
// parameter group.
std::vector<std::vector<double>> RoutedGradients(const JointModel& model,
                                                 const UtteranceLosses& losses,
                                                 TrainingMode mode,
                                                 const LossWeights& w);

struct StepReport {
  std::size_t step = 0;
  std::string phase;
  double l_se = NAN;
  double l_asr_noisy = NAN;
  double l_asr_clean = NAN;
  double l_joint = NAN;
  double grad_norm_se = 0;
  double grad_norm_asr = 0;
  double seconds = 0;

  std::string ToJson() const;
  bool Finite() const;
};

struct ValidationResult {
  double cer = 0;
  std::size_t errors = 0;
  std::size_t ref_tokens = 0;
};

// Greedy-attention character error rate over `examples`.
ValidationResult EvaluateCer(const JointModel& model, TrainingMode mode,
                             PhaseMode phase, const std::vector<Example>& examples,
                             std::size_t workers,
                             DecodeMode decode = DecodeMode::kAttention);

// MVN-normalized ASR input for inference.
Tensor InferenceFeatures(const JointModel& model, const Waveform& noisy,
                         TrainingMode mode, PhaseMode phase);

TokenSequence DecodeWaveform(const JointModel& model, const Waveform& noisy,
                             TrainingMode mode, PhaseMode phase, DecodeMode decode);

std::vector<Example> LoadExamples(const std::string& manifest, const Vocabulary& vocab,
                                  std::size_t limit, std::size_t workers);

// Adds speed-perturbed copies (0.9x and 1.1x) of every example.
std::vector<Example> SpeedPerturbExamples(const std::vector<Example>& examples);

MvnStats ComputeNoisyMvn(const std::vector<Example>& examples,
                         const FeatureConfig& features, std::size_t workers);

struct TrainSummary {
  std::size_t steps_run = 0;
  double best_valid_cer = NAN;
  std::size_t best_step = 0;
  double final_train_cer = NAN;
  bool early_stopped = false;
  double seconds = 0;
  std::string best_checkpoint;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<Example> train, std::vector<Example> valid,
          Vocabulary vocab);

  JointModel& model() { return *model_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t step() const { return step_; }

  // One optimizer step. Throws DivergenceError on a non-finite loss or
  // gradient, leaving parameters untouched.
  StepReport Step();

  // Full loop with logging, validation and checkpointing under run_dir
  // (when set). Resumes from run_dir/ckpt/last.ckpt if present.
  TrainSummary Run(const std::function<void(const StepReport&)>& on_step = {});

  void SaveCheckpoint(const std::string& path) const;
  void Resume(const std::string& path);

  // Training examples drawn at `step` (depends only on seed and step).
  std::vector<std::size_t> BatchIndices(std::size_t step) const;

 private:
  bool InSePhase() const;
  std::size_t TotalSteps() const;
  // Parameters updated in the current phase, ParameterTensors() order.
  std::vector<bool> TrainableMask() const;
  void ResetOptimizer();
  void PrepareFrozenFeatures();

  TrainConfig cfg_;
  std::vector<Example> train_;
  std::vector<Example> valid_;
  std::size_t n_original_train_ = 0;
  std::unique_ptr<JointModel> model_;
  std::unique_ptr<Adam> adam_;
  bool adam_for_se_phase_ = false;
  std::size_t step_ = 0;
  std::vector<Tensor> frozen_features_;  // disjoint ASR phase
};

// Loads manifests, builds a Trainer and runs it; writes config.resolved,
// metrics.jsonl, ckpt/ and report.json under cfg.run_dir.
TrainSummary TrainFromConfig(const TrainConfig& cfg);

}  // namespace radioasr

#endif  // RADIOASR_JOINT_TRAINING_H_
