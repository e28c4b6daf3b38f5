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

#include "radioasr/joint_training.h"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "radioasr/corpus.h"
#include "radioasr/error.h"
#include "radioasr/eval.h"
#include "radioasr/parallel.h"

namespace radioasr {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::mt19937_64 StepRng(std::uint64_t seed, std::uint64_t step, std::uint64_t slot) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                    static_cast<std::uint32_t>(slot), 0x5eed5u};
  return std::mt19937_64(seq);
}

void AddScaled(std::vector<double>& dst, const std::vector<double>& src, double w) {
  if (w == 0) return;
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
}

double ValueOr(const Tensor& t) { return t.defined() ? t.item() : NAN; }

json NumberOrNull(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// Shortest text that parses back to the same double.
std::string ToString(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

// ---------------------------------------------------------------------------

TrainingMode ParseTrainingMode(const std::string& name) {
  if (name == "baseline") return TrainingMode::kBaseline;
  if (name == "disjoint") return TrainingMode::kDisjoint;
  if (name == "joint") return TrainingMode::kJointMonotask;
  if (name == "mtjl") return TrainingMode::kMtjl;
  if (name == "dc-mtjl") return TrainingMode::kDcMtjl;
  throw InvalidInputError("unknown training mode '" + name + "'");
}

std::string TrainingModeName(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::kBaseline: return "baseline";
    case TrainingMode::kDisjoint: return "disjoint";
    case TrainingMode::kJointMonotask: return "joint";
    case TrainingMode::kMtjl: return "mtjl";
    case TrainingMode::kDcMtjl: return "dc-mtjl";
  }
  throw InvalidInputError("unknown training mode");
}

bool UsesSe(TrainingMode mode) { return mode != TrainingMode::kBaseline; }

void LossWeights::Validate() const {
  for (double v : {lambda, beta, gamma})
    if (!(v >= 0 && v <= 1))
      throw InvalidInputError("loss weights lambda, beta, gamma must lie in [0, 1]");
}

// ---------------------------------------------------------------------------
// Configuration.

const std::vector<std::string>& TrainConfig::KnownKeys() {
  static const std::vector<std::string> keys = {
      "train.mode", "loss.lambda", "loss.beta", "loss.gamma",
      "se.layers", "se.hidden", "se.mask_act", "se.phase", "se.dropout",
      "se.acon_bottleneck", "se.head_bias_init",
      "asr.enc_layers", "asr.dec_layers", "asr.d_model", "asr.heads",
      "asr.ff_mult", "asr.conv_kernel", "asr.dropout",
      "feat.n_fft", "feat.hop", "feat.n_mels",
      "data.train", "data.valid", "data.vocab", "data.max_train",
      "data.speed_perturb",
      "train.lr", "train.batch_size", "train.steps", "train.se_steps",
      "train.valid_every", "train.valid_max", "train.clip_norm", "train.seed",
      "train.workers", "train.log_every", "train.target_train_cer",
      "train.debug_checks", "train.run_dir"};
  return keys;
}

TrainConfig TrainConfig::FromConfig(const Config& c) {
  const auto unknown = c.UnknownKeys(KnownKeys());
  if (!unknown.empty()) throw InvalidInputError("config: unknown key '" + unknown[0] + "'");
  auto size = [&](const std::string& key, std::size_t fallback) {
    const long long v = c.GetInt(key, static_cast<long long>(fallback));
    if (v < 0) throw InvalidInputError("config: " + key + " must be >= 0");
    return static_cast<std::size_t>(v);
  };
  TrainConfig t;
  t.mode = ParseTrainingMode(c.GetString("train.mode", TrainingModeName(t.mode)));
  t.weights.lambda = c.GetDouble("loss.lambda", t.weights.lambda);
  t.weights.beta = c.GetDouble("loss.beta", t.weights.beta);
  t.weights.gamma = c.GetDouble("loss.gamma", t.weights.gamma);
  t.se.n_blstm_layers = size("se.layers", t.se.n_blstm_layers);
  t.se.hidden_units = size("se.hidden", t.se.hidden_units);
  t.se.mask_activation =
      ParseActivation(c.GetString("se.mask_act", ActivationName(t.se.mask_activation)));
  t.se.phase_mode = ParsePhaseMode(c.GetString("se.phase", PhaseModeName(t.se.phase_mode)));
  t.se.dropout = c.GetDouble("se.dropout", t.se.dropout);
  t.se.acon_bottleneck = size("se.acon_bottleneck", t.se.acon_bottleneck);
  t.se.head_bias_init = c.GetDouble("se.head_bias_init", t.se.head_bias_init);
  t.asr.n_encoder_layers = size("asr.enc_layers", t.asr.n_encoder_layers);
  t.asr.n_decoder_layers = size("asr.dec_layers", t.asr.n_decoder_layers);
  t.asr.d_model = size("asr.d_model", t.asr.d_model);
  t.asr.n_heads = size("asr.heads", t.asr.n_heads);
  t.asr.ff_multiplier = size("asr.ff_mult", t.asr.ff_multiplier);
  t.asr.conv_kernel = size("asr.conv_kernel", t.asr.conv_kernel);
  t.asr.dropout = c.GetDouble("asr.dropout", t.asr.dropout);
  t.features.stft.n_fft = size("feat.n_fft", t.features.stft.n_fft);
  t.features.stft.hop = size("feat.hop", t.features.stft.hop);
  t.features.n_mels = size("feat.n_mels", t.features.n_mels);
  t.train_manifest = c.GetString("data.train", "");
  t.valid_manifest = c.GetString("data.valid", "");
  t.vocab_path = c.GetString("data.vocab", "");
  t.max_train = size("data.max_train", t.max_train);
  t.speed_perturb = c.GetBool("data.speed_perturb", t.speed_perturb);
  t.lr = c.GetDouble("train.lr", t.lr);
  t.batch_size = size("train.batch_size", t.batch_size);
  t.steps = size("train.steps", t.steps);
  t.se_steps = size("train.se_steps", t.se_steps);
  t.valid_every = size("train.valid_every", t.valid_every);
  t.valid_max = size("train.valid_max", t.valid_max);
  t.clip_norm = c.GetDouble("train.clip_norm", t.clip_norm);
  t.seed = static_cast<std::uint64_t>(c.GetInt("train.seed", static_cast<long long>(t.seed)));
  t.workers = size("train.workers", t.workers);
  t.log_every = size("train.log_every", t.log_every);
  t.target_train_cer = c.GetDouble("train.target_train_cer", t.target_train_cer);
  t.debug_checks = c.GetBool("train.debug_checks", t.debug_checks);
  t.run_dir = c.GetString("train.run_dir", "");
  t.asr.ctc_weight = t.weights.lambda;
  t.asr.input_dim = t.features.n_mels;
  return t;
}

Config TrainConfig::ToConfig() const {
  Config c;
  c.Set("train.mode", TrainingModeName(mode));
  c.Set("loss.lambda", ToString(weights.lambda));
  c.Set("loss.beta", ToString(weights.beta));
  c.Set("loss.gamma", ToString(weights.gamma));
  c.Set("se.layers", std::to_string(se.n_blstm_layers));
  c.Set("se.hidden", std::to_string(se.hidden_units));
  c.Set("se.mask_act", ActivationName(se.mask_activation));
  c.Set("se.phase", PhaseModeName(se.phase_mode));
  c.Set("se.dropout", ToString(se.dropout));
  c.Set("se.acon_bottleneck", std::to_string(se.acon_bottleneck));
  c.Set("se.head_bias_init", ToString(se.head_bias_init));
  c.Set("asr.enc_layers", std::to_string(asr.n_encoder_layers));
  c.Set("asr.dec_layers", std::to_string(asr.n_decoder_layers));
  c.Set("asr.d_model", std::to_string(asr.d_model));
  c.Set("asr.heads", std::to_string(asr.n_heads));
  c.Set("asr.ff_mult", std::to_string(asr.ff_multiplier));
  c.Set("asr.conv_kernel", std::to_string(asr.conv_kernel));
  c.Set("asr.dropout", ToString(asr.dropout));
  c.Set("feat.n_fft", std::to_string(features.stft.n_fft));
  c.Set("feat.hop", std::to_string(features.stft.hop));
  c.Set("feat.n_mels", std::to_string(features.n_mels));
  c.Set("data.train", train_manifest);
  c.Set("data.valid", valid_manifest);
  c.Set("data.vocab", vocab_path);
  c.Set("data.max_train", std::to_string(max_train));
  c.Set("data.speed_perturb", speed_perturb ? "true" : "false");
  c.Set("train.lr", ToString(lr));
  c.Set("train.batch_size", std::to_string(batch_size));
  c.Set("train.steps", std::to_string(steps));
  c.Set("train.se_steps", std::to_string(se_steps));
  c.Set("train.valid_every", std::to_string(valid_every));
  c.Set("train.valid_max", std::to_string(valid_max));
  c.Set("train.clip_norm", ToString(clip_norm));
  c.Set("train.seed", std::to_string(seed));
  c.Set("train.workers", std::to_string(workers));
  c.Set("train.log_every", std::to_string(log_every));
  c.Set("train.target_train_cer", ToString(target_train_cer));
  c.Set("train.debug_checks", debug_checks ? "true" : "false");
  c.Set("train.run_dir", run_dir);
  return c;
}

void TrainConfig::Validate() const {
  weights.Validate();
  se.Validate();
  features.stft.Validate();
  AsrConfig a = asr;
  a.vocab_size = std::max<std::size_t>(a.vocab_size, 4);
  a.Validate();
  if (batch_size == 0) throw InvalidInputError("train.batch_size must be > 0");
  if (!(lr > 0)) throw InvalidInputError("train.lr must be > 0");
  if (valid_every == 0) throw InvalidInputError("train.valid_every must be > 0");
  if (log_every == 0) throw InvalidInputError("train.log_every must be > 0");
}

// ---------------------------------------------------------------------------
// Model bundle.

namespace {

AsrConfig BindAsr(AsrConfig cfg, const FeatureConfig& features, const Vocabulary& vocab) {
  cfg.vocab_size = vocab.size();
  cfg.input_dim = features.n_mels;
  return cfg;
}

}  // namespace

JointModel::JointModel(const SeConfig& se_cfg, const AsrConfig& asr_cfg,
                       const FeatureConfig& feature_cfg, Vocabulary vocabulary,
                       std::uint64_t seed)
    : features(feature_cfg), vocab(std::move(vocabulary)) {
  std::mt19937_64 rng(seed);
  se = SeNetwork(params, se_cfg, features, rng, "se");
  asr = AsrModel(params, BindAsr(asr_cfg, features, vocab), rng, "asr");
  mvn.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(features.n_mels));
  mvn.std = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(features.n_mels));
}

std::vector<Tensor> JointModel::ParameterTensors() const {
  std::vector<Tensor> out;
  for (const auto& [_, t] : params.items()) out.push_back(t);
  return out;
}

std::vector<std::string> JointModel::ParameterNames() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : params.items()) out.push_back(n);
  return out;
}

std::vector<bool> JointModel::SeMask() const {
  std::vector<bool> out;
  for (const auto& [n, _] : params.items()) out.push_back(n.rfind("se.", 0) == 0);
  return out;
}

Tensor JointModel::Normalize(const Tensor& log_mel) const {
  return ad::ApplyMvn(log_mel, mvn);
}

void JointModel::Save(Checkpoint& ckpt) const {
  for (const auto& [name, t] : params.items())
    ckpt.Put(name, t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
  const std::size_t d = features.n_mels;
  ckpt.Put("mvn.mean", {d}, std::vector<double>(mvn.mean.data(), mvn.mean.data() + d));
  ckpt.Put("mvn.std", {d}, std::vector<double>(mvn.std.data(), mvn.std.data() + d));
  std::string v;
  for (const auto& tok : vocab.tokens()) v += tok + "\n";
  ckpt.meta["vocab"] = v;
}

void JointModel::LoadParameters(const Checkpoint& ckpt) {
  for (const auto& [name, t] : params.items()) {
    const NamedArray& a = ckpt.Get(name);
    if (a.shape != t.shape())
      throw InvalidInputError("checkpoint: shape mismatch for " + name + ": " +
                              ad::ShapeToString(a.shape) + " vs " +
                              ad::ShapeToString(t.shape()));
    Tensor handle = t;
    std::copy(a.data.begin(), a.data.end(), handle.mutable_data().begin());
  }
  const auto& mean = ckpt.Get("mvn.mean");
  const auto& sd = ckpt.Get("mvn.std");
  if (mean.data.size() != features.n_mels || sd.data.size() != features.n_mels)
    throw InvalidInputError("checkpoint: MVN dimension mismatch");
  mvn.mean = Eigen::Map<const Eigen::VectorXd>(mean.data.data(), mean.data.size());
  mvn.std = Eigen::Map<const Eigen::VectorXd>(sd.data.data(), sd.data.size());
}

std::unique_ptr<JointModel> LoadModel(const std::string& path, TrainConfig* cfg_out) {
  const Checkpoint ckpt = LoadCheckpoint(path);
  const auto cfg_it = ckpt.meta.find("config");
  const auto vocab_it = ckpt.meta.find("vocab");
  if (cfg_it == ckpt.meta.end() || vocab_it == ckpt.meta.end())
    throw IoError("checkpoint " + path + " lacks model metadata");
  const TrainConfig cfg = TrainConfig::FromConfig(Config::Parse(cfg_it->second, path));
  std::vector<std::string> tokens;
  std::istringstream vs(vocab_it->second);
  for (std::string line; std::getline(vs, line);)
    if (!line.empty()) tokens.push_back(line);
  auto model = std::make_unique<JointModel>(cfg.se, cfg.asr, cfg.features,
                                            Vocabulary::FromTokens(tokens), cfg.seed);
  model->LoadParameters(ckpt);
  if (cfg_out) *cfg_out = cfg;
  return model;
}

// ---------------------------------------------------------------------------
// Losses and routing.

LossRequest RequestFor(TrainingMode mode, const LossWeights& w) {
  LossRequest r;
  switch (mode) {
    case TrainingMode::kBaseline:
      r.through_se = false;
      break;
    case TrainingMode::kDisjoint:
    case TrainingMode::kJointMonotask:
      break;
    case TrainingMode::kMtjl:
      r.se = w.beta > 0;
      r.asr_noisy = w.beta < 1;
      break;
    case TrainingMode::kDcMtjl:
      r.se = w.beta > 0;
      r.asr_noisy = w.beta < 1 || w.gamma < 1;
      r.asr_clean = w.gamma > 0;
      break;
  }
  return r;
}

UtteranceLosses ComputeLosses(const JointModel& model, const Example& ex,
                              const LossRequest& req, PhaseMode phase,
                              double lambda, const ForwardContext& ctx) {
  const auto& stft = model.features.stft;
  const Matrix& fb = model.se.filterbank();
  UtteranceLosses out;
  EnhancedTape tape;
  const bool need_front_end =
      req.se || (req.asr_noisy && req.through_se && !req.fixed_features);
  if (need_front_end) {
    tape = EnhanceOnTape(model.se, ex.noisy, phase, ctx);
    if (req.se) {
      if (ex.clean.size() != ex.noisy.size())
        throw InvalidInputError("utterance " + ex.id + ": missing or misaligned clean reference");
      out.se = SeLoss(tape.masked_mag, MagnitudeTensor(ex.clean, stft));
    }
  }
  if (req.asr_noisy) {
    Tensor feats;
    if (req.fixed_features)
      feats = *req.fixed_features;
    else if (req.through_se)
      feats = model.Normalize(tape.features);
    else
      feats = model.Normalize(PlainFeatures(ex.noisy, stft, fb));
    const Tensor enc = model.asr.Encode(feats, ctx);
    out.asr_noisy = model.asr.AsrLoss(enc, ex.target, lambda, ctx).total;
  }
  if (req.asr_clean) {
    if (ex.clean.size() == 0)
      throw InvalidInputError("utterance " + ex.id + ": dual-channel mode needs a clean waveform");
    const Tensor feats = model.Normalize(PlainFeatures(ex.clean, stft, fb));
    const Tensor enc = model.asr.Encode(feats, ctx);
    out.asr_clean = model.asr.AsrLoss(enc, ex.target, lambda, ctx).total;
  }
  return out;
}

Tensor MtjlLoss(const Tensor& asr, const Tensor& se, double beta) {
  if (!(beta >= 0 && beta <= 1)) throw InvalidInputError("mtjl: beta must be in [0, 1]");
  if (beta == 0) return asr;
  if (beta == 1) return se;
  if (!asr.defined() || !se.defined())
    throw InvalidInputError("mtjl: both losses are needed for 0 < beta < 1");
  return ad::Add(ad::Scale(asr, 1 - beta), ad::Scale(se, beta));
}

std::vector<std::vector<double>> RoutedGradients(const JointModel& model,
                                                 const UtteranceLosses& losses,
                                                 TrainingMode mode,
                                                 const LossWeights& w) {
  const auto params = model.ParameterTensors();
  const auto is_se = model.SeMask();
  std::vector<std::vector<double>> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) out[i].assign(params[i].size(), 0.0);

  auto add = [&](const Tensor& loss, double w_se, double w_asr) {
    if (!loss.defined() || (w_se == 0 && w_asr == 0)) return;
    const ad::Gradients g = ad::Backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double weight = is_se[i] ? w_se : w_asr;
      if (weight == 0) continue;
      if (const auto* gi = g.Find(params[i])) AddScaled(out[i], *gi, weight);
    }
  };

  switch (mode) {
    case TrainingMode::kBaseline:
    case TrainingMode::kJointMonotask:
      add(losses.asr_noisy, 1, 1);
      break;
    case TrainingMode::kDisjoint:
      add(losses.se, 1, 0);
      add(losses.asr_noisy, 0, 1);
      break;
    case TrainingMode::kMtjl:
      add(MtjlLoss(losses.asr_noisy, losses.se, w.beta), 1, 1);
      break;
    case TrainingMode::kDcMtjl:
      // One backward pass per loss; the shared dL_N is weighted 1 - beta
      // for SE parameters and 1 - gamma for ASR parameters.
      add(losses.asr_noisy, 1 - w.beta, 1 - w.gamma);
      add(losses.se, w.beta, 0);
      add(losses.asr_clean, 0, w.gamma);
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string StepReport::ToJson() const {
  json j;
  j["step"] = step;
  j["phase"] = phase;
  j["l_se"] = NumberOrNull(l_se);
  j["l_asr_noisy"] = NumberOrNull(l_asr_noisy);
  j["l_asr_clean"] = NumberOrNull(l_asr_clean);
  j["l_joint"] = NumberOrNull(l_joint);
  j["grad_norm_se"] = NumberOrNull(grad_norm_se);
  j["grad_norm_asr"] = NumberOrNull(grad_norm_asr);
  j["seconds"] = seconds;
  return j.dump();
}

bool StepReport::Finite() const {
  for (double v : {l_se, l_asr_noisy, l_asr_clean, l_joint})
    if (std::isinf(v)) return false;
  // NaN marks an absent loss only when the joint value is finite.
  return std::isfinite(l_joint) && std::isfinite(grad_norm_se) &&
         std::isfinite(grad_norm_asr);
}

Tensor InferenceFeatures(const JointModel& model, const Waveform& noisy,
                         TrainingMode mode, PhaseMode phase) {
  ad::NoGradGuard no_grad;
  if (!UsesSe(mode))
    return model.Normalize(PlainFeatures(noisy, model.features.stft, model.se.filterbank()));
  const EnhancedTape tape = EnhanceOnTape(model.se, noisy, phase, ForwardContext{});
  return model.Normalize(tape.features);
}

TokenSequence DecodeWaveform(const JointModel& model, const Waveform& noisy,
                             TrainingMode mode, PhaseMode phase, DecodeMode decode) {
  ad::NoGradGuard no_grad;
  const Tensor enc = model.asr.Encode(InferenceFeatures(model, noisy, mode, phase),
                                      ForwardContext{});
  TokenSequence out = model.asr.GreedyDecode(enc, decode);
  out.text = model.vocab.Decode(out.tokens);
  return out;
}

ValidationResult EvaluateCer(const JointModel& model, TrainingMode mode,
                             PhaseMode phase, const std::vector<Example>& examples,
                             std::size_t workers, DecodeMode decode) {
  std::vector<std::size_t> errors(examples.size());
  ParallelFor(examples.size(), workers, [&](std::size_t i) {
    const TokenSequence hyp = DecodeWaveform(model, examples[i].noisy, mode, phase, decode);
    errors[i] = EditDistance(examples[i].target.tokens, hyp.tokens);
  });
  ValidationResult r;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    r.errors += errors[i];
    r.ref_tokens += examples[i].target.tokens.size();
  }
  r.cer = r.ref_tokens ? static_cast<double>(r.errors) / r.ref_tokens : 0.0;
  return r;
}

std::vector<Example> LoadExamples(const std::string& manifest, const Vocabulary& vocab,
                                  std::size_t limit, std::size_t workers) {
  auto records = LoadManifest(manifest);
  if (limit > 0 && records.size() > limit) records.resize(limit);
  std::vector<Example> out(records.size());
  ParallelFor(records.size(), workers, [&](std::size_t i) {
    UtterancePair p = LoadPair(records[i]);
    out[i].id = p.id;
    out[i].clean = std::move(p.clean);
    out[i].noisy = std::move(p.noisy);
    out[i].target = Tokenize(p.transcript, vocab);
  });
  return out;
}

std::vector<Example> SpeedPerturbExamples(const std::vector<Example>& examples) {
  std::vector<Example> out(examples);
  for (double factor : kSpeedFactors) {
    if (factor == 1.0) continue;
    for (const auto& ex : examples) {
      Example e;
      e.id = ex.id + "_sp" + std::to_string(static_cast<int>(std::lround(factor * 10)));
      e.clean = SpeedPerturb(ex.clean, factor);
      e.noisy = SpeedPerturb(ex.noisy, factor);
      e.target = ex.target;
      out.push_back(std::move(e));
    }
  }
  return out;
}

MvnStats ComputeNoisyMvn(const std::vector<Example>& examples,
                         const FeatureConfig& features, std::size_t workers) {
  if (examples.empty()) throw InvalidInputError("MVN: no training examples");
  std::vector<MelFeatures> feats(examples.size());
  ParallelFor(examples.size(), workers, [&](std::size_t i) {
    feats[i] = LogMel(Magnitude(Stft(examples[i].noisy, features.stft)), features.n_mels,
                      features.sample_rate);
  });
  return ComputeMvn(feats);
}

// ---------------------------------------------------------------------------
// Trainer.

Trainer::Trainer(TrainConfig cfg, std::vector<Example> train, std::vector<Example> valid,
                 Vocabulary vocab)
    : cfg_(std::move(cfg)), train_(std::move(train)), valid_(std::move(valid)) {
  cfg_.Validate();
  if (train_.empty()) throw InvalidInputError("train: empty training set");
  if (cfg_.se_steps == 0) cfg_.se_steps = cfg_.steps;
  cfg_.asr.ctc_weight = cfg_.weights.lambda;
  n_original_train_ = train_.size();
  if (cfg_.speed_perturb) train_ = SpeedPerturbExamples(train_);
  ad::SetDebugChecks(cfg_.debug_checks);
  model_ = std::make_unique<JointModel>(cfg_.se, cfg_.asr, cfg_.features, std::move(vocab),
                                        cfg_.seed);
  model_->mvn = ComputeNoisyMvn(train_, cfg_.features, cfg_.workers);
  ResetOptimizer();
}

bool Trainer::InSePhase() const {
  return cfg_.mode == TrainingMode::kDisjoint && step_ < cfg_.se_steps;
}

std::size_t Trainer::TotalSteps() const {
  return cfg_.mode == TrainingMode::kDisjoint ? cfg_.se_steps + cfg_.steps : cfg_.steps;
}

std::vector<bool> Trainer::TrainableMask() const {
  std::vector<bool> mask = model_->SeMask();
  switch (cfg_.mode) {
    case TrainingMode::kBaseline:
      for (auto&& m : mask) m = !m;
      break;
    case TrainingMode::kDisjoint:
      if (!InSePhase())
        for (auto&& m : mask) m = !m;
      break;
    default:
      std::fill(mask.begin(), mask.end(), true);
  }
  return mask;
}

void Trainer::ResetOptimizer() {
  const auto params = model_->ParameterTensors();
  const auto mask = TrainableMask();
  std::vector<Tensor> trainable;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (mask[i]) trainable.push_back(params[i]);
  AdamOptions opt;
  opt.lr = cfg_.lr;
  adam_ = std::make_unique<Adam>(std::move(trainable), opt);
  adam_for_se_phase_ = InSePhase();
}

void Trainer::PrepareFrozenFeatures() {
  frozen_features_.assign(train_.size(), Tensor());
  ParallelFor(train_.size(), cfg_.workers, [&](std::size_t i) {
    frozen_features_[i] = InferenceFeatures(*model_, train_[i].noisy, cfg_.mode,
                                            cfg_.se.phase_mode);
  });
}

std::vector<std::size_t> Trainer::BatchIndices(std::size_t step) const {
  const std::size_t n = train_.size();
  std::vector<std::size_t> out;
  out.reserve(cfg_.batch_size);
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < cfg_.batch_size; ++j) {
    const std::size_t pos = step * cfg_.batch_size + j;
    const std::size_t epoch = pos / n;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), 0);
      std::mt19937_64 rng = StepRng(cfg_.seed, epoch, 0xe90c);
      std::shuffle(perm.begin(), perm.end(), rng);
      cached_epoch = epoch;
    }
    out.push_back(perm[pos % n]);
  }
  return out;
}

StepReport Trainer::Step() {
  const auto t0 = std::chrono::steady_clock::now();
  const bool se_phase = InSePhase();
  if (se_phase != adam_for_se_phase_) ResetOptimizer();
  const bool frozen = cfg_.mode == TrainingMode::kDisjoint && !se_phase;
  if (frozen && frozen_features_.size() != train_.size()) PrepareFrozenFeatures();

  LossRequest req = RequestFor(cfg_.mode, cfg_.weights);
  if (cfg_.mode == TrainingMode::kDisjoint) {
    req.se = se_phase;
    req.asr_noisy = !se_phase;
  }
  const auto batch = BatchIndices(step_);
  const std::size_t B = batch.size();
  const auto params = model_->ParameterTensors();

  struct Slot {
    std::vector<std::vector<double>> grads;
    double l_se = NAN, l_n = NAN, l_c = NAN;
  };
  std::vector<Slot> slots(B);
  auto per_utterance = [&](std::size_t j) {
    std::mt19937_64 rng = StepRng(cfg_.seed, step_, j + 1);
    const ForwardContext ctx{true, &rng};
    LossRequest r = req;
    if (frozen) r.fixed_features = &frozen_features_[batch[j]];
    const UtteranceLosses losses = ComputeLosses(*model_, train_[batch[j]], r,
                                                 cfg_.se.phase_mode, cfg_.weights.lambda, ctx);
    slots[j].l_se = ValueOr(losses.se);
    slots[j].l_n = ValueOr(losses.asr_noisy);
    slots[j].l_c = ValueOr(losses.asr_clean);
    slots[j].grads = RoutedGradients(*model_, losses, cfg_.mode, cfg_.weights);
  };
  try {
    ParallelFor(B, cfg_.workers, per_utterance);
  } catch (const DivergenceError&) {
    throw;
  } catch (const NumericError& e) {
    // Underflow inside a loss (e.g. CTC) means the model has blown up.
    StepReport partial;
    partial.step = step_ + 1;
    throw DivergenceError("numeric failure at step " + std::to_string(partial.step) + ": " +
                              e.what(),
                          partial.ToJson());
  }

  std::vector<std::vector<double>> grads(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) grads[i].assign(params[i].size(), 0.0);
  StepReport rep;
  rep.step = step_ + 1;
  rep.phase = se_phase ? "se" : (cfg_.mode == TrainingMode::kDisjoint ? "asr" : "joint");
  double s_se = 0, s_n = 0, s_c = 0;
  for (const auto& s : slots) {
    for (std::size_t i = 0; i < params.size(); ++i) AddScaled(grads[i], s.grads[i], 1.0 / B);
    s_se += s.l_se;
    s_n += s.l_n;
    s_c += s.l_c;
  }
  rep.l_se = req.se ? s_se / B : NAN;
  rep.l_asr_noisy = req.asr_noisy ? s_n / B : NAN;
  rep.l_asr_clean = req.asr_clean ? s_c / B : NAN;
  const LossWeights& w = cfg_.weights;
  switch (cfg_.mode) {
    case TrainingMode::kBaseline:
    case TrainingMode::kJointMonotask:
      rep.l_joint = rep.l_asr_noisy;
      break;
    case TrainingMode::kDisjoint:
      rep.l_joint = se_phase ? rep.l_se : rep.l_asr_noisy;
      break;
    case TrainingMode::kMtjl:
      rep.l_joint = (w.beta < 1 ? (1 - w.beta) * rep.l_asr_noisy : 0) +
                    (w.beta > 0 ? w.beta * rep.l_se : 0);
      break;
    case TrainingMode::kDcMtjl: {
      // beta L_SE + (1 - beta)(gamma L_C + (1 - gamma) L_N)
      const double asr = (w.gamma > 0 ? w.gamma * rep.l_asr_clean : 0) +
                         (w.gamma < 1 ? (1 - w.gamma) * rep.l_asr_noisy : 0);
      rep.l_joint = (w.beta > 0 ? w.beta * rep.l_se : 0) + (w.beta < 1 ? (1 - w.beta) * asr : 0);
      break;
    }
  }

  const auto is_se = model_->SeMask();
  const auto trainable = TrainableMask();
  double n_se = 0, n_asr = 0;
  std::vector<std::vector<double>> applied;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double sq = 0;
    for (double g : grads[i]) sq += g * g;
    (is_se[i] ? n_se : n_asr) += sq;
    if (trainable[i]) applied.push_back(std::move(grads[i]));
  }
  rep.grad_norm_se = std::sqrt(n_se);
  rep.grad_norm_asr = std::sqrt(n_asr);
  if (!rep.Finite())
    throw DivergenceError("non-finite loss or gradient at step " + std::to_string(rep.step),
                          rep.ToJson());
  ClipGlobalNorm(applied, cfg_.clip_norm);
  adam_->Step(applied);
  ++step_;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

void Trainer::SaveCheckpoint(const std::string& path) const {
  Checkpoint ckpt;
  model_->Save(ckpt);
  ckpt.meta["config"] = cfg_.ToConfig().Dump();
  ckpt.meta["step"] = std::to_string(step_);
  ckpt.meta["optimizer_phase"] = adam_for_se_phase_ ? "se" : "main";
  const auto params = model_->ParameterTensors();
  const auto names = model_->ParameterNames();
  const auto mask = TrainableMask();
  std::vector<std::string> trainable;
  for (std::size_t i = 0; i < names.size(); ++i)
    if (mask[i]) trainable.push_back(names[i]);
  // The optimizer always matches the current phase after Step(); at a
  // phase boundary it is rebuilt on the next step anyway.
  if (adam_for_se_phase_ == InSePhase()) adam_->Save(ckpt, trainable);
  radioasr::SaveCheckpoint(path, ckpt);
}

void Trainer::Resume(const std::string& path) {
  const Checkpoint ckpt = LoadCheckpoint(path);
  model_->LoadParameters(ckpt);
  step_ = static_cast<std::size_t>(std::stoull(ckpt.meta.at("step")));
  ResetOptimizer();
  const auto names = model_->ParameterNames();
  const auto mask = TrainableMask();
  std::vector<std::string> trainable;
  for (std::size_t i = 0; i < names.size(); ++i)
    if (mask[i]) trainable.push_back(names[i]);
  if (ckpt.Find("adam.step")) adam_->Load(ckpt, trainable);
  frozen_features_.clear();
}

TrainSummary Trainer::Run(const std::function<void(const StepReport&)>& on_step) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainSummary summary;
  std::ofstream metrics;
  const fs::path run = cfg_.run_dir;
  const bool persist = !cfg_.run_dir.empty();
  const fs::path last = run / "ckpt" / "last.ckpt";
  const fs::path best = run / "ckpt" / "best.ckpt";
  if (persist) {
    fs::create_directories(run / "ckpt");
    const bool resuming = fs::exists(last);
    if (resuming) Resume(last.string());
    {
      std::ofstream resolved(run / "config.resolved");
      resolved << cfg_.ToConfig().Dump();
      if (!resolved) throw IoError("cannot write " + (run / "config.resolved").string());
    }
    metrics.open(run / "metrics.jsonl", resuming ? std::ios::app : std::ios::trunc);
    if (!metrics) throw IoError("cannot write " + (run / "metrics.jsonl").string());
    json header;
    header["config"] = json::object();
    const Config resolved = cfg_.ToConfig();
    for (const auto& [k, v] : resolved.values()) header["config"][k] = v;
    header["resumed_at_step"] = step_;
    metrics << header.dump() << '\n' << std::flush;
  }
  const std::vector<Example> train_eval(train_.begin(), train_.begin() + n_original_train_);

  const std::size_t total = TotalSteps();
  while (step_ < total) {
    StepReport rep;
    try {
      rep = Step();
    } catch (const DivergenceError& e) {
      if (persist) metrics << e.report() << '\n' << std::flush;
      throw;
    }
    if (on_step) on_step(rep);
    if (persist && (rep.step % cfg_.log_every == 0 || rep.step == total))
      metrics << rep.ToJson() << '\n';
    ++summary.steps_run;

    const bool checkpoint_due = step_ % cfg_.valid_every == 0 || step_ == total;
    if (!checkpoint_due || InSePhase()) continue;
    json line;
    line["step"] = step_;
    if (!valid_.empty()) {
      const auto v = EvaluateCer(*model_, cfg_.mode, cfg_.se.phase_mode, valid_, cfg_.workers);
      line["valid_cer"] = v.cer;
      if (!(v.cer >= summary.best_valid_cer)) {
        summary.best_valid_cer = v.cer;
        summary.best_step = step_;
        if (persist) {
          SaveCheckpoint(best.string());
          summary.best_checkpoint = best.string();
        }
      }
    }
    bool stop = false;
    if (cfg_.target_train_cer >= 0) {
      const auto t = EvaluateCer(*model_, cfg_.mode, cfg_.se.phase_mode, train_eval, cfg_.workers);
      line["train_cer"] = t.cer;
      summary.final_train_cer = t.cer;
      stop = t.cer <= cfg_.target_train_cer;
    }
    if (persist) {
      metrics << line.dump() << '\n' << std::flush;
      SaveCheckpoint(last.string());
    }
    if (stop) {
      summary.early_stopped = true;
      break;
    }
  }
  if (persist && summary.best_checkpoint.empty()) {
    SaveCheckpoint(best.string());
    summary.best_checkpoint = best.string();
  }
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (persist) {
    json rep;
    rep["mode"] = TrainingModeName(cfg_.mode);
    rep["steps_run"] = summary.steps_run;
    rep["final_step"] = step_;
    rep["best_valid_cer"] = NumberOrNull(summary.best_valid_cer);
    rep["best_step"] = summary.best_step;
    rep["final_train_cer"] = NumberOrNull(summary.final_train_cer);
    rep["early_stopped"] = summary.early_stopped;
    rep["seconds"] = summary.seconds;
    rep["best_checkpoint"] = summary.best_checkpoint;
    rep["metric"] = "character error rate (greedy attention decoding)";
    std::ofstream out(run / "report.json");
    out << rep.dump(2) << '\n';
    if (!out) throw IoError("cannot write report.json");
  }
  return summary;
}

TrainSummary TrainFromConfig(const TrainConfig& cfg) {
  if (cfg.train_manifest.empty()) throw InvalidInputError("config: data.train is required");
  Vocabulary vocab = Vocabulary::Default();
  if (!cfg.vocab_path.empty()) {
    vocab = Vocabulary::Load(cfg.vocab_path);
  } else {
    const fs::path beside = fs::path(cfg.train_manifest).parent_path() / "vocab.txt";
    if (fs::exists(beside)) vocab = Vocabulary::Load(beside.string());
  }
  auto train = LoadExamples(cfg.train_manifest, vocab, cfg.max_train, cfg.workers);
  std::vector<Example> valid;
  if (!cfg.valid_manifest.empty())
    valid = LoadExamples(cfg.valid_manifest, vocab, cfg.valid_max, cfg.workers);
  Trainer trainer(cfg, std::move(train), std::move(valid), std::move(vocab));
  return trainer.Run();
}

}  // namespace radioasr
