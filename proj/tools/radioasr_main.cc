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

// radioasr command-line front end.
//
// Exit codes: 0 success, 1 check failure, 2 usage or I/O error,
// 3 numeric divergence during training.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "radioasr/corpus.h"
#include "radioasr/error.h"
#include "radioasr/eval.h"
#include "radioasr/gradient_suite.h"
#include "radioasr/joint_training.h"

namespace fs = std::filesystem;
using namespace radioasr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

void RequireFile(const std::string& path) {
  if (!fs::is_regular_file(path)) throw IoError("no such file: " + path);
}

struct GenCorpusArgs {
  std::string out;
  std::size_t n_train = 200, n_valid = 20, n_test = 20;
  double snr_db = 0.0;
  std::uint64_t seed = 1;
};

int RunGenCorpus(const GenCorpusArgs& a, std::size_t workers) {
  CorpusSpec spec;
  spec.out_dir = a.out;
  spec.n_train = a.n_train;
  spec.n_valid = a.n_valid;
  spec.n_test = a.n_test;
  spec.degrade.snr_db = a.snr_db;
  spec.seed = a.seed;
  spec.workers = workers;
  GenerateCorpus(spec);
  std::cout << "wrote " << a.n_train << "/" << a.n_valid << "/" << a.n_test
            << " train/valid/test pairs at " << a.snr_db << " dB SNR to " << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::optional<std::string> mode, phase, mask_act, run_dir;
  std::optional<double> lambda, beta, gamma;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  bool speed_perturb = false;
  bool quiet = false;
};

int RunTrain(const TrainArgs& a, std::optional<std::size_t> workers) {
  RequireFile(a.config);
  Config c = Config::Load(a.config);
  // Flags override the file.
  if (a.mode) c.Set("train.mode", *a.mode);
  if (a.phase) c.Set("se.phase", *a.phase);
  if (a.mask_act) c.Set("se.mask_act", *a.mask_act);
  if (a.run_dir) c.Set("train.run_dir", *a.run_dir);
  if (a.lambda) c.Set("loss.lambda", std::to_string(*a.lambda));
  if (a.beta) c.Set("loss.beta", std::to_string(*a.beta));
  if (a.gamma) c.Set("loss.gamma", std::to_string(*a.gamma));
  if (a.steps) c.Set("train.steps", std::to_string(*a.steps));
  if (a.seed) c.Set("train.seed", std::to_string(*a.seed));
  if (a.speed_perturb) c.Set("data.speed_perturb", "true");
  if (workers) c.Set("train.workers", std::to_string(*workers));
  TrainConfig cfg = TrainConfig::FromConfig(c);
  if (cfg.run_dir.empty()) cfg.run_dir = "runs/" + TrainingModeName(cfg.mode);
  // Relative manifest paths in the config are taken relative to the config file.
  const fs::path base = fs::path(a.config).parent_path();
  for (std::string* p : {&cfg.train_manifest, &cfg.valid_manifest, &cfg.vocab_path})
    if (!p->empty() && fs::path(*p).is_relative() && !fs::exists(*p)) *p = (base / *p).string();

  std::cout << "training " << TrainingModeName(cfg.mode) << " into " << cfg.run_dir << "\n";
  Vocabulary vocab = Vocabulary::Default();
  if (!cfg.vocab_path.empty()) {
    vocab = Vocabulary::Load(cfg.vocab_path);
  } else if (const fs::path v = fs::path(cfg.train_manifest).parent_path() / "vocab.txt";
             fs::exists(v)) {
    vocab = Vocabulary::Load(v.string());
  }
  RequireFile(cfg.train_manifest);
  auto train = LoadExamples(cfg.train_manifest, vocab, cfg.max_train, cfg.workers);
  std::vector<Example> valid;
  if (!cfg.valid_manifest.empty()) {
    RequireFile(cfg.valid_manifest);
    valid = LoadExamples(cfg.valid_manifest, vocab, cfg.valid_max, cfg.workers);
  }
  Trainer trainer(cfg, std::move(train), std::move(valid), std::move(vocab));
  const TrainSummary s = trainer.Run([&](const StepReport& r) {
    if (!a.quiet && (r.step % 50 == 0 || r.step == 1))
      std::cout << "step " << r.step << " [" << r.phase << "] loss " << r.l_joint << "\n";
  });
  std::cout << "finished after " << trainer.step() << " steps";
  if (s.early_stopped) std::cout << " (training CER target reached)";
  if (std::isfinite(s.best_valid_cer))
    std::cout << "; best validation CER " << std::fixed << std::setprecision(2)
              << 100 * s.best_valid_cer << "% at step " << s.best_step;
  std::cout << "\ncheckpoint: " << s.best_checkpoint << "\n";
  return kExitOk;
}

int RunEnhance(const std::string& ckpt, const std::string& in, const std::string& out) {
  RequireFile(ckpt);
  RequireFile(in);
  TrainConfig cfg;
  const auto model = LoadModel(ckpt, &cfg);
  if (!UsesSe(cfg.mode))
    std::cerr << "warning: checkpoint was trained without enhancement; the mask is untrained\n";
  const Waveform noisy = ReadWav(in);
  Waveform enhanced = EnhanceWaveform(model->se, noisy);
  enhanced.samples.resize(noisy.size(), 0.0);
  WriteWav(out, enhanced);
  return kExitOk;
}

int RunDecode(const std::string& ckpt, const std::string& in, const std::string& mode) {
  RequireFile(ckpt);
  RequireFile(in);
  TrainConfig cfg;
  const auto model = LoadModel(ckpt, &cfg);
  const TokenSequence hyp = DecodeWaveform(*model, ReadWav(in), cfg.mode, cfg.se.phase_mode,
                                           ParseDecodeMode(mode));
  std::cout << hyp.text << "\n";
  return kExitOk;
}

int RunEvaluate(const std::string& ckpt, const std::string& manifest, const std::string& mode,
                bool per_utterance, std::size_t workers) {
  RequireFile(ckpt);
  RequireFile(manifest);
  TrainConfig cfg;
  const auto model = LoadModel(ckpt, &cfg);
  const auto examples = LoadExamples(manifest, model->vocab, 0, workers);
  const CorpusResult r = EvaluateExamples(*model, cfg.mode, cfg.se.phase_mode, examples,
                                          ParseDecodeMode(mode), workers);
  std::cout << r.ToJson(per_utterance) << "\n";
  return kExitOk;
}

int RunCompare(const std::string& plan_path, std::optional<std::string> out,
               std::optional<std::size_t> steps, std::optional<std::size_t> workers) {
  RequireFile(plan_path);
  Config plan = Config::Load(plan_path);
  const fs::path base = fs::path(plan_path).parent_path();
  for (const char* key : {"data.train", "data.valid", "data.test", "data.vocab"}) {
    const std::string v = plan.GetString(key, "");
    if (!v.empty() && fs::path(v).is_relative() && !fs::exists(v))
      plan.Set(key, (base / v).string());
  }
  if (out) plan.Set("compare.out", *out);
  if (steps) plan.Set("compare.steps", std::to_string(*steps));
  if (workers) plan.Set("train.workers", std::to_string(*workers));
  const ComparisonReport report =
      RunComparison(plan, [](const std::string& msg) { std::cerr << msg << "\n"; });
  std::cout << report.ToText();
  return kExitOk;
}

int RunGradcheck(const std::string& filter, double tolerance, bool verbose) {
  GradientSuiteOptions opt;
  opt.filter = filter;
  opt.check.tolerance = tolerance;
  std::size_t failed = 0, total = 0;
  RunGradientSuite(opt, [&](const ad::GradCheckResult& r) {
    ++total;
    if (!r.passed) ++failed;
    if (verbose || !r.passed)
      std::cout << (r.passed ? "ok    " : "FAIL  ") << std::left << std::setw(32) << r.name
                << " coords " << std::setw(6) << r.coords_checked << " max rel err "
                << std::scientific << std::setprecision(2) << r.max_rel_error
                << std::defaultfloat << "\n";
  });
  std::cout << total - failed << "/" << total << " gradient checks passed\n";
  if (total == 0) {
    std::cerr << "no gradient checks match '" << filter << "'\n";
    return kExitUsage;
  }
  return failed ? kExitCheckFailed : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint speech enhancement and recognition toolkit"};
  app.require_subcommand(1);
  std::optional<std::size_t> workers;
  app.add_option("--workers", workers, "Worker threads (0 = all cores, 1 = sequential)");

  GenCorpusArgs gen;
  auto* cmd_gen = app.add_subcommand("gen-corpus", "Generate the synthetic paired corpus");
  cmd_gen->add_option("--out", gen.out, "Output directory")->required();
  cmd_gen->add_option("--train", gen.n_train, "Training pairs");
  cmd_gen->add_option("--valid", gen.n_valid, "Validation pairs");
  cmd_gen->add_option("--test", gen.n_test, "Test pairs");
  cmd_gen->add_option("--snr-db", gen.snr_db, "Additive noise SNR in dB");
  cmd_gen->add_option("--seed", gen.seed, "Random seed");

  TrainArgs tr;
  auto* cmd_train = app.add_subcommand("train", "Train a model from a config file");
  cmd_train->add_option("--config", tr.config, "Config file (section.key = value)")->required();
  cmd_train->add_option("--mode", tr.mode, "baseline|disjoint|joint|mtjl|dc-mtjl")
      ->check(CLI::IsMember({"baseline", "disjoint", "joint", "mtjl", "dc-mtjl"}));
  cmd_train->add_option("--lambda", tr.lambda, "CTC weight");
  cmd_train->add_option("--beta", tr.beta, "SE loss weight");
  cmd_train->add_option("--gamma", tr.gamma, "Clean-channel weight (dc-mtjl)");
  cmd_train->add_option("--phase", tr.phase, "preserve|discard")
      ->check(CLI::IsMember({"preserve", "discard"}));
  cmd_train->add_option("--mask-act", tr.mask_act, "relu|mish|metaacon")
      ->check(CLI::IsMember({"relu", "mish", "metaacon"}));
  cmd_train->add_flag("--speed-perturb", tr.speed_perturb, "Add 0.9x and 1.1x copies");
  cmd_train->add_option("--steps", tr.steps, "Optimizer steps");
  cmd_train->add_option("--seed", tr.seed, "Random seed");
  cmd_train->add_option("--run-dir", tr.run_dir, "Output directory");
  cmd_train->add_flag("--quiet", tr.quiet, "No per-step progress");

  std::string ckpt, in, out, manifest, decode_mode = "attention", plan;
  bool per_utt = false;
  auto* cmd_enh = app.add_subcommand("enhance", "Denoise a WAV file");
  cmd_enh->add_option("--ckpt", ckpt, "Checkpoint")->required();
  cmd_enh->add_option("--in", in, "Input WAV")->required();
  cmd_enh->add_option("--out", out, "Output WAV")->required();

  auto* cmd_dec = app.add_subcommand("decode", "Transcribe a WAV file");
  cmd_dec->add_option("--ckpt", ckpt, "Checkpoint")->required();
  cmd_dec->add_option("--in", in, "Input WAV")->required();
  cmd_dec->add_option("--mode", decode_mode, "ctc|attention")
      ->check(CLI::IsMember({"ctc", "attention"}));

  auto* cmd_eval = app.add_subcommand("evaluate", "Score a checkpoint on a manifest");
  cmd_eval->add_option("--ckpt", ckpt, "Checkpoint")->required();
  cmd_eval->add_option("--manifest", manifest, "JSONL manifest")->required();
  cmd_eval->add_option("--mode", decode_mode, "ctc|attention")
      ->check(CLI::IsMember({"ctc", "attention"}));
  cmd_eval->add_flag("--utterances", per_utt, "Include per-utterance results");

  std::optional<std::string> cmp_out;
  std::optional<std::size_t> cmp_steps;
  auto* cmd_cmp = app.add_subcommand("compare", "Train and score the comparison suite");
  cmd_cmp->add_option("--plan", plan, "Plan file")->required();
  cmd_cmp->add_option("--out", cmp_out, "Output directory (overrides compare.out)");
  cmd_cmp->add_option("--steps", cmp_steps, "Steps per system (overrides compare.steps)");

  std::string filter;
  double tolerance = 1e-4;
  bool verbose = false;
  auto* cmd_gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  cmd_gc->add_option("--filter", filter, "Only checks whose name contains this");
  cmd_gc->add_option("--tolerance", tolerance, "Max elementwise relative error");
  cmd_gc->add_flag("-v,--verbose", verbose, "Print every check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const std::size_t w = workers.value_or(1);
  try {
    if (*cmd_gen) return RunGenCorpus(gen, workers.value_or(0));
    if (*cmd_train) return RunTrain(tr, workers);
    if (*cmd_enh) return RunEnhance(ckpt, in, out);
    if (*cmd_dec) return RunDecode(ckpt, in, decode_mode);
    if (*cmd_eval) return RunEvaluate(ckpt, manifest, decode_mode, per_utt, w);
    if (*cmd_cmp) return RunCompare(plan, cmp_out, cmp_steps, workers);
    if (*cmd_gc) return RunGradcheck(filter, tolerance, verbose);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n" << e.report() << "\n";
    return kExitDivergence;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
