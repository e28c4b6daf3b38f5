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

#include "radioasr/eval.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "radioasr/corpus.h"
#include "radioasr/error.h"
#include "radioasr/parallel.h"

namespace radioasr {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

json NumberOrNull(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::vector<int> Chars(const std::string& s) { return std::vector<int>(s.begin(), s.end()); }

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

WerResult& WerResult::operator+=(const WerResult& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_tokens += o.ref_tokens;
  wer = ref_tokens ? static_cast<double>(errors()) / ref_tokens : 0.0;
  return *this;
}

std::string WerResult::ToJson() const {
  json j;
  j["substitutions"] = substitutions;
  j["deletions"] = deletions;
  j["insertions"] = insertions;
  j["ref_tokens"] = ref_tokens;
  j["cer"] = wer;
  return j.dump();
}

WerResult Wer(std::span<const int> ref, std::span<const int> hyp) {
  if (ref.empty()) throw InvalidInputError("wer: empty reference");
  const std::size_t n = ref.size(), m = hyp.size();
  // Cells hold (edit cost, -substitutions); lexicographic minimum picks the
  // most substitutions among minimal alignments.
  using Cell = std::pair<std::size_t, long>;
  std::vector<Cell> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> Cell& { return d[i * (m + 1) + j]; };
  auto diag = [&](std::size_t i, std::size_t j) {
    const bool sub = ref[i - 1] != hyp[j - 1];
    const Cell& c = at(i - 1, j - 1);
    return Cell{c.first + sub, c.second - sub};
  };
  auto step = [](const Cell& c) { return Cell{c.first + 1, c.second}; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = {i, 0};
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = {j, 0};
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({diag(i, j), step(at(i, j - 1)), step(at(i - 1, j))});
  WerResult r;
  r.ref_tokens = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == diag(i, j)) {
      r.substitutions += ref[i - 1] != hyp[j - 1];
      --i;
      --j;
    } else if (j > 0 && at(i, j) == step(at(i, j - 1))) {
      ++r.insertions;
      --j;
    } else {
      ++r.deletions;
      --i;
    }
  }
  r.wer = static_cast<double>(r.errors()) / n;
  return r;
}

WerResult Wer(const TokenSequence& ref, const TokenSequence& hyp) {
  return Wer(std::span<const int>(ref.tokens), std::span<const int>(hyp.tokens));
}

WerResult Wer(const std::string& ref, const std::string& hyp) {
  const auto r = Chars(ref), h = Chars(hyp);
  return Wer(std::span<const int>(r), std::span<const int>(h));
}

std::size_t EditDistance(std::span<const int> a, std::span<const int> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j - 1] + (a[i - 1] != b[j - 1]), prev[j] + 1, cur[j - 1] + 1});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double SiSnr(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size())
    throw InvalidInputError("si_snr: length mismatch " + std::to_string(est.size()) + " vs " +
                            std::to_string(ref.size()));
  double rr = 0, er = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    rr += ref[i] * ref[i];
    er += est[i] * ref[i];
  }
  if (!(rr > 0)) throw InvalidInputError("si_snr: silent reference");
  const double a = er / rr;
  double tt = 0, nn = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double t = a * ref[i];
    const double e = est[i] - t;
    tt += t * t;
    nn += e * e;
  }
  if (nn == 0) return kSiSnrCapDb;
  if (tt == 0) return -kSiSnrCapDb;
  return std::clamp(10 * std::log10(tt / nn), -kSiSnrCapDb, kSiSnrCapDb);
}

double SiSnr(const Waveform& est, const Waveform& ref) {
  return SiSnr(std::span<const double>(est.samples), std::span<const double>(ref.samples));
}

SeMetrics ComputeSeMetrics(const Waveform& est, const Waveform& ref, const StftParams& stft) {
  SeMetrics m;
  m.si_snr_db = SiSnr(est, ref);
  const auto a = Magnitude(Stft(est, stft));
  const auto b = Magnitude(Stft(ref, stft));
  m.spectral_mse = (a.mag - b.mag).array().square().mean();
  return m;
}

std::string CorpusResult::ToJson(bool include_utterances) const {
  json j;
  j["metric"] = "character error rate";
  j["total"] = json::parse(total.ToJson());
  j["mean_si_snr_noisy_db"] = NumberOrNull(mean_si_snr_noisy);
  j["mean_si_snr_enhanced_db"] = NumberOrNull(mean_si_snr_enhanced);
  if (include_utterances) {
    j["utterances"] = json::array();
    for (const auto& u : utterances) {
      json ju;
      ju["id"] = u.id;
      ju["reference"] = u.reference;
      ju["hypothesis"] = u.hypothesis;
      ju["cer"] = json::parse(u.wer.ToJson());
      ju["si_snr_noisy_db"] = NumberOrNull(u.si_snr_noisy);
      ju["si_snr_enhanced_db"] = NumberOrNull(u.si_snr_enhanced);
      j["utterances"].push_back(ju);
    }
  }
  return j.dump(2);
}

CorpusResult EvaluateExamples(const JointModel& model, TrainingMode mode, PhaseMode phase,
                              const std::vector<Example>& examples, DecodeMode decode,
                              std::size_t workers) {
  if (examples.empty()) throw InvalidInputError("evaluate: no utterances");
  CorpusResult out;
  out.utterances.resize(examples.size());
  ParallelFor(examples.size(), workers, [&](std::size_t i) {
    const Example& ex = examples[i];
    UtteranceResult& u = out.utterances[i];
    u.id = ex.id;
    u.reference = model.vocab.Decode(ex.target.tokens);
    const TokenSequence hyp = DecodeWaveform(model, ex.noisy, mode, phase, decode);
    u.hypothesis = hyp.text;
    u.wer = Wer(ex.target, hyp);
    if (ex.clean.size() == ex.noisy.size()) {
      u.si_snr_noisy = SiSnr(ex.noisy, ex.clean);
      if (UsesSe(mode)) {
        Waveform enh = EnhanceWaveform(model.se, ex.noisy);
        enh.samples.resize(ex.clean.size(), 0.0);
        u.si_snr_enhanced = SiSnr(enh, ex.clean);
      }
    }
  });
  double sn = 0, se = 0;
  std::size_t cn = 0, ce = 0;
  for (const auto& u : out.utterances) {
    out.total += u.wer;
    if (std::isfinite(u.si_snr_noisy)) sn += u.si_snr_noisy, ++cn;
    if (std::isfinite(u.si_snr_enhanced)) se += u.si_snr_enhanced, ++ce;
  }
  if (cn) out.mean_si_snr_noisy = sn / cn;
  if (ce) out.mean_si_snr_enhanced = se / ce;
  return out;
}

// ---------------------------------------------------------------------------
// Comparison suite.

std::vector<SystemSpec> DefaultComparisonSystems() {
  using TM = TrainingMode;
  using PM = PhaseMode;
  using AK = ActivationKind;
  std::vector<SystemSpec> out = {
      {"systems", "S1", "baseline, global MVN", TM::kBaseline, PM::kPreserve, AK::kRelu, 0.3, 0.7, false},
      {"systems", "S2", "baseline + speed perturbation", TM::kBaseline, PM::kPreserve, AK::kRelu, 0.3, 0.7, true},
      {"systems", "S3", "disjoint SE then ASR (mish)", TM::kDisjoint, PM::kPreserve, AK::kMish, 0.3, 0.7, false},
      {"systems", "S4", "joint, ASR loss only", TM::kJointMonotask, PM::kPreserve, AK::kRelu, 0.3, 0.7, false},
      {"systems", "S5", "MTJL beta=0.3, phase discarded", TM::kMtjl, PM::kDiscard, AK::kRelu, 0.3, 0.7, false},
      {"systems", "S6", "MTJL beta=0.3", TM::kMtjl, PM::kPreserve, AK::kRelu, 0.3, 0.7, false},
      {"systems", "S7", "DC-MTJL beta=0.3 gamma=0.7 (mish)", TM::kDcMtjl, PM::kPreserve, AK::kMish, 0.3, 0.7, false},
  };
  for (double g : {0.3, 0.4, 0.5, 0.6, 0.7}) {
    std::ostringstream label;
    label << "gamma=" << g;
    out.push_back({"gamma", label.str(), "DC-MTJL beta=0.3 (mish)", TM::kDcMtjl, PM::kPreserve,
                   AK::kMish, 0.3, g, false});
  }
  for (AK a : {AK::kRelu, AK::kMish, AK::kMetaAcon})
    out.push_back({"activation", ActivationName(a), "MTJL beta=0.3", TM::kMtjl, PM::kPreserve, a,
                   0.3, 0.7, false});
  return out;
}

namespace {

const char* TableTitle(const std::string& table) {
  if (table == "systems") return "System comparison";
  if (table == "gamma") return "Clean/noisy weight sweep (DC-MTJL)";
  if (table == "activation") return "Mask activation sweep (MTJL)";
  return "Other";
}

std::string Percent(double v) {
  if (!std::isfinite(v)) return "-";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(1) << 100 * v;
  return ss.str();
}

std::string Db(double v) {
  if (!std::isfinite(v)) return "-";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << v;
  return ss.str();
}

std::string Slug(const SystemSpec& s) {
  std::string out = s.table + "_" + s.label;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.') c = '_';
  return out;
}

}  // namespace

std::string ComparisonReport::ToText() const {
  std::ostringstream os;
  os << "Character error rate (%) on the synthetic corpus. These numbers are not\n"
        "comparable to word error rates measured on real recordings.\n";
  os << "Mean SI-SNR of the unprocessed noisy test input: " << Db(mean_si_snr_noisy) << " dB\n";
  std::vector<std::string> order;
  for (const auto& s : systems)
    if (std::find(order.begin(), order.end(), s.spec.table) == order.end())
      order.push_back(s.spec.table);
  for (const auto& table : order) {
    std::size_t wl = 6, wd = 11;
    for (const auto& s : systems)
      if (s.spec.table == table) {
        wl = std::max(wl, s.spec.label.size());
        wd = std::max(wd, s.spec.description.size());
      }
    os << "\n" << TableTitle(table) << "\n";
    os << std::left << std::setw(wl + 2) << "system" << std::setw(wd + 2) << "description"
       << std::right << std::setw(10) << "valid CER" << std::setw(10) << "test CER"
       << std::setw(12) << "SI-SNR dB" << std::setw(8) << "steps" << "\n";
    os << std::string(wl + wd + 44, '-') << "\n";
    for (const auto& s : systems) {
      if (s.spec.table != table) continue;
      os << std::left << std::setw(wl + 2) << s.spec.label << std::setw(wd + 2)
         << s.spec.description << std::right << std::setw(10) << Percent(s.valid_cer)
         << std::setw(10) << Percent(s.test_cer) << std::setw(12) << Db(s.si_snr_enhanced)
         << std::setw(8) << s.steps << (s.reused ? "  (shared run)" : "") << "\n";
    }
  }
  return os.str();
}

std::string ComparisonReport::ToJson() const {
  json j;
  j["metric"] = "character error rate";
  j["note"] = "synthetic corpus; not comparable to word error rates on real recordings";
  j["mean_si_snr_noisy_db"] = NumberOrNull(mean_si_snr_noisy);
  j["systems"] = json::array();
  for (const auto& s : systems) {
    json js;
    js["table"] = s.spec.table;
    js["label"] = s.spec.label;
    js["description"] = s.spec.description;
    js["mode"] = TrainingModeName(s.spec.mode);
    js["phase"] = PhaseModeName(s.spec.phase);
    js["mask_activation"] = ActivationName(s.spec.activation);
    js["beta"] = s.spec.beta;
    js["gamma"] = s.spec.gamma;
    js["speed_perturb"] = s.spec.speed_perturb;
    js["valid_cer"] = NumberOrNull(s.valid_cer);
    js["test_cer"] = NumberOrNull(s.test_cer);
    js["si_snr_enhanced_db"] = NumberOrNull(s.si_snr_enhanced);
    js["steps"] = s.steps;
    js["seconds"] = s.seconds;
    js["reused"] = s.reused;
    j["systems"].push_back(js);
  }
  return j.dump(2);
}

ComparisonReport RunComparison(const Config& plan,
                               const std::function<void(const std::string&)>& log) {
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  Config base_cfg;
  for (const auto& [k, v] : plan.values())
    if (k.rfind("compare.", 0) != 0 && k != "data.test") base_cfg.Set(k, v);
  const TrainConfig base = TrainConfig::FromConfig(base_cfg);
  if (base.train_manifest.empty()) throw InvalidInputError("compare: data.train is required");
  const std::string test_manifest = plan.GetString("data.test", "");
  if (test_manifest.empty()) throw InvalidInputError("compare: data.test is required");
  const std::string out_dir = plan.GetString("compare.out", "");
  if (out_dir.empty()) throw InvalidInputError("compare: compare.out is required");

  std::vector<std::string> tables = SplitList(plan.GetString("compare.tables", "systems,gamma,activation"));
  std::vector<double> gammas;
  for (const auto& g : SplitList(plan.GetString("compare.gammas", "0.3,0.4,0.5,0.6,0.7")))
    gammas.push_back(std::stod(g));
  std::vector<ActivationKind> acts;
  for (const auto& a : SplitList(plan.GetString("compare.activations", "relu,mish,metaacon")))
    acts.push_back(ParseActivation(a));

  std::vector<SystemSpec> specs;
  for (const auto& s : DefaultComparisonSystems()) {
    if (std::find(tables.begin(), tables.end(), s.table) == tables.end()) continue;
    if (s.table == "gamma" || s.table == "activation") continue;
    specs.push_back(s);
  }
  if (std::find(tables.begin(), tables.end(), "gamma") != tables.end())
    for (double g : gammas) {
      std::ostringstream label;
      label << "gamma=" << g;
      specs.push_back({"gamma", label.str(), "DC-MTJL beta=0.3 (mish)", TrainingMode::kDcMtjl,
                       PhaseMode::kPreserve, ActivationKind::kMish, 0.3, g, false});
    }
  if (std::find(tables.begin(), tables.end(), "activation") != tables.end())
    for (ActivationKind a : acts)
      specs.push_back({"activation", ActivationName(a), "MTJL beta=0.3", TrainingMode::kMtjl,
                       PhaseMode::kPreserve, a, 0.3, 0.7, false});
  if (specs.empty()) throw InvalidInputError("compare: no systems selected");

  const std::size_t steps = static_cast<std::size_t>(
      plan.GetInt("compare.steps", static_cast<long long>(base.steps)));
  const std::size_t se_steps = static_cast<std::size_t>(
      plan.GetInt("compare.se_steps", static_cast<long long>(base.se_steps)));

  Vocabulary vocab = Vocabulary::Default();
  if (!base.vocab_path.empty()) {
    vocab = Vocabulary::Load(base.vocab_path);
  } else {
    const fs::path beside = fs::path(base.train_manifest).parent_path() / "vocab.txt";
    if (fs::exists(beside)) vocab = Vocabulary::Load(beside.string());
  }
  const auto train = LoadExamples(base.train_manifest, vocab, base.max_train, base.workers);
  std::vector<Example> valid;
  if (!base.valid_manifest.empty())
    valid = LoadExamples(base.valid_manifest, vocab, base.valid_max, base.workers);
  const auto test = LoadExamples(test_manifest, vocab, 0, base.workers);

  fs::create_directories(out_dir);
  ComparisonReport report;
  {
    double sum = 0;
    for (const auto& ex : test) sum += SiSnr(ex.noisy, ex.clean);
    report.mean_si_snr_noisy = sum / test.size();
  }
  std::map<std::string, SystemResult> done;  // keyed by resolved config
  for (const auto& spec : specs) {
    TrainConfig cfg = base;
    cfg.mode = spec.mode;
    cfg.se.phase_mode = spec.phase;
    cfg.se.mask_activation = spec.activation;
    cfg.weights.beta = spec.beta;
    cfg.weights.gamma = spec.gamma;
    cfg.speed_perturb = spec.speed_perturb;
    cfg.steps = steps;
    cfg.se_steps = se_steps;
    cfg.run_dir.clear();
    const std::string key = cfg.ToConfig().Dump();
    SystemResult r;
    if (auto it = done.find(key); it != done.end()) {
      r = it->second;
      r.spec = spec;
      r.reused = true;
      say(spec.table + "/" + spec.label + ": same configuration as an earlier run");
      report.systems.push_back(r);
      continue;
    }
    cfg.run_dir = (fs::path(out_dir) / Slug(spec)).string();
    say(spec.table + "/" + spec.label + ": training " + TrainingModeName(cfg.mode) + " for " +
        std::to_string(cfg.mode == TrainingMode::kDisjoint ? (se_steps ? se_steps : steps) + steps
                                                           : steps) +
        " steps");
    const auto t0 = std::chrono::steady_clock::now();
    Trainer trainer(cfg, train, valid, vocab);
    const TrainSummary summary = trainer.Run();
    const auto model = LoadModel(summary.best_checkpoint);
    const CorpusResult res = EvaluateExamples(*model, cfg.mode, cfg.se.phase_mode, test,
                                              DecodeMode::kAttention, cfg.workers);
    r.spec = spec;
    r.valid_cer = summary.best_valid_cer;
    r.test_cer = res.total.wer;
    r.si_snr_enhanced = res.mean_si_snr_enhanced;
    r.steps = trainer.step();
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    say(spec.table + "/" + spec.label + ": test CER " + Percent(r.test_cer) + "%");
    done.emplace(key, r);
    report.systems.push_back(r);
  }

  const fs::path txt = fs::path(out_dir) / "report.txt";
  const fs::path js = fs::path(out_dir) / "report.json";
  std::ofstream(txt) << report.ToText();
  std::ofstream(js) << report.ToJson() << '\n';
  if (!fs::exists(txt) || !fs::exists(js)) throw IoError("compare: cannot write reports in " + out_dir);
  return report;
}

}  // namespace radioasr
