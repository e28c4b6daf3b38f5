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

#include "radioasr/corpus.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "radioasr/error.h"
#include "radioasr/parallel.h"

namespace radioasr {

namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// Direct form II transposed second-order section.
struct Biquad {
  double b0, b1, b2, a1, a2;

  void Run(std::vector<double>& x) const {
    double z1 = 0, z2 = 0;
    for (double& v : x) {
      const double y = b0 * v + z1;
      z1 = b1 * v - a1 * y + z2;
      z2 = b2 * v - a2 * y;
      v = y;
    }
  }
};

// Bilinear-transformed 2nd-order Butterworth-family sections with prewarp
// at f0.
Biquad MakeSection(double f0, double q, double fs, bool highpass) {
  const double w0 = 2 * kPi * f0 / fs;
  const double cw = std::cos(w0), alpha = std::sin(w0) / (2 * q);
  const double a0 = 1 + alpha;
  Biquad s;
  if (highpass) {
    s.b0 = (1 + cw) / 2 / a0;
    s.b1 = -(1 + cw) / a0;
  } else {
    s.b0 = (1 - cw) / 2 / a0;
    s.b1 = (1 - cw) / a0;
  }
  s.b2 = s.b0;
  s.a1 = -2 * cw / a0;
  s.a2 = (1 - alpha) / a0;
  return s;
}

// Pole-pair quality factors of a 4th-order Butterworth prototype.
constexpr double kButterQ[2] = {0.54119610014619698, 1.3065629648763766};

double Energy(std::span<const double> x) {
  double e = 0;
  for (double v : x) e += v * v;
  return e;
}

std::uint64_t Fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string SplitId(const std::string& split, std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%05zu", i);
  return split + "_" + buf;
}

}  // namespace

void DegradeConfig::Validate() const {
  if (bandpass && !(low_hz > 0 && low_hz < high_hz && high_hz < sample_rate / 2))
    throw InvalidInputError("degrade: need 0 < low_hz < high_hz < Nyquist");
  if (!(clip_drive >= 1)) throw InvalidInputError("degrade: clip_drive must be >= 1");
  if (!(interference_prob >= 0 && interference_prob <= 1))
    throw InvalidInputError("degrade: interference_prob must be in [0, 1]");
  if (!(interference_min_db <= interference_max_db))
    throw InvalidInputError("degrade: empty interference level range");
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
    throw InvalidInputError("degrade: snr_db must be a number or +inf");
  if (!(sample_rate > 0)) throw InvalidInputError("degrade: bad sample rate");
}

std::pair<double, double> CharFormants(char c, const std::string& alphabet) {
  const auto pos = alphabet.find(c);
  if (pos == std::string::npos)
    throw InvalidInputError(std::string("character '") + c +
                            "' is not in the alphabet");
  const double n = static_cast<double>(alphabet.size());
  const double i = static_cast<double>(pos);
  const double f1 = 400.0 + 900.0 * i / n;
  const double f2 = 1400.0 + 1700.0 * static_cast<double>((7 * pos + 3) % alphabet.size()) / n;
  return {f1, f2};
}

std::size_t SynthLength(std::size_t n_chars) {
  if (n_chars == 0) return 0;
  return n_chars * kCharSamples - (n_chars - 1) * kFadeSamples;
}

Waveform SynthClean(const std::string& transcript, std::mt19937_64& rng,
                    const std::string& alphabet) {
  if (transcript.empty()) throw InvalidInputError("synth_clean: empty transcript");
  for (char c : transcript) CharFormants(c, alphabet);  // validates
  const double fs = kDefaultSampleRate;
  std::uniform_real_distribution<double> f0_dist(100.0, 130.0);
  std::uniform_real_distribution<double> gain_dist(0.8, 1.0);
  const double f0 = f0_dist(rng);
  const double bandwidth = 120.0;

  Waveform w;
  w.sample_rate = fs;
  w.samples.assign(SynthLength(transcript.size()), 0.0);
  const std::size_t stride = kCharSamples - kFadeSamples;
  double phase_time = 0;  // keeps harmonics continuous across segments
  for (std::size_t k = 0; k < transcript.size(); ++k) {
    const auto [f1, f2] = CharFormants(transcript[k], alphabet);
    const double gain = gain_dist(rng);
    std::vector<std::pair<double, double>> partials;  // (freq, amplitude)
    for (double f = f0; f < 4000.0; f += f0) {
      const double a = std::exp(-0.5 * std::pow((f - f1) / bandwidth, 2)) +
                       0.7 * std::exp(-0.5 * std::pow((f - f2) / bandwidth, 2));
      if (a > 1e-4) partials.emplace_back(f, a);
    }
    const std::size_t start = k * stride;
    for (std::size_t n = 0; n < kCharSamples; ++n) {
      // Raised-cosine ramps; adjacent ramps sum to one over the overlap.
      double env = 1.0;
      if (k > 0 && n < kFadeSamples)
        env = 0.5 - 0.5 * std::cos(kPi * (n + 0.5) / kFadeSamples);
      if (k + 1 < transcript.size() && n >= kCharSamples - kFadeSamples)
        env = 0.5 + 0.5 * std::cos(kPi * (n - (kCharSamples - kFadeSamples) + 0.5) /
                                   kFadeSamples);
      const double t = phase_time + static_cast<double>(n) / fs;
      double v = 0;
      for (const auto& [f, a] : partials) v += a * std::sin(2 * kPi * f * t);
      w.samples[start + n] += gain * env * v;
    }
    phase_time += static_cast<double>(stride) / fs;
  }
  double peak = 0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0)
    for (double& v : w.samples) v *= kCleanPeak / peak;
  return w;
}

std::vector<double> BandpassFilter(std::span<const double> x, double low_hz,
                                   double high_hz, double sample_rate) {
  std::vector<double> y(x.begin(), x.end());
  for (double q : kButterQ) MakeSection(low_hz, q, sample_rate, true).Run(y);
  for (double q : kButterQ) MakeSection(high_hz, q, sample_rate, false).Run(y);
  return y;
}

DegradeDetail DegradeDetailed(const Waveform& clean, const DegradeConfig& cfg,
                              std::mt19937_64& rng) {
  cfg.Validate();
  clean.Validate();
  const std::size_t n = clean.size();
  DegradeDetail d;
  d.filtered = cfg.bandpass ? BandpassFilter(clean.samples, cfg.low_hz,
                                             cfg.high_hz, clean.sample_rate)
                            : clean.samples;
  d.reference.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    d.reference[i] = std::tanh(cfg.clip_drive * d.filtered[i]) / cfg.clip_drive;
  const double ref_energy = Energy(d.reference);

  // The draws happen unconditionally so that the stream position does not
  // depend on the configuration.
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const bool tone = unit(rng) < cfg.interference_prob;
  const double lo = cfg.bandpass ? cfg.low_hz : 300.0;
  const double hi = cfg.bandpass ? cfg.high_hz : 3400.0;
  const double tone_hz = lo + (hi - lo) * unit(rng);
  const double tone_db = cfg.interference_min_db +
                         (cfg.interference_max_db - cfg.interference_min_db) * unit(rng);
  const double tone_phase = 2 * kPi * unit(rng);
  d.interference.assign(n, 0.0);
  if (tone && ref_energy > 0) {
    for (std::size_t i = 0; i < n; ++i)
      d.interference[i] =
          std::sin(2 * kPi * tone_hz * i / clean.sample_rate + tone_phase);
    const double s = std::sqrt(ref_energy * std::pow(10.0, tone_db / 10) /
                               Energy(d.interference));
    for (double& v : d.interference) v *= s;
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  d.noise.resize(n);
  for (double& v : d.noise) v = gauss(rng);
  if (std::isinf(cfg.snr_db) || ref_energy == 0) {
    std::fill(d.noise.begin(), d.noise.end(), 0.0);
  } else {
    const double s =
        std::sqrt(ref_energy / (Energy(d.noise) * std::pow(10.0, cfg.snr_db / 10)));
    for (double& v : d.noise) v *= s;
  }

  d.output.sample_rate = clean.sample_rate;
  d.output.samples.resize(n);
  double peak = 0;
  for (std::size_t i = 0; i < n; ++i) {
    d.output.samples[i] = d.reference[i] + d.interference[i] + d.noise[i];
    peak = std::max(peak, std::abs(d.output.samples[i]));
  }
  d.scale = peak > kNoisyPeakLimit ? kNoisyPeakLimit / peak : 1.0;
  if (d.scale != 1.0)
    for (double& v : d.output.samples) v *= d.scale;
  return d;
}

Waveform Degrade(const Waveform& clean, const DegradeConfig& cfg,
                 std::mt19937_64& rng) {
  return DegradeDetailed(clean, cfg, rng).output;
}

double MeasuredSnrDb(const DegradeDetail& d) {
  const double noise = Energy(d.noise);
  if (noise == 0) return std::numeric_limits<double>::infinity();
  return 10 * std::log10(Energy(d.reference) / noise);
}

TokenSequence Tokenize(const std::string& text, const Vocabulary& vocab) {
  if (text.empty()) throw InvalidInputError("tokenize: empty text");
  return TokenSequence{vocab.Encode(text), text};
}

std::string Detokenize(const TokenSequence& seq, const Vocabulary& vocab) {
  return vocab.Decode(seq.tokens);
}

std::mt19937_64 UtteranceRng(std::uint64_t seed, const std::string& id) {
  const std::uint64_t h = Fnv1a(id);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

std::vector<std::string> SampleTranscripts(std::size_t count, std::size_t min_chars,
                                           std::size_t max_chars,
                                           const std::string& alphabet,
                                           std::uint64_t seed) {
  if (min_chars == 0 || min_chars > max_chars || alphabet.empty())
    throw InvalidInputError("transcripts: bad length range or alphabet");
  // Rejection sampling needs enough distinct strings to terminate quickly.
  double capacity = 0;
  for (std::size_t len = min_chars; len <= max_chars && capacity < 1e12; ++len)
    capacity += std::pow(static_cast<double>(alphabet.size()), static_cast<double>(len));
  if (static_cast<double>(count) > capacity / 2)
    throw InvalidInputError("transcripts: too many utterances for the alphabet");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len_dist(min_chars, max_chars);
  std::uniform_int_distribution<std::size_t> char_dist(0, alphabet.size() - 1);
  std::unordered_set<std::string> seen;
  std::vector<std::string> out;
  out.reserve(count);
  while (out.size() < count) {
    std::string s(len_dist(rng), ' ');
    for (char& c : s) c = alphabet[char_dist(rng)];
    if (seen.insert(s).second) out.push_back(std::move(s));
  }
  return out;
}

void WriteManifest(const std::string& path,
                   const std::vector<ManifestRecord>& records) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write manifest " + path);
    for (const auto& r : records) {
      nlohmann::ordered_json j;
      j["id"] = r.id;
      j["clean_path"] = r.clean_path;
      j["noisy_path"] = r.noisy_path;
      j["transcript"] = r.transcript;
      j["duration_s"] = r.duration_s;
      out << j.dump() << '\n';
    }
    if (!out) throw IoError("error writing manifest " + path);
  }
  fs::rename(tmp, path);
}

std::vector<ManifestRecord> LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path full = fs::path(p).is_absolute() ? fs::path(p) : base / p;
    if (!fs::exists(full)) throw IoError("manifest " + path + ": missing " + full.string());
    return full.string();
  };
  std::vector<ManifestRecord> records;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ManifestRecord r;
    try {
      const auto j = nlohmann::json::parse(line);
      r.id = j.at("id").get<std::string>();
      r.clean_path = resolve(j.at("clean_path").get<std::string>());
      r.noisy_path = resolve(j.at("noisy_path").get<std::string>());
      r.transcript = j.at("transcript").get<std::string>();
      r.duration_s = j.at("duration_s").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError("manifest " + path + ":" + std::to_string(line_no) + ": " +
                    e.what());
    }
    if (!ids.insert(r.id).second)
      throw InvalidInputError("manifest " + path + ": duplicate id " + r.id);
    records.push_back(std::move(r));
  }
  return records;
}

UtterancePair LoadPair(const ManifestRecord& record) {
  UtterancePair p;
  p.id = record.id;
  p.transcript = record.transcript;
  p.clean = ReadWav(record.clean_path);
  p.noisy = ReadWav(record.noisy_path);
  if (p.clean.size() != p.noisy.size())
    throw InvalidInputError("utterance " + record.id +
                            ": clean and noisy lengths differ");
  return p;
}

void GenerateCorpus(const CorpusSpec& spec) {
  spec.degrade.Validate();
  const std::size_t total = spec.n_train + spec.n_valid + spec.n_test;
  const auto transcripts = SampleTranscripts(total, spec.min_chars, spec.max_chars,
                                             spec.alphabet, spec.seed);
  std::error_code ec;
  fs::create_directories(fs::path(spec.out_dir) / "wav", ec);
  if (ec) throw IoError("cannot create " + spec.out_dir + ": " + ec.message());

  struct Item {
    std::string split;
    std::string id;
  };
  std::vector<Item> items;
  const std::pair<const char*, std::size_t> splits[] = {
      {"train", spec.n_train}, {"valid", spec.n_valid}, {"test", spec.n_test}};
  for (const auto& [name, count] : splits)
    for (std::size_t i = 0; i < count; ++i) items.push_back({name, SplitId(name, i)});

  std::vector<ManifestRecord> records(total);
  ParallelFor(total, spec.workers, [&](std::size_t i) {
    std::mt19937_64 rng = UtteranceRng(spec.seed, items[i].id);
    const Waveform clean = SynthClean(transcripts[i], rng, spec.alphabet);
    const Waveform noisy = Degrade(clean, spec.degrade, rng);
    ManifestRecord& r = records[i];
    r.id = items[i].id;
    r.clean_path = "wav/" + r.id + "_clean.wav";
    r.noisy_path = "wav/" + r.id + "_noisy.wav";
    r.transcript = transcripts[i];
    r.duration_s = clean.duration();
    WriteWav((fs::path(spec.out_dir) / r.clean_path).string(), clean);
    WriteWav((fs::path(spec.out_dir) / r.noisy_path).string(), noisy);
  });

  std::size_t offset = 0;
  for (const auto& [name, count] : splits) {
    std::vector<ManifestRecord> part(records.begin() + offset,
                                     records.begin() + offset + count);
    WriteManifest((fs::path(spec.out_dir) / (std::string(name) + ".jsonl")).string(),
                  part);
    offset += count;
  }
  Vocabulary(spec.alphabet).Save((fs::path(spec.out_dir) / "vocab.txt").string());
}

}  // namespace radioasr
