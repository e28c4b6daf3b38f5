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

#ifndef RADIOASR_CORPUS_H_
#define RADIOASR_CORPUS_H_

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "radioasr/asr_backend.h"
#include "radioasr/signal.h"

namespace radioasr {

inline constexpr char kDefaultAlphabet[] = "abcdefghij";

// Rendering constants for the synthetic tonal speech.
inline constexpr std::size_t kCharSamples = 1920;  // 120 ms at 16 kHz
inline constexpr std::size_t kFadeSamples = 160;   // 10 ms
inline constexpr double kCleanPeak = 0.3;
inline constexpr double kNoisyPeakLimit = 0.95;

struct DegradeConfig {
  // +inf disables the additive white noise.
  double snr_db = 0.0;
  bool bandpass = true;
  double low_hz = 300.0;
  double high_hz = 3400.0;
  double clip_drive = 2.0;
  double interference_prob = 0.3;
  // The tone's power relative to the filtered-clipped signal is drawn
  // uniformly from this range.
  double interference_min_db = -10.0;
  double interference_max_db = 0.0;
  double sample_rate = kDefaultSampleRate;

  void Validate() const;
};

// Intermediate signals of one degradation, for inspection and tests.
// output = scale * (reference + interference + noise).
struct DegradeDetail {
  std::vector<double> filtered;
  std::vector<double> reference;  // filtered and clipped; the SNR reference
  std::vector<double> interference;
  std::vector<double> noise;
  double scale = 1.0;
  Waveform output;
};

struct UtterancePair {
  std::string id;
  Waveform clean;
  Waveform noisy;
  std::string transcript;
  double snr_db = 0.0;
};

struct ManifestRecord {
  std::string id;
  std::string clean_path;  // resolved to an existing path at load
  std::string noisy_path;
  std::string transcript;
  double duration_s = 0.0;
};

// Formant pair (Hz) used to render character `c` of `alphabet`.
std::pair<double, double> CharFormants(char c, const std::string& alphabet);

// Expected length in samples of a rendered transcript of n characters.
std::size_t SynthLength(std::size_t n_chars);

Waveform SynthClean(const std::string& transcript, std::mt19937_64& rng,
                    const std::string& alphabet = kDefaultAlphabet);

// Causal cascade of 4th-order Butterworth high-pass
// (low_hz) and low-pass (high_hz) sections.
std::vector<double> BandpassFilter(std::span<const double> x, double low_hz,
                                   double high_hz, double sample_rate);

Waveform Degrade(const Waveform& clean, const DegradeConfig& cfg,
                 std::mt19937_64& rng);
DegradeDetail DegradeDetailed(const Waveform& clean, const DegradeConfig& cfg,
                              std::mt19937_64& rng);

// 10 log10(|reference|^2 / |noise|^2).
double MeasuredSnrDb(const DegradeDetail& d);

TokenSequence Tokenize(const std::string& text, const Vocabulary& vocab);
std::string Detokenize(const TokenSequence& seq, const Vocabulary& vocab);

// Independent stream for one utterance, derived from (seed, id) only.
std::mt19937_64 UtteranceRng(std::uint64_t seed, const std::string& id);

struct CorpusSpec {
  std::string out_dir;
  std::size_t n_train = 200, n_valid = 20, n_test = 20;
  std::size_t min_chars = 3, max_chars = 10;
  std::string alphabet = kDefaultAlphabet;
  DegradeConfig degrade;
  std::uint64_t seed = 1;
  std::size_t workers = 0;
};

// Writes <out>/wav/<id>_{clean,noisy}.wav, <out>/{train,valid,test}.jsonl and
// <out>/vocab.txt. Transcripts are unique across all splits. Output is
// identical for any worker count.
void GenerateCorpus(const CorpusSpec& spec);

// Distinct random transcripts, split in order; exposed for tests.
std::vector<std::string> SampleTranscripts(std::size_t count, std::size_t min_chars,
                                           std::size_t max_chars,
                                           const std::string& alphabet,
                                           std::uint64_t seed);

// Paths in the file are relative to the manifest's directory (or absolute).
std::vector<ManifestRecord> LoadManifest(const std::string& path);
void WriteManifest(const std::string& path,
                   const std::vector<ManifestRecord>& records);
UtterancePair LoadPair(const ManifestRecord& record);

}  // namespace radioasr

#endif  // RADIOASR_CORPUS_H_
