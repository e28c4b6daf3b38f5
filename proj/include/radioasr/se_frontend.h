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

#ifndef RADIOASR_SE_FRONTEND_H_
#define RADIOASR_SE_FRONTEND_H_

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "radioasr/layers.h"
#include "radioasr/signal.h"
#include "radioasr/spectral_ops.h"

namespace radioasr {

// kDiscard: ASR features are taken from |X (x) M| directly.
// kPreserve: the masked spectrum is resynthesized with the noisy phase and
// re-analyzed, features come from |STFT(ISTFT(X (x) M))|.
enum class PhaseMode { kDiscard, kPreserve };

PhaseMode ParsePhaseMode(const std::string& name);
std::string PhaseModeName(PhaseMode mode);

// Analysis settings shared by the SE front-end and the ASR feature path.
struct FeatureConfig {
  StftParams stft;
  std::size_t n_mels = kDefaultMels;
  double sample_rate = kDefaultSampleRate;

  Matrix Filterbank() const {
    return MelFilterbank(stft.n_fft, n_mels, sample_rate);
  }
};

struct SeConfig {
  std::size_t n_blstm_layers = 2;
  std::size_t hidden_units = 128;
  ActivationKind mask_activation = ActivationKind::kRelu;
  PhaseMode phase_mode = PhaseMode::kPreserve;
  double dropout = 0.1;
  std::size_t acon_bottleneck = 16;
  // Initial value of the output bias; 1.0 starts the mask near identity.
  double head_bias_init = 1.0;

  void Validate() const;
};

// Mask estimator: log1p(|X|) -> BLSTM stack -> dropout -> linear ->
// mask activation -> clamp at 0.
class SeNetwork {
 public:
  SeNetwork() = default;
  SeNetwork(ParameterSet& params, const SeConfig& cfg,
            const FeatureConfig& features, std::mt19937_64& rng,
            const std::string& prefix = "se");

  // noisy_mag [T x bins] -> mask [T x bins], entries >= 0.
  Tensor EstimateMask(const Tensor& noisy_mag, const ForwardContext& ctx) const;

  const SeConfig& config() const { return cfg_; }
  const FeatureConfig& features() const { return features_; }
  const Matrix& filterbank() const { return filterbank_; }

  std::vector<Blstm> blstm;
  Linear head;
  std::optional<MetaAcon> acon;

 private:
  SeConfig cfg_;
  FeatureConfig features_;
  Matrix filterbank_;
};

// Everything produced by one differentiable pass through the front-end.
struct EnhancedTape {
  Tensor noisy_spec;     // packed [T x 2*bins], constant
  Tensor mask;           // [T x bins]
  Tensor masked_spec;    // packed X' = X (x) M
  Tensor masked_mag;     // M (x) |X|
  Tensor enhanced_wave;  // preserve mode only
  Tensor features;       // log-mel, before MVN
};

// Both feature paths for a given mask; the network-free core of the
// front-end. noisy_spec is a packed spectrogram.
EnhancedTape FeaturesFromMask(const Tensor& noisy_spec, const Tensor& mask,
                              PhaseMode mode, const StftParams& stft,
                              const Matrix& filterbank);

EnhancedTape EnhanceOnTape(const SeNetwork& net, const Waveform& noisy,
                           PhaseMode mode, const ForwardContext& ctx);

// Inference result on plain data.
struct EnhancedOutput {
  ComplexSpectrogram masked_spec;
  std::optional<Waveform> enhanced_wave;  // preserve mode
  MelFeatures features;
  Matrix mask;
};

// Evaluation-mode enhancement. The preserve-mode waveform is zero-padded to
// the input length when trailing samples did not fill a frame.
EnhancedOutput Enhance(const SeNetwork& net, const Waveform& noisy,
                       PhaseMode mode);

// Resynthesized waveform for any mode (used by `enhance` and SE metrics).
Waveform EnhanceWaveform(const SeNetwork& net, const Waveform& noisy);

// mean((masked_mag - clean_mag)^2)
Tensor SeLoss(const Tensor& masked_mag, const Tensor& clean_mag);

// |STFT(x)| as a constant [T x bins] tensor.
Tensor MagnitudeTensor(const Waveform& w, const StftParams& stft);

// Log-mel of an unprocessed waveform as a constant tensor.
Tensor PlainFeatures(const Waveform& w, const StftParams& stft,
                     const Matrix& filterbank);

}  // namespace radioasr

#endif  // RADIOASR_SE_FRONTEND_H_
