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

#include "radioasr/se_frontend.h"

#include <cmath>

#include "radioasr/error.h"

namespace radioasr {

PhaseMode ParsePhaseMode(const std::string& name) {
  if (name == "preserve") return PhaseMode::kPreserve;
  if (name == "discard") return PhaseMode::kDiscard;
  throw InvalidInputError("unknown phase mode '" + name + "'");
}

std::string PhaseModeName(PhaseMode mode) {
  return mode == PhaseMode::kPreserve ? "preserve" : "discard";
}

void SeConfig::Validate() const {
  if (n_blstm_layers < 1) throw InvalidInputError("se: need at least one BLSTM layer");
  if (hidden_units < 1) throw InvalidInputError("se: hidden_units must be > 0");
  if (!(dropout >= 0 && dropout < 1))
    throw InvalidInputError("se: dropout must be in [0, 1)");
  if (mask_activation == ActivationKind::kMetaAcon && acon_bottleneck == 0)
    throw InvalidInputError("se: acon_bottleneck must be > 0");
}

SeNetwork::SeNetwork(ParameterSet& params, const SeConfig& cfg,
                     const FeatureConfig& features, std::mt19937_64& rng,
                     const std::string& prefix)
    : cfg_(cfg), features_(features), filterbank_(features.Filterbank()) {
  cfg.Validate();
  features.stft.Validate();
  const std::size_t bins = features.stft.bins();
  std::size_t in = bins;
  for (std::size_t l = 0; l < cfg.n_blstm_layers; ++l) {
    blstm.emplace_back(params, prefix + ".blstm" + std::to_string(l), in,
                       cfg.hidden_units, rng);
    in = 2 * cfg.hidden_units;
  }
  head = Linear(params, prefix + ".head", in, bins, rng);
  std::fill(head.bias.mutable_data().begin(), head.bias.mutable_data().end(),
            cfg.head_bias_init);
  if (cfg.mask_activation == ActivationKind::kMetaAcon)
    acon.emplace(params, prefix + ".acon", bins, cfg.acon_bottleneck, rng);
}

Tensor SeNetwork::EstimateMask(const Tensor& noisy_mag,
                               const ForwardContext& ctx) const {
  const std::size_t bins = features_.stft.bins();
  if (noisy_mag.ndim() != 2 || noisy_mag.cols() != bins)
    throw InvalidInputError("EstimateMask: expected [frames x " +
                            std::to_string(bins) + "], got " +
                            ad::ShapeToString(noisy_mag.shape()));
  Tensor h = ad::Log(ad::AddScalar(noisy_mag, 1.0));
  for (const auto& layer : blstm) h = layer.Forward(h);
  h = head.Forward(Dropout(h, cfg_.dropout, ctx));
  h = acon ? acon->Forward(h) : Activation(h, cfg_.mask_activation);
  return ad::ClampMin(h, 0.0);
}

EnhancedTape FeaturesFromMask(const Tensor& noisy_spec, const Tensor& mask,
                              PhaseMode mode, const StftParams& stft,
                              const Matrix& filterbank) {
  const std::size_t bins = stft.bins();
  if (noisy_spec.ndim() != 2 || noisy_spec.cols() != 2 * bins)
    throw InvalidInputError("FeaturesFromMask: bad spectrogram shape");
  EnhancedTape out;
  out.noisy_spec = noisy_spec;
  out.mask = mask;
  out.masked_spec = ad::MaskSpectrogram(noisy_spec, mask);
  // |X (x) M| = M |X| for M >= 0; |X| is constant so no sqrt on the tape.
  const std::size_t frames = noisy_spec.rows();
  std::vector<double> mag(frames * bins);
  const auto v = noisy_spec.data();
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < bins; ++k)
      mag[t * bins + k] = std::hypot(v[t * 2 * bins + k], v[t * 2 * bins + bins + k]);
  out.masked_mag = ad::Mul(mask, Tensor::Constant({frames, bins}, std::move(mag)));
  if (mode == PhaseMode::kPreserve) {
    out.enhanced_wave = ad::Istft(out.masked_spec, stft);
    out.features =
        ad::LogMel(ad::PowerSpectrum(ad::Stft(out.enhanced_wave, stft)), filterbank);
  } else {
    out.features = ad::LogMel(ad::PowerSpectrum(out.masked_spec), filterbank);
  }
  return out;
}

EnhancedTape EnhanceOnTape(const SeNetwork& net, const Waveform& noisy,
                           PhaseMode mode, const ForwardContext& ctx) {
  const auto& stft = net.features().stft;
  if (noisy.size() < stft.n_fft)
    throw InvalidInputError("enhance: waveform shorter than one analysis window");
  const Tensor spec = ad::PackSpectrogram(Stft(noisy, stft));
  const Tensor mask = net.EstimateMask(MagnitudeTensor(noisy, stft), ctx);
  return FeaturesFromMask(spec, mask, mode, stft, net.filterbank());
}

namespace {

Matrix ToMatrix(const Tensor& t) {
  Matrix m(t.rows(), t.cols());
  std::copy(t.data().begin(), t.data().end(), m.data());
  return m;
}

}  // namespace

EnhancedOutput Enhance(const SeNetwork& net, const Waveform& noisy,
                       PhaseMode mode) {
  const EnhancedTape tape = EnhanceOnTape(net, noisy, mode, ForwardContext{});
  EnhancedOutput out;
  out.masked_spec = ad::UnpackSpectrogram(tape.masked_spec, net.features().stft);
  out.features.feats = ToMatrix(tape.features);
  out.mask = ToMatrix(tape.mask);
  if (tape.enhanced_wave.defined()) {
    // The tape waveform is the exact inverse; the written-out one bounds the
    // edge gain.
    Waveform w = Istft(out.masked_spec, noisy.sample_rate, kOutputWindowSumFloor);
    w.samples.resize(std::max(w.samples.size(), noisy.size()), 0.0);
    out.enhanced_wave = std::move(w);
  }
  return out;
}

Waveform EnhanceWaveform(const SeNetwork& net, const Waveform& noisy) {
  EnhancedOutput out = Enhance(net, noisy, PhaseMode::kPreserve);
  return std::move(*out.enhanced_wave);
}

Tensor SeLoss(const Tensor& masked_mag, const Tensor& clean_mag) {
  if (masked_mag.shape() != clean_mag.shape())
    throw InvalidInputError("SeLoss: shape " + ad::ShapeToString(masked_mag.shape()) +
                            " vs " + ad::ShapeToString(clean_mag.shape()));
  const Tensor diff = ad::Sub(masked_mag, clean_mag);
  return ad::Mean(ad::Mul(diff, diff));
}

Tensor MagnitudeTensor(const Waveform& w, const StftParams& stft) {
  const MagnitudeSpectrogram m = Magnitude(Stft(w, stft));
  return Tensor::Constant({m.frames(), m.bins()},
                          std::vector<double>(m.mag.data(),
                                              m.mag.data() + m.mag.size()));
}

Tensor PlainFeatures(const Waveform& w, const StftParams& stft,
                     const Matrix& filterbank) {
  return ad::LogMel(ad::PowerSpectrum(ad::PackSpectrogram(Stft(w, stft))),
                    filterbank);
}

}  // namespace radioasr
