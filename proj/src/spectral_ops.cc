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

#include "radioasr/spectral_ops.h"

#include <complex>

#include "radioasr/error.h"

namespace radioasr::ad {
namespace {

// Bins k=0 and k=N/2 appear once in the full spectrum, the others twice.
double BinMultiplicity(std::size_t k, std::size_t n_fft) {
  return (k == 0 || k == n_fft / 2) ? 1.0 : 2.0;
}

void RequirePacked(const Tensor& packed, const StftParams& p, const char* op) {
  if (packed.ndim() != 2 || packed.cols() != 2 * p.bins())
    throw InvalidInputError(std::string(op) + ": expected [frames x " +
                            std::to_string(2 * p.bins()) + "], got " +
                            ShapeToString(packed.shape()));
}

}  // namespace

Tensor PackSpectrogram(const ComplexSpectrogram& s) {
  const std::size_t frames = s.frames(), bins = s.bins();
  std::vector<double> v(frames * 2 * bins);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < bins; ++k) {
      v[t * 2 * bins + k] = s.real(t, k);
      v[t * 2 * bins + bins + k] = s.imag(t, k);
    }
  return Tensor::Constant({frames, 2 * bins}, std::move(v));
}

ComplexSpectrogram UnpackSpectrogram(const Tensor& packed, const StftParams& p) {
  RequirePacked(packed, p, "UnpackSpectrogram");
  const std::size_t frames = packed.rows(), bins = p.bins();
  ComplexSpectrogram s;
  s.params = p;
  s.real.resize(frames, bins);
  s.imag.resize(frames, bins);
  const auto v = packed.data();
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < bins; ++k) {
      s.real(t, k) = v[t * 2 * bins + k];
      s.imag(t, k) = v[t * 2 * bins + bins + k];
    }
  return s;
}

Tensor Stft(const Tensor& wave, const StftParams& p) {
  p.Validate();
  if (wave.ndim() != 1)
    throw InvalidInputError("ad::Stft: expected a 1-D waveform");
  if (wave.size() < p.n_fft)
    throw InvalidInputError("ad::Stft: signal shorter than one window");
  const std::size_t frames = p.NumFrames(wave.size()), bins = p.bins(),
                    n_fft = p.n_fft, hop = p.hop;
  const auto window = p.Window();
  const auto x = wave.data();
  std::vector<double> out(frames * 2 * bins), buf(n_fft);
  std::vector<std::complex<double>> spec(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < n_fft; ++n) buf[n] = window[n] * x[t * hop + n];
    RealFft(buf, spec);
    for (std::size_t k = 0; k < bins; ++k) {
      out[t * 2 * bins + k] = spec[k].real();
      out[t * 2 * bins + bins + k] = spec[k].imag();
    }
  }
  return MakeResult(
      {frames, 2 * bins}, std::move(out), {wave},
      [=](const Node& self, std::span<const double> g, BackwardContext& ctx) {
        auto gx = ctx.Grad(self, 0);
        if (gx.empty()) return;
        std::vector<std::complex<double>> z(bins);
        std::vector<double> gu(n_fft);
        for (std::size_t t = 0; t < frames; ++t) {
          for (std::size_t k = 0; k < bins; ++k) {
            const double c = BinMultiplicity(k, n_fft);
            z[k] = {g[t * 2 * bins + k] / c, g[t * 2 * bins + bins + k] / c};
          }
          InverseRealFft(z, gu);
          for (std::size_t n = 0; n < n_fft; ++n)
            gx[t * hop + n] += window[n] * static_cast<double>(n_fft) * gu[n];
        }
      },
      "stft");
}

Tensor Istft(const Tensor& packed, const StftParams& p) {
  p.Validate();
  RequirePacked(packed, p, "ad::Istft");
  const std::size_t frames = packed.rows(), bins = p.bins(), n_fft = p.n_fft,
                    hop = p.hop, len = p.NumSamples(frames);
  const auto window = p.Window();
  std::vector<double> wsum(len, 0.0);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t n = 0; n < n_fft; ++n)
      wsum[t * hop + n] += window[n] * window[n];
  for (double s : wsum)
    if (!(s > 0)) throw InternalError("ad::Istft: zero window sum");

  const auto v = packed.data();
  std::vector<double> out(len, 0.0), buf(n_fft);
  std::vector<std::complex<double>> spec(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k)
      spec[k] = {v[t * 2 * bins + k], v[t * 2 * bins + bins + k]};
    InverseRealFft(spec, buf);
    for (std::size_t n = 0; n < n_fft; ++n) out[t * hop + n] += window[n] * buf[n];
  }
  for (std::size_t i = 0; i < len; ++i) out[i] /= wsum[i];

  return MakeResult(
      {len}, std::move(out), {packed},
      [=, wsum = std::move(wsum)](const Node& self, std::span<const double> g,
                                  BackwardContext& ctx) {
        auto gp = ctx.Grad(self, 0);
        if (gp.empty()) return;
        std::vector<double> gy(n_fft);
        std::vector<std::complex<double>> gs(bins);
        for (std::size_t t = 0; t < frames; ++t) {
          for (std::size_t n = 0; n < n_fft; ++n)
            gy[n] = window[n] * g[t * hop + n] / wsum[t * hop + n];
          RealFft(gy, gs);
          for (std::size_t k = 0; k < bins; ++k) {
            const double c = BinMultiplicity(k, n_fft) / static_cast<double>(n_fft);
            gp[t * 2 * bins + k] += c * gs[k].real();
            gp[t * 2 * bins + bins + k] += c * gs[k].imag();
          }
        }
      },
      "istft");
}

Tensor PowerSpectrum(const Tensor& packed) {
  if (packed.ndim() != 2 || packed.cols() % 2 != 0)
    throw InvalidInputError("PowerSpectrum: expected packed [frames x 2*bins]");
  const std::size_t frames = packed.rows(), bins = packed.cols() / 2;
  const auto v = packed.data();
  std::vector<double> out(frames * bins);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = v[t * 2 * bins + k], im = v[t * 2 * bins + bins + k];
      out[t * bins + k] = re * re + im * im;
    }
  return MakeResult(
      {frames, bins}, std::move(out), {packed},
      [frames, bins](const Node& self, std::span<const double> g,
                     BackwardContext& ctx) {
        auto gp = ctx.Grad(self, 0);
        if (gp.empty()) return;
        const auto& v = self.parents[0]->value;
        for (std::size_t t = 0; t < frames; ++t)
          for (std::size_t k = 0; k < bins; ++k) {
            const std::size_t re = t * 2 * bins + k, im = re + bins;
            gp[re] += 2 * v[re] * g[t * bins + k];
            gp[im] += 2 * v[im] * g[t * bins + k];
          }
      },
      "power_spectrum");
}

Tensor MaskSpectrogram(const Tensor& packed, const Tensor& mask) {
  if (packed.ndim() != 2 || mask.ndim() != 2 || packed.rows() != mask.rows() ||
      packed.cols() != 2 * mask.cols())
    throw InvalidInputError("MaskSpectrogram: mask " +
                            ShapeToString(mask.shape()) +
                            " does not match spectrogram " +
                            ShapeToString(packed.shape()));
  return Mul(packed, Concat({mask, mask}, 1));
}

Tensor LogMel(const Tensor& power, const Matrix& filterbank) {
  std::vector<double> fb(filterbank.data(),
                         filterbank.data() + filterbank.size());
  const Tensor fbt = Tensor::Constant(
      {static_cast<std::size_t>(filterbank.rows()),
       static_cast<std::size_t>(filterbank.cols())},
      std::move(fb));
  return Log(ClampMin(MatMul(power, fbt), kLogFloor));
}

Tensor ApplyMvn(const Tensor& feats, const MvnStats& stats) {
  const auto dim = static_cast<std::size_t>(stats.mean.size());
  if (feats.ndim() != 2 || feats.cols() != dim)
    throw InvalidInputError("ad::ApplyMvn: dimension mismatch");
  std::vector<double> mean(stats.mean.data(), stats.mean.data() + dim);
  std::vector<double> inv(dim);
  for (std::size_t i = 0; i < dim; ++i) inv[i] = 1.0 / stats.std[i];
  const Tensor centered = Sub(feats, Tensor::Constant({dim}, std::move(mean)));
  return Mul(centered,
             RepeatRows(Tensor::Constant({dim}, std::move(inv)), feats.rows()));
}

}  // namespace radioasr::ad
