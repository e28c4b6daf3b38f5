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

#include "radioasr/signal.h"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "radioasr/error.h"

namespace radioasr {
namespace {

Eigen::FFT<double>& ThreadFft() {
  thread_local Eigen::FFT<double> fft = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    return f;
  }();
  return fft;
}

}  // namespace

void Waveform::Validate() const {
  if (samples.empty()) throw InvalidInputError("Waveform: empty");
  if (!(sample_rate > 0)) throw InvalidInputError("Waveform: sample_rate <= 0");
  for (double x : samples)
    if (!std::isfinite(x)) throw InvalidInputError("Waveform: non-finite sample");
}

void StftParams::Validate() const {
  if (n_fft < 4 || n_fft % 2 != 0)
    throw InvalidInputError("StftParams: n_fft must be even and >= 4");
  if (hop == 0 || hop > n_fft || n_fft % hop != 0 || n_fft / hop < 3)
    throw InvalidInputError(
        "StftParams: hop must divide n_fft with at least 3 frames of overlap "
        "for a constant squared-window sum");
}

std::vector<double> StftParams::Window() const {
  std::vector<double> w(n_fft);
  for (std::size_t n = 0; n < n_fft; ++n) {
    const double s = std::sin(std::numbers::pi * (n + 0.5) / n_fft);
    w[n] = s * s;
  }
  return w;
}

std::size_t StftParams::NumFrames(std::size_t num_samples) const {
  if (num_samples < n_fft) return 0;
  return 1 + (num_samples - n_fft) / hop;
}

std::size_t StftParams::NumSamples(std::size_t num_frames) const {
  return num_frames == 0 ? 0 : (num_frames - 1) * hop + n_fft;
}

void RealFft(std::span<const double> frame,
             std::span<std::complex<double>> spectrum) {
  const std::size_t n = frame.size();
  if (spectrum.size() != n / 2 + 1)
    throw InvalidInputError("RealFft: spectrum must have N/2+1 bins");
  thread_local std::vector<std::complex<double>> full;
  full.resize(n);
  ThreadFft().fwd(full.data(), frame.data(), static_cast<Eigen::Index>(n));
  std::copy_n(full.begin(), spectrum.size(), spectrum.begin());
}

void InverseRealFft(std::span<const std::complex<double>> spectrum,
                    std::span<double> frame) {
  const std::size_t n = frame.size();
  if (spectrum.size() != n / 2 + 1 || n % 2 != 0)
    throw InvalidInputError("InverseRealFft: need N even and N/2+1 bins");
  thread_local std::vector<std::complex<double>> full;
  full.resize(n);
  std::copy(spectrum.begin(), spectrum.end(), full.begin());
  full[0] = {full[0].real(), 0.0};
  full[n / 2] = {full[n / 2].real(), 0.0};
  for (std::size_t k = n / 2 + 1; k < n; ++k) full[k] = std::conj(full[n - k]);
  ThreadFft().inv(frame.data(), full.data(), static_cast<Eigen::Index>(n));
}

ComplexSpectrogram Stft(const Waveform& w, const StftParams& p) {
  p.Validate();
  w.Validate();
  if (w.size() < p.n_fft)
    throw InvalidInputError("Stft: signal of " + std::to_string(w.size()) +
                            " samples is shorter than one window (" +
                            std::to_string(p.n_fft) + ")");
  const std::size_t frames = p.NumFrames(w.size()), bins = p.bins();
  const auto window = p.Window();
  ComplexSpectrogram s;
  s.params = p;
  s.real.resize(frames, bins);
  s.imag.resize(frames, bins);
  std::vector<double> buf(p.n_fft);
  std::vector<std::complex<double>> spec(bins);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t n = 0; n < p.n_fft; ++n)
      buf[n] = window[n] * w.samples[t * p.hop + n];
    RealFft(buf, spec);
    for (std::size_t k = 0; k < bins; ++k) {
      s.real(t, k) = spec[k].real();
      s.imag(t, k) = spec[k].imag();
    }
  }
  return s;
}

Waveform Istft(const ComplexSpectrogram& s, double sample_rate,
               double window_sum_floor) {
  if (!(window_sum_floor >= 0 && window_sum_floor < 1))
    throw InvalidInputError("Istft: window_sum_floor must be in [0, 1)");
  const StftParams& p = s.params;
  p.Validate();
  if (s.bins() != p.bins() || s.imag.rows() != s.real.rows() ||
      s.imag.cols() != s.real.cols())
    throw InvalidInputError("Istft: spectrogram dims inconsistent with params");
  Waveform out;
  out.sample_rate = sample_rate;
  const std::size_t frames = s.frames(), len = p.NumSamples(frames);
  out.samples.assign(len, 0.0);
  if (frames == 0) return out;
  const auto window = p.Window();
  std::vector<double> wsum(len, 0.0), buf(p.n_fft);
  std::vector<std::complex<double>> spec(p.bins());
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < p.bins(); ++k)
      spec[k] = {s.real(t, k), s.imag(t, k)};
    InverseRealFft(spec, buf);
    for (std::size_t n = 0; n < p.n_fft; ++n) {
      out.samples[t * p.hop + n] += window[n] * buf[n];
      wsum[t * p.hop + n] += window[n] * window[n];
    }
  }
  const double floor = window_sum_floor * *std::max_element(wsum.begin(), wsum.end());
  for (std::size_t i = 0; i < len; ++i) {
    if (!(wsum[i] > 0)) throw InternalError("Istft: zero window sum");
    out.samples[i] /= std::max(wsum[i], floor);
  }
  return out;
}

ComplexSpectrogram ApplyMask(const ComplexSpectrogram& s, const Matrix& mask) {
  if (mask.rows() != s.real.rows() || mask.cols() != s.real.cols())
    throw InvalidInputError("ApplyMask: mask dims do not match spectrogram");
  if ((mask.array() < 0).any())
    throw InvalidInputError("ApplyMask: mask entries must be >= 0");
  ComplexSpectrogram out;
  out.params = s.params;
  out.real = s.real.cwiseProduct(mask);
  out.imag = s.imag.cwiseProduct(mask);
  return out;
}

MagnitudeSpectrogram Magnitude(const ComplexSpectrogram& s) {
  MagnitudeSpectrogram m;
  m.mag = (s.real.array().square() + s.imag.array().square()).sqrt().matrix();
  return m;
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix MelFilterbank(std::size_t n_fft, std::size_t n_mels, double sample_rate) {
  if (n_mels == 0) throw InvalidInputError("MelFilterbank: n_mels == 0");
  const std::size_t bins = n_fft / 2 + 1;
  const double top = HzToMel(sample_rate / 2);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = MelToHz(top * static_cast<double>(i) / (n_mels + 1));
  Matrix fb = Matrix::Zero(bins, n_mels);
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = sample_rate * static_cast<double>(k) / n_fft;
    for (std::size_t m = 0; m < n_mels; ++m) {
      const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
      double v = 0;
      if (f > lo && f <= mid)
        v = (f - lo) / (mid - lo);
      else if (f > mid && f < hi)
        v = (hi - f) / (hi - mid);
      fb(k, m) = v;
    }
  }
  return fb;
}

MelFeatures LogMel(const MagnitudeSpectrogram& m, std::size_t n_mels,
                   double sample_rate) {
  const std::size_t bins = m.bins();
  if (bins < 3 || (bins - 1) % 2 != 0)
    throw InvalidInputError("LogMel: unexpected bin count");
  const Matrix fb = MelFilterbank(2 * (bins - 1), n_mels, sample_rate);
  MelFeatures out;
  out.feats = (m.mag.array().square().matrix() * fb)
                  .array()
                  .max(kLogFloor)
                  .log()
                  .matrix();
  return out;
}

MvnStats ComputeMvn(std::span<const MelFeatures> corpus) {
  if (corpus.empty()) throw InvalidInputError("ComputeMvn: empty corpus");
  const std::size_t dim = corpus[0].n_mels();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(dim);
  double count = 0;
  for (const auto& f : corpus) {
    if (f.n_mels() != dim)
      throw InvalidInputError("ComputeMvn: inconsistent feature dims");
    sum += f.feats.colwise().sum().transpose();
    count += static_cast<double>(f.frames());
  }
  if (count == 0) throw InvalidInputError("ComputeMvn: corpus has no frames");
  MvnStats stats;
  stats.mean = sum / count;
  // Second pass around the mean for accuracy.
  for (const auto& f : corpus)
    sumsq += (f.feats.rowwise() - stats.mean.transpose())
                 .array()
                 .square()
                 .matrix()
                 .colwise()
                 .sum()
                 .transpose();
  stats.std = (sumsq / count).array().sqrt().max(kMvnStdFloor).matrix();
  return stats;
}

MelFeatures ApplyMvn(const MelFeatures& f, const MvnStats& stats) {
  if (static_cast<Eigen::Index>(f.n_mels()) != stats.mean.size())
    throw InvalidInputError("ApplyMvn: dimension mismatch");
  MelFeatures out;
  out.feats = ((f.feats.rowwise() - stats.mean.transpose()).array().rowwise() /
               stats.std.transpose().array())
                  .matrix();
  return out;
}

Waveform SpeedPerturb(const Waveform& w, double factor) {
  if (!(factor >= 0.8 && factor <= 1.25))
    throw InvalidInputError("SpeedPerturb: factor must be in [0.8, 1.25]");
  w.Validate();
  Waveform out;
  out.sample_rate = w.sample_rate;
  const std::size_t len = w.size();
  const auto out_len =
      static_cast<std::size_t>(std::llround(static_cast<double>(len) / factor));
  out.samples.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) * factor;
    const auto i0 = static_cast<std::size_t>(pos);
    if (i0 + 1 >= len) {
      out.samples[i] = w.samples[len - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(i0);
    out.samples[i] = (1 - frac) * w.samples[i0] + frac * w.samples[i0 + 1];
  }
  return out;
}

}  // namespace radioasr
