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

#ifndef RADIOASR_SIGNAL_H_
#define RADIOASR_SIGNAL_H_

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace radioasr {

// Row-major so that row t is the contiguous frame t.
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kDefaultSampleRate = 16000.0;
inline constexpr double kLogFloor = 1e-10;
inline constexpr double kMvnStdFloor = 1e-8;
inline constexpr std::size_t kDefaultMels = 80;

struct Waveform {
  std::vector<double> samples;
  double sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration() const { return samples.size() / sample_rate; }
  // Non-empty, finite samples, positive rate.
  void Validate() const;
};

struct StftParams {
  std::size_t n_fft = 512;
  std::size_t hop = 128;

  std::size_t bins() const { return n_fft / 2 + 1; }
  // n_fft even and >= 4, 0 < hop <= n_fft, and hop divides n_fft/4 * k
  // so the squared window overlap-adds to a positive constant.
  void Validate() const;
  // Hann window sampled at half-integer points, w[n] = sin^2(pi (n+0.5)/N).
  // Strictly positive, so every output sample of Istft has a non-zero
  // window sum.
  std::vector<double> Window() const;
  std::size_t NumFrames(std::size_t num_samples) const;
  std::size_t NumSamples(std::size_t num_frames) const;
};

struct ComplexSpectrogram {
  Matrix real;  // [frames x bins]
  Matrix imag;
  StftParams params;

  std::size_t frames() const { return static_cast<std::size_t>(real.rows()); }
  std::size_t bins() const { return static_cast<std::size_t>(real.cols()); }
};

struct MagnitudeSpectrogram {
  Matrix mag;  // [frames x bins], >= 0
  std::size_t frames() const { return static_cast<std::size_t>(mag.rows()); }
  std::size_t bins() const { return static_cast<std::size_t>(mag.cols()); }
};

struct MelFeatures {
  Matrix feats;  // [frames x n_mels]
  std::size_t frames() const { return static_cast<std::size_t>(feats.rows()); }
  std::size_t n_mels() const { return static_cast<std::size_t>(feats.cols()); }
};

struct MvnStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;  // each >= kMvnStdFloor
};

// One-sided spectrum of a single real frame of length N (N/2+1 bins).
// Thread-safe; each thread keeps its own FFT plan cache.
void RealFft(std::span<const double> frame,
             std::span<std::complex<double>> spectrum);
// Inverse of RealFft; imag parts of the DC and Nyquist bins are ignored.
void InverseRealFft(std::span<const std::complex<double>> spectrum,
                    std::span<double> frame);

// Frames start at t*hop; a trailing partial frame is dropped.
ComplexSpectrogram Stft(const Waveform& w, const StftParams& p = {});

// Weighted overlap-add: x[n] = sum_t w[n-t*hop] y_t[n-t*hop] / sum_t w^2[..].
// Output length (frames-1)*hop + n_fft.
//
// The window-power sum is tiny in the first and last few dozen samples, so
// a spectrogram that is not the STFT of any signal (e.g. after masking) gets
// its edges amplified by up to 1/w. A positive `window_sum_floor` (relative
// to the largest window sum) bounds that gain at the cost of exact
// reconstruction of the outermost samples. 0 keeps the exact inverse.
Waveform Istft(const ComplexSpectrogram& s,
               double sample_rate = kDefaultSampleRate,
               double window_sum_floor = 0.0);

// Floor used for waveforms written out after masking.
inline constexpr double kOutputWindowSumFloor = 1e-2;

// Elementwise real gain; phase is untouched. mask entries must be >= 0.
ComplexSpectrogram ApplyMask(const ComplexSpectrogram& s, const Matrix& mask);

MagnitudeSpectrogram Magnitude(const ComplexSpectrogram& s);

// HTK-mel triangular filterbank spanning 0 Hz..Nyquist, [bins x n_mels].
Matrix MelFilterbank(std::size_t n_fft, std::size_t n_mels,
                     double sample_rate = kDefaultSampleRate);
double HzToMel(double hz);
double MelToHz(double mel);

// log(max(|X|^2 * fb, kLogFloor)).
MelFeatures LogMel(const MagnitudeSpectrogram& m,
                   std::size_t n_mels = kDefaultMels,
                   double sample_rate = kDefaultSampleRate);

MvnStats ComputeMvn(std::span<const MelFeatures> corpus);
MelFeatures ApplyMvn(const MelFeatures& f, const MvnStats& stats);

// Linear-interpolation resampling by `factor` in [0.8, 1.25]; output
// length round(len / factor).
Waveform SpeedPerturb(const Waveform& w, double factor);

// The 3x speed-perturbation factors.
inline constexpr double kSpeedFactors[] = {0.9, 1.0, 1.1};

// RIFF/WAVE, PCM 16-bit little-endian, mono. Samples are value/32768.
Waveform ReadWav(const std::string& path);
// Clips to [-1, 1) before quantization.
void WriteWav(const std::string& path, const Waveform& w);

}  // namespace radioasr

#endif  // RADIOASR_SIGNAL_H_
