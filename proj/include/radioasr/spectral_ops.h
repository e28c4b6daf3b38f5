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

#ifndef RADIOASR_SPECTRAL_OPS_H_
#define RADIOASR_SPECTRAL_OPS_H_

#include "radioasr/signal.h"
#include "radioasr/tensor.h"

// Tape versions of the signal kernels. A complex spectrogram on the tape is
// packed as one [frames x 2*bins] tensor: real parts in columns [0, bins),
// imaginary parts in [bins, 2*bins).
namespace radioasr::ad {

Tensor PackSpectrogram(const ComplexSpectrogram& s);
ComplexSpectrogram UnpackSpectrogram(const Tensor& packed, const StftParams& p);

// wave [L] -> packed [frames x 2*bins]. Linear; backward is the adjoint.
Tensor Stft(const Tensor& wave, const StftParams& p);
// packed [frames x 2*bins] -> wave [(frames-1)*hop + n_fft]. Linear.
Tensor Istft(const Tensor& packed, const StftParams& p);
// packed -> [frames x bins], re^2 + im^2.
Tensor PowerSpectrum(const Tensor& packed);
// packed * [mask | mask] for a [frames x bins] mask.
Tensor MaskSpectrogram(const Tensor& packed, const Tensor& mask);
// power [frames x bins] -> log(max(power * fb, floor)) [frames x n_mels].
Tensor LogMel(const Tensor& power, const Matrix& filterbank);
// (x - mean) / std, row-wise.
Tensor ApplyMvn(const Tensor& feats, const MvnStats& stats);

}  // namespace radioasr::ad

#endif  // RADIOASR_SPECTRAL_OPS_H_
