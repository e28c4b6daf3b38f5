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

#ifndef RADIOASR_CTC_H_
#define RADIOASR_CTC_H_

#include <span>
#include <vector>

#include "radioasr/tensor.h"

namespace radioasr {

// Smallest number of frames that can carry `target`: one per symbol plus a
// separating blank between equal neighbours.
std::size_t CtcMinFrames(std::span<const int> target);

// Negative log-likelihood of `target` under per-frame log-probabilities
// log_probs [T x V], summed over all blank-augmented alignments. The forward
// and backward recursions run in log space. The gradient w.r.t. log_probs is
// minus the state occupancy, so chaining it through LogSoftmax gives the
// usual softmax-minus-occupancy rule.
//
// Throws AlignmentInfeasibleError when T < CtcMinFrames(target) and
// InvalidInputError for out-of-range ids or a target containing `blank`.
ad::Tensor CtcLoss(const ad::Tensor& log_probs, std::span<const int> target,
                   int blank = 0);

// Forward-only variant on plain data; returns -log P(target | log_probs).
double CtcNegLogLikelihood(std::span<const double> log_probs, std::size_t frames,
                           std::size_t vocab, std::span<const int> target,
                           int blank = 0);

// Per-frame argmax, merge repeats, drop blanks.
std::vector<int> CtcCollapse(std::span<const int> frame_ids, int blank = 0);

}  // namespace radioasr

#endif  // RADIOASR_CTC_H_
