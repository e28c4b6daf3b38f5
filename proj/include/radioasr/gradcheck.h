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

#ifndef RADIOASR_GRADCHECK_H_
#define RADIOASR_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "radioasr/tensor.h"

namespace radioasr::ad {

struct GradCheckOptions {
  double step = 1e-4;        // central-difference half width
  double tolerance = 1e-4;   // max elementwise relative error
  // Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor)
  // so that coordinates with vanishing gradient are compared absolutely.
  double denom_floor = 1e-6;
  // 0 checks every coordinate; otherwise a seeded random subset per input.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 1;
};

struct GradCheckResult {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0;
  double analytic_at_worst = 0;
  double numeric_at_worst = 0;
  bool passed = false;
};

// Compares Backward(loss_fn()) against central differences w.r.t. every
// element of `inputs` (leaf tensors; perturbed in place and restored).
GradCheckResult CheckGradients(const std::string& name,
                               const std::function<Tensor()>& loss_fn,
                               std::vector<Tensor> inputs,
                               const GradCheckOptions& options = {});

// sum(out * R) for a fixed pseudo-random R; turns any tensor-valued
// function into a scalar with a non-degenerate gradient.
Tensor RandomProjection(const Tensor& out, std::uint64_t seed);

}  // namespace radioasr::ad

#endif  // RADIOASR_GRADCHECK_H_
