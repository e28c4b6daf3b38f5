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

#ifndef RADIOASR_GRADIENT_SUITE_H_
#define RADIOASR_GRADIENT_SUITE_H_

#include <functional>
#include <string>
#include <vector>

#include "radioasr/gradcheck.h"

namespace radioasr {

struct GradientSuiteOptions {
  ad::GradCheckOptions check;
  // Only cases whose name contains this substring; empty runs everything.
  std::string filter;
};

// Central finite-difference checks of every differentiable primitive, the
// layers, the enhancement chain in both phase modes, CTC and the attention
// loss, each on three shapes.
std::vector<ad::GradCheckResult> RunGradientSuite(
    const GradientSuiteOptions& options = {},
    const std::function<void(const ad::GradCheckResult&)>& on_result = {});

}  // namespace radioasr

#endif  // RADIOASR_GRADIENT_SUITE_H_
