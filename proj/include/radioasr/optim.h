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

#ifndef RADIOASR_OPTIM_H_
#define RADIOASR_OPTIM_H_

#include <string>
#include <vector>

#include "radioasr/checkpoint.h"
#include "radioasr/tensor.h"

namespace radioasr {

struct AdamOptions {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed list of leaf parameters.
class Adam {
 public:
  Adam(std::vector<ad::Tensor> params, AdamOptions options = {});

  // grads[i] is shaped like params[i]. In debug-check mode a non-finite
  // gradient raises NumericError before anything is updated.
  void Step(const std::vector<std::vector<double>>& grads);

  long long step() const { return step_; }
  const AdamOptions& options() const { return options_; }

  // Moments are stored as "<prefix>m/<name>", "<prefix>v/<name>" and the
  // counter as "<prefix>step".
  void Save(Checkpoint& ckpt, const std::vector<std::string>& names,
            const std::string& prefix = "adam.") const;
  void Load(const Checkpoint& ckpt, const std::vector<std::string>& names,
            const std::string& prefix = "adam.");

 private:
  std::vector<ad::Tensor> params_;
  AdamOptions options_;
  std::vector<std::vector<double>> m_, v_;
  long long step_ = 0;
};

// Scales all gradients in place so that their joint L2 norm is at most
// max_norm. Returns the norm before clipping.
double ClipGlobalNorm(std::vector<std::vector<double>>& grads, double max_norm);

double GlobalNorm(const std::vector<std::vector<double>>& grads);

}  // namespace radioasr

#endif  // RADIOASR_OPTIM_H_
