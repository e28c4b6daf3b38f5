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

#include "radioasr/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "radioasr/error.h"

namespace radioasr::ad {

GradCheckResult CheckGradients(const std::string& name,
                               const std::function<Tensor()>& loss_fn,
                               std::vector<Tensor> inputs,
                               const GradCheckOptions& options) {
  GradCheckResult result;
  result.name = name;
  const Tensor loss = loss_fn();
  const Gradients grads = Backward(loss);
  std::mt19937_64 rng(options.seed);
  bool all_finite = true;

  for (auto& input : inputs) {
    if (!input.requires_grad())
      throw InvalidInputError("CheckGradients: input does not require grad");
    const std::vector<double> analytic = grads.Get(input);
    std::vector<std::size_t> coords(input.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_input > 0 &&
        coords.size() > options.max_coords_per_input) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_input);
    }
    auto data = input.mutable_data();
    for (std::size_t i : coords) {
      const double saved = data[i];
      data[i] = saved + options.step;
      const double up = loss_fn().item();
      data[i] = saved - options.step;
      const double down = loss_fn().item();
      data[i] = saved;
      const double numeric = (up - down) / (2 * options.step);
      const double denom = std::max(
          {std::abs(analytic[i]), std::abs(numeric), options.denom_floor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (!std::isfinite(rel)) all_finite = false;
      if (!(rel <= result.max_rel_error)) {
        result.max_rel_error = rel;
        result.analytic_at_worst = analytic[i];
        result.numeric_at_worst = numeric;
      }
      ++result.coords_checked;
    }
  }
  result.passed = all_finite && result.max_rel_error < options.tolerance;
  return result;
}

Tensor RandomProjection(const Tensor& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> r(out.size());
  for (auto& v : r) v = dist(rng);
  return Sum(Mul(out, Tensor::Constant(out.shape(), std::move(r))));
}

}  // namespace radioasr::ad
