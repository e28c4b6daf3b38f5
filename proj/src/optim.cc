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

#include "radioasr/optim.h"

#include <cmath>

#include "radioasr/error.h"

namespace radioasr {

Adam::Adam(std::vector<ad::Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    if (!p.requires_grad()) throw InvalidInputError("Adam: parameter does not require grad");
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::Step(const std::vector<std::vector<double>>& grads) {
  if (grads.size() != params_.size())
    throw InvalidInputError("Adam: gradient count does not match parameters");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].size() != params_[i].size())
      throw InvalidInputError("Adam: gradient shape mismatch");
    if (ad::DebugChecksEnabled())
      for (double g : grads[i])
        if (!std::isfinite(g)) throw NumericError("Adam: non-finite gradient");
  }
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1 - b1) * g[j];
      v[j] = b2 * v[j] + (1 - b2) * g[j] * g[j];
      const double m_hat = m[j] / c1, v_hat = v[j] / c2;
      w[j] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

void Adam::Save(Checkpoint& ckpt, const std::vector<std::string>& names,
                const std::string& prefix) const {
  if (names.size() != params_.size())
    throw InvalidInputError("Adam::Save: name count mismatch");
  for (std::size_t i = 0; i < names.size(); ++i) {
    ckpt.Put(prefix + "m/" + names[i], params_[i].shape(), m_[i]);
    ckpt.Put(prefix + "v/" + names[i], params_[i].shape(), v_[i]);
  }
  ckpt.Put(prefix + "step", {}, {static_cast<double>(step_)});
}

void Adam::Load(const Checkpoint& ckpt, const std::vector<std::string>& names,
                const std::string& prefix) {
  if (names.size() != params_.size())
    throw InvalidInputError("Adam::Load: name count mismatch");
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& m = ckpt.Get(prefix + "m/" + names[i]);
    const auto& v = ckpt.Get(prefix + "v/" + names[i]);
    if (m.shape != params_[i].shape() || v.shape != params_[i].shape())
      throw InvalidInputError("Adam::Load: shape mismatch for " + names[i]);
    m_[i] = m.data;
    v_[i] = v.data;
  }
  step_ = static_cast<long long>(ckpt.Get(prefix + "step").data.at(0));
}

double GlobalNorm(const std::vector<std::vector<double>>& grads) {
  double s = 0;
  for (const auto& g : grads)
    for (double v : g) s += v * v;
  return std::sqrt(s);
}

double ClipGlobalNorm(std::vector<std::vector<double>>& grads, double max_norm) {
  const double norm = GlobalNorm(grads);
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& g : grads)
      for (double& v : g) v *= s;
  }
  return norm;
}

}  // namespace radioasr
