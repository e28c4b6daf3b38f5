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

#include "radioasr/ctc.h"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "radioasr/error.h"

namespace radioasr {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

struct Lattice {
  std::size_t frames = 0, vocab = 0, states = 0;
  std::vector<int> labels;     // blank-augmented target, length 2L+1
  std::vector<double> alpha;   // [frames x states]
  std::vector<double> beta;
  double log_likelihood = kNegInf;
};

void Validate(std::size_t frames, std::size_t vocab, std::span<const int> target,
              int blank) {
  if (frames == 0 || vocab == 0)
    throw InvalidInputError("CtcLoss: empty log-probability matrix");
  if (blank < 0 || static_cast<std::size_t>(blank) >= vocab)
    throw InvalidInputError("CtcLoss: blank id out of range");
  for (int id : target) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab)
      throw InvalidInputError("CtcLoss: target id " + std::to_string(id) +
                              " outside vocabulary of " + std::to_string(vocab));
    if (id == blank) throw InvalidInputError("CtcLoss: target contains blank");
  }
  const std::size_t need = CtcMinFrames(target);
  if (frames < need)
    throw AlignmentInfeasibleError(
        "CtcLoss: target needs at least " + std::to_string(need) +
        " frames, got " + std::to_string(frames));
}

// s may be reached from s-2 only when it is a symbol differing from the
// symbol two states back.
bool CanSkip(const std::vector<int>& labels, std::size_t s, int blank) {
  return s >= 2 && labels[s] != blank && labels[s] != labels[s - 2];
}

void RunForward(std::span<const double> lp, Lattice& lat, int blank) {
  const std::size_t T = lat.frames, S = lat.states, V = lat.vocab;
  lat.alpha.assign(T * S, kNegInf);
  lat.alpha[0] = lp[lat.labels[0]];
  if (S > 1) lat.alpha[1] = lp[lat.labels[1]];
  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = &lat.alpha[(t - 1) * S];
    double* cur = &lat.alpha[t * S];
    for (std::size_t s = 0; s < S; ++s) {
      double a = prev[s];
      if (s >= 1) a = LogAdd(a, prev[s - 1]);
      if (CanSkip(lat.labels, s, blank)) a = LogAdd(a, prev[s - 2]);
      cur[s] = a == kNegInf ? kNegInf : a + lp[t * V + lat.labels[s]];
    }
  }
  const double* last = &lat.alpha[(T - 1) * S];
  lat.log_likelihood = S > 1 ? LogAdd(last[S - 1], last[S - 2]) : last[S - 1];
}

// beta here includes the emission at frame t, so alpha+beta double counts
// it and occupancy subtracts lp once.
void RunBackward(std::span<const double> lp, Lattice& lat, int blank) {
  const std::size_t T = lat.frames, S = lat.states, V = lat.vocab;
  lat.beta.assign(T * S, kNegInf);
  double* last = &lat.beta[(T - 1) * S];
  last[S - 1] = lp[(T - 1) * V + lat.labels[S - 1]];
  if (S > 1) last[S - 2] = lp[(T - 1) * V + lat.labels[S - 2]];
  for (std::size_t t = T - 1; t-- > 0;) {
    const double* next = &lat.beta[(t + 1) * S];
    double* cur = &lat.beta[t * S];
    for (std::size_t s = 0; s < S; ++s) {
      double b = next[s];
      if (s + 1 < S) b = LogAdd(b, next[s + 1]);
      if (s + 2 < S && CanSkip(lat.labels, s + 2, blank)) b = LogAdd(b, next[s + 2]);
      cur[s] = b == kNegInf ? kNegInf : b + lp[t * V + lat.labels[s]];
    }
  }
}

Lattice BuildLattice(std::size_t frames, std::size_t vocab,
                     std::span<const int> target, int blank) {
  Lattice lat;
  lat.frames = frames;
  lat.vocab = vocab;
  lat.labels.reserve(2 * target.size() + 1);
  lat.labels.push_back(blank);
  for (int id : target) {
    lat.labels.push_back(id);
    lat.labels.push_back(blank);
  }
  lat.states = lat.labels.size();
  return lat;
}

}  // namespace

std::size_t CtcMinFrames(std::span<const int> target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++n;
  return n;
}

double CtcNegLogLikelihood(std::span<const double> log_probs, std::size_t frames,
                           std::size_t vocab, std::span<const int> target,
                           int blank) {
  if (log_probs.size() != frames * vocab)
    throw InvalidInputError("CtcNegLogLikelihood: size mismatch");
  Validate(frames, vocab, target, blank);
  Lattice lat = BuildLattice(frames, vocab, target, blank);
  RunForward(log_probs, lat, blank);
  return -lat.log_likelihood;
}

ad::Tensor CtcLoss(const ad::Tensor& log_probs, std::span<const int> target,
                   int blank) {
  if (log_probs.ndim() != 2)
    throw InvalidInputError("CtcLoss: expected [frames x vocab], got " +
                            ad::ShapeToString(log_probs.shape()));
  const std::size_t T = log_probs.rows(), V = log_probs.cols();
  Validate(T, V, target, blank);
  auto lat = std::make_shared<Lattice>(BuildLattice(T, V, target, blank));
  RunForward(log_probs.data(), *lat, blank);
  if (!std::isfinite(lat->log_likelihood))
    throw NumericError("CtcLoss: total alignment probability underflowed");
  const double loss = -lat->log_likelihood;
  return ad::MakeResult(
      {}, {loss}, {log_probs},
      [lat, blank](const ad::Node& self, std::span<const double> g,
                   ad::BackwardContext& ctx) {
        auto glp = ctx.Grad(self, 0);
        if (glp.empty()) return;
        const auto& lp = self.parents[0]->value;
        RunBackward(lp, *lat, blank);
        const std::size_t T = lat->frames, S = lat->states, V = lat->vocab;
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t s = 0; s < S; ++s) {
            const double a = lat->alpha[t * S + s], b = lat->beta[t * S + s];
            if (a == kNegInf || b == kNegInf) continue;
            const std::size_t idx = t * V + lat->labels[s];
            const double occ = std::exp(a + b - lp[idx] - lat->log_likelihood);
            glp[idx] -= g[0] * occ;
          }
      },
      "ctc_loss");
}

std::vector<int> CtcCollapse(std::span<const int> frame_ids, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int id : frame_ids) {
    if (id != prev && id != blank) out.push_back(id);
    prev = id;
  }
  return out;
}

}  // namespace radioasr
