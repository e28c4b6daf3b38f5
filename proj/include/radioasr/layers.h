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

#ifndef RADIOASR_LAYERS_H_
#define RADIOASR_LAYERS_H_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "radioasr/tensor.h"

namespace radioasr {

using ad::Tensor;

// Ordered registry of named trainable tensors. Layers keep handles to the
// same nodes, so a model's ParameterSet is the single source for
// checkpointing and optimization.
class ParameterSet {
 public:
  Tensor Add(const std::string& name, ad::Shape shape, std::vector<double> init);
  const std::vector<std::pair<std::string, Tensor>>& items() const {
    return items_;
  }
  std::size_t size() const { return items_.size(); }
  const Tensor* Find(const std::string& name) const;
  std::size_t NumScalars() const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

// Per-forward state: dropout only runs when training, with masks drawn from
// `rng`.
struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

// Deterministic initializers.
std::vector<double> UniformInit(std::size_t n, double bound, std::mt19937_64& rng);

struct LayerConfig {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::size_t hidden_dim = 0;
  std::size_t n_heads = 1;
  double dropout_rate = 0.0;
  std::size_t kernel_size = 15;
};

enum class ActivationKind { kRelu, kMish, kMetaAcon, kSwish, kSigmoid };

ActivationKind ParseActivation(const std::string& name);
std::string ActivationName(ActivationKind kind);

Tensor Mish(const Tensor& x);
Tensor Swish(const Tensor& x);
// Parameter-free kinds only; MetaAcon needs a MetaAcon instance.
Tensor Activation(const Tensor& x, ActivationKind kind);

Tensor Dropout(const Tensor& x, double rate, const ForwardContext& ctx);

class Linear {
 public:
  Linear() = default;
  Linear(ParameterSet& params, const std::string& prefix, std::size_t in,
         std::size_t out, std::mt19937_64& rng);
  // x [T x in] -> [T x out]
  Tensor Forward(const Tensor& x) const;

  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

// One LSTM step, gates ordered i, f, g, o along the 4h axis.
// x_t [1 x in], h_prev/c_prev [1 x h], w_ih [in x 4h], w_hh [h x 4h],
// b [4h]. Returns (h_t, c_t).
std::pair<Tensor, Tensor> LstmCell(const Tensor& x_t, const Tensor& h_prev,
                                   const Tensor& c_prev, const Tensor& w_ih,
                                   const Tensor& w_hh, const Tensor& b);

// Fused recurrence over a whole sequence starting from zero state.
// input_proj [T x 4h] holds x_t * w_ih + b for every t. Returns H [T x h].
// Equivalent to chaining LstmCell; backward is hand-written BPTT.
Tensor LstmRecurrence(const Tensor& input_proj, const Tensor& w_hh);

class Lstm {
 public:
  Lstm() = default;
  Lstm(ParameterSet& params, const std::string& prefix, std::size_t in,
       std::size_t hidden, std::mt19937_64& rng);
  // x [T x in] -> [T x hidden]
  Tensor Forward(const Tensor& x) const;
  std::size_t hidden() const { return hidden_; }

  Tensor w_ih, w_hh, b;

 private:
  std::size_t hidden_ = 0;
};

class Blstm {
 public:
  Blstm() = default;
  Blstm(ParameterSet& params, const std::string& prefix, std::size_t in,
        std::size_t hidden, std::mt19937_64& rng);
  // x [T x in] -> [T x 2*hidden]: forward pass | time-reversed backward pass.
  Tensor Forward(const Tensor& x) const;

  Lstm forward_dir, backward_dir;
};

class LayerNormLayer {
 public:
  LayerNormLayer() = default;
  LayerNormLayer(ParameterSet& params, const std::string& prefix, std::size_t d);
  Tensor Forward(const Tensor& x) const;

  Tensor gamma, beta;
};

// Additive attention mask: 1 marks a (query, key) pair that must not attend.
struct AttentionMask {
  std::size_t queries = 0, keys = 0;
  std::vector<std::uint8_t> blocked;  // [queries x keys]

  static AttentionMask Causal(std::size_t length);
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterSet& params, const std::string& prefix,
                     std::size_t d_model, std::size_t n_heads,
                     std::mt19937_64& rng);
  // query [Tq x d], memory [Tk x d] -> [Tq x d]. Self-attention when
  // memory is query.
  Tensor Forward(const Tensor& query, const Tensor& memory,
                 const AttentionMask* mask = nullptr) const;
  std::size_t n_heads() const { return n_heads_; }

  Linear q, k, v, out;

 private:
  std::size_t n_heads_ = 1;
};

// Macaron half of a Conformer block: LN -> Linear -> Swish -> dropout -> Linear.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParameterSet& params, const std::string& prefix, std::size_t d,
              std::size_t hidden, double dropout, std::mt19937_64& rng);
  Tensor Forward(const Tensor& x, const ForwardContext& ctx) const;

  LayerNormLayer norm;
  Linear up, down;

 private:
  double dropout_ = 0.0;
};

// LN -> pointwise (2d) -> GLU -> depthwise (same padding) -> LN -> Swish ->
// pointwise. The residual add is left to the caller.
class ConformerConvModule {
 public:
  ConformerConvModule() = default;
  ConformerConvModule(ParameterSet& params, const std::string& prefix,
                      std::size_t d, std::size_t kernel, double dropout,
                      std::mt19937_64& rng);
  Tensor Forward(const Tensor& x, const ForwardContext& ctx) const;

  LayerNormLayer norm_in;
  Linear pointwise_in;   // d -> 2d
  Tensor depthwise;      // [d x kernel]
  LayerNormLayer norm_mid;
  Linear pointwise_out;  // d -> d

 private:
  double dropout_ = 0.0;
};

// Sinusoidal absolute encoding: pe[t, 2i] = sin(t / 10000^(2i/d)),
// pe[t, 2i+1] = cos(t / 10000^(2i/d)).
Tensor PositionalEncoding(std::size_t length, std::size_t d);

// ACON-C with a switching factor generated from the sequence:
// beta = sigmoid(W2 W1 mean_t(x)), out = (p1-p2) x sigmoid(beta (p1-p2) x)
// + p2 x, all per channel.
class MetaAcon {
 public:
  MetaAcon() = default;
  MetaAcon(ParameterSet& params, const std::string& prefix, std::size_t channels,
           std::size_t bottleneck, std::mt19937_64& rng);
  Tensor Forward(const Tensor& x) const;
  // Same with an externally supplied switching factor [channels].
  Tensor ForwardWithBeta(const Tensor& x, const Tensor& beta) const;
  Tensor SwitchingFactor(const Tensor& x) const;

  Tensor p1, p2;   // [C]
  Tensor w1;       // [C x r]
  Tensor w2;       // [r x C]
};

}  // namespace radioasr

#endif  // RADIOASR_LAYERS_H_
