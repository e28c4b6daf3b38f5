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

#ifndef RADIOASR_ASR_BACKEND_H_
#define RADIOASR_ASR_BACKEND_H_

#include <random>
#include <string>
#include <vector>

#include "radioasr/layers.h"

namespace radioasr {

// Character vocabulary. Ids 0..2 are reserved: blank, sos/eos, pad.
class Vocabulary {
 public:
  static constexpr int kBlank = 0;
  static constexpr int kSosEos = 1;
  static constexpr int kPad = 2;

  Vocabulary() = default;
  // Reserved tokens followed by one token per character of `alphabet`.
  explicit Vocabulary(const std::string& alphabet);
  static Vocabulary Default();  // alphabet "abcdefghij"
  // One token per line, line index = id.
  static Vocabulary Load(const std::string& path);
  void Save(const std::string& path) const;
  static Vocabulary FromTokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  // Throws InvalidInputError on characters outside the vocabulary.
  std::vector<int> Encode(const std::string& text) const;
  // Reserved ids are skipped.
  std::string Decode(const std::vector<int>& ids) const;

 private:
  std::vector<std::string> tokens_;
};

struct TokenSequence {
  std::vector<int> tokens;
  std::string text;
};

struct AsrConfig {
  std::size_t n_encoder_layers = 2;
  std::size_t n_decoder_layers = 2;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t ff_multiplier = 4;
  std::size_t conv_kernel = 15;
  std::size_t input_dim = 80;
  double dropout = 0.1;
  double ctc_weight = 0.3;  // lambda
  std::size_t vocab_size = 13;

  void Validate() const;
};

enum class DecodeMode { kCtc, kAttention };
DecodeMode ParseDecodeMode(const std::string& name);

struct ConformerBlock {
  FeedForward ff1, ff2;
  LayerNormLayer attn_norm;
  MultiHeadAttention attn;
  ConformerConvModule conv;
  LayerNormLayer final_norm;
};

struct DecoderLayer {
  LayerNormLayer self_norm;
  MultiHeadAttention self_attn;
  LayerNormLayer cross_norm;
  MultiHeadAttention cross_attn;
  FeedForward ff;
};

struct AsrLossParts {
  Tensor att;    // undefined when its weight is 0
  Tensor ctc;    // undefined when its weight is 0
  Tensor total;  // (1 - lambda) att + lambda ctc
};

// Conformer encoder with a CTC head and a transformer decoder.
class AsrModel {
 public:
  AsrModel() = default;
  AsrModel(ParameterSet& params, const AsrConfig& cfg, std::mt19937_64& rng,
           const std::string& prefix = "asr");

  // features [T x input_dim] -> [ceil(T/4) x d_model]
  Tensor Encode(const Tensor& features, const ForwardContext& ctx) const;
  // Two stride-2 convolutions only.
  Tensor Subsample(const Tensor& features) const;
  Tensor EncoderBlock(const ConformerBlock& block, const Tensor& x,
                      const ForwardContext& ctx) const;

  // [T' x V] log-probabilities of the CTC head.
  Tensor CtcLogProbs(const Tensor& enc) const;
  Tensor CtcLoss(const Tensor& enc, const TokenSequence& target) const;

  // Teacher-forced decoder logits for the given input prefix, [L x V].
  Tensor DecoderLogits(const Tensor& enc, const std::vector<int>& inputs,
                       const ForwardContext& ctx) const;
  // Mean cross-entropy of [y, eos] given [sos, y].
  Tensor AttLoss(const Tensor& enc, const TokenSequence& target,
                 const ForwardContext& ctx) const;

  AsrLossParts AsrLoss(const Tensor& enc, const TokenSequence& target,
                       double lambda, const ForwardContext& ctx) const;

  TokenSequence GreedyDecode(const Tensor& enc, DecodeMode mode) const;

  const AsrConfig& config() const { return cfg_; }

  Tensor sub1_w, sub1_b, sub2_w, sub2_b;
  std::vector<ConformerBlock> encoder;
  Linear ctc_head;
  Tensor embedding;  // [V x d]
  std::vector<DecoderLayer> decoder;
  LayerNormLayer decoder_norm;
  Linear output;

 private:
  AsrConfig cfg_;
};

// Frame count after the convolutional front-end.
std::size_t SubsampledLength(std::size_t frames);

}  // namespace radioasr

#endif  // RADIOASR_ASR_BACKEND_H_
