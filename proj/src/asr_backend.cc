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

#include "radioasr/asr_backend.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "radioasr/ctc.h"
#include "radioasr/error.h"

namespace radioasr {

namespace {

const char* const kReserved[] = {"<blank>", "<sos/eos>", "<pad>"};

std::size_t ArgMax(std::span<const double> row) {
  return static_cast<std::size_t>(
      std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

Vocabulary::Vocabulary(const std::string& alphabet) {
  std::vector<std::string> tokens(std::begin(kReserved), std::end(kReserved));
  for (char c : alphabet) tokens.emplace_back(1, c);
  *this = FromTokens(std::move(tokens));
}

Vocabulary Vocabulary::Default() { return Vocabulary("abcdefghij"); }

Vocabulary Vocabulary::FromTokens(std::vector<std::string> tokens) {
  if (tokens.size() < 4)
    throw InvalidInputError("vocabulary needs the 3 reserved tokens and a symbol");
  for (std::size_t i = 3; i < tokens.size(); ++i) {
    if (tokens[i].size() != 1)
      throw InvalidInputError("vocabulary: token '" + tokens[i] +
                              "' is not a single character");
    for (std::size_t j = 3; j < i; ++j)
      if (tokens[j] == tokens[i])
        throw InvalidInputError("vocabulary: duplicate token '" + tokens[i] + "'");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  return v;
}

Vocabulary Vocabulary::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tokens.push_back(line);
  }
  return FromTokens(std::move(tokens));
}

void Vocabulary::Save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary " + path);
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw IoError("error writing " + path);
}

std::vector<int> Vocabulary::Encode(const std::string& text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text) {
    int id = -1;
    for (std::size_t i = 3; i < tokens_.size(); ++i)
      if (tokens_[i][0] == c) id = static_cast<int>(i);
    if (id < 0)
      throw InvalidInputError(std::string("character '") + c +
                              "' is not in the vocabulary");
    ids.push_back(id);
  }
  return ids;
}

std::string Vocabulary::Decode(const std::vector<int>& ids) const {
  std::string s;
  for (int id : ids)
    if (id >= 3 && static_cast<std::size_t>(id) < tokens_.size()) s += tokens_[id];
  return s;
}

void AsrConfig::Validate() const {
  if (!(ctc_weight >= 0 && ctc_weight <= 1))
    throw InvalidInputError("asr: ctc_weight must be in [0, 1]");
  if (vocab_size < 4) throw InvalidInputError("asr: vocabulary too small");
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0)
    throw InvalidInputError("asr: d_model must be a positive multiple of n_heads");
  if (conv_kernel % 2 == 0) throw InvalidInputError("asr: conv_kernel must be odd");
  if (input_dim == 0) throw InvalidInputError("asr: input_dim must be > 0");
  if (!(dropout >= 0 && dropout < 1))
    throw InvalidInputError("asr: dropout must be in [0, 1)");
}

DecodeMode ParseDecodeMode(const std::string& name) {
  if (name == "ctc") return DecodeMode::kCtc;
  if (name == "attention") return DecodeMode::kAttention;
  throw InvalidInputError("unknown decode mode '" + name + "'");
}

std::size_t SubsampledLength(std::size_t frames) {
  return (frames + 3) / 4;
}

AsrModel::AsrModel(ParameterSet& params, const AsrConfig& cfg,
                   std::mt19937_64& rng, const std::string& prefix)
    : cfg_(cfg) {
  cfg.Validate();
  const std::size_t d = cfg.d_model, V = cfg.vocab_size, in = cfg.input_dim;
  const std::size_t ff = cfg.ff_multiplier * d;
  auto conv_bound = [](std::size_t fan_in) {
    return std::sqrt(6.0 / static_cast<double>(fan_in));
  };
  sub1_w = params.Add(prefix + ".sub1.weight", {d, 3 * in},
                      UniformInit(d * 3 * in, conv_bound(3 * in), rng));
  sub1_b = params.Add(prefix + ".sub1.bias", {d}, std::vector<double>(d, 0.0));
  sub2_w = params.Add(prefix + ".sub2.weight", {d, 3 * d},
                      UniformInit(d * 3 * d, conv_bound(3 * d), rng));
  sub2_b = params.Add(prefix + ".sub2.bias", {d}, std::vector<double>(d, 0.0));
  for (std::size_t l = 0; l < cfg.n_encoder_layers; ++l) {
    const std::string p = prefix + ".enc" + std::to_string(l);
    ConformerBlock b;
    b.ff1 = FeedForward(params, p + ".ff1", d, ff, cfg.dropout, rng);
    b.attn_norm = LayerNormLayer(params, p + ".attn_norm", d);
    b.attn = MultiHeadAttention(params, p + ".attn", d, cfg.n_heads, rng);
    b.conv = ConformerConvModule(params, p + ".conv", d, cfg.conv_kernel,
                                 cfg.dropout, rng);
    b.ff2 = FeedForward(params, p + ".ff2", d, ff, cfg.dropout, rng);
    b.final_norm = LayerNormLayer(params, p + ".final_norm", d);
    encoder.push_back(std::move(b));
  }
  ctc_head = Linear(params, prefix + ".ctc_head", d, V, rng);
  embedding = params.Add(prefix + ".embedding", {V, d},
                         UniformInit(V * d, 1.0 / std::sqrt(double(d)), rng));
  for (std::size_t l = 0; l < cfg.n_decoder_layers; ++l) {
    const std::string p = prefix + ".dec" + std::to_string(l);
    DecoderLayer layer;
    layer.self_norm = LayerNormLayer(params, p + ".self_norm", d);
    layer.self_attn = MultiHeadAttention(params, p + ".self_attn", d, cfg.n_heads, rng);
    layer.cross_norm = LayerNormLayer(params, p + ".cross_norm", d);
    layer.cross_attn =
        MultiHeadAttention(params, p + ".cross_attn", d, cfg.n_heads, rng);
    layer.ff = FeedForward(params, p + ".ff", d, ff, cfg.dropout, rng);
    decoder.push_back(std::move(layer));
  }
  decoder_norm = LayerNormLayer(params, prefix + ".dec_norm", d);
  output = Linear(params, prefix + ".output", d, V, rng);
}

Tensor AsrModel::Subsample(const Tensor& features) const {
  if (features.ndim() != 2 || features.rows() == 0)
    throw InvalidInputError("encode: empty feature matrix");
  if (features.cols() != cfg_.input_dim)
    throw InvalidInputError("encode: expected " + std::to_string(cfg_.input_dim) +
                            "-dim features, got " + std::to_string(features.cols()));
  Tensor x = ad::Relu(ad::Conv1d(features, sub1_w, sub1_b, 3, 2, 1));
  return ad::Relu(ad::Conv1d(x, sub2_w, sub2_b, 3, 2, 1));
}

Tensor AsrModel::EncoderBlock(const ConformerBlock& b, const Tensor& input,
                              const ForwardContext& ctx) const {
  Tensor x = ad::Add(input, ad::Scale(b.ff1.Forward(input, ctx), 0.5));
  const Tensor normed = b.attn_norm.Forward(x);
  x = ad::Add(x, Dropout(b.attn.Forward(normed, normed), cfg_.dropout, ctx));
  x = ad::Add(x, b.conv.Forward(x, ctx));
  x = ad::Add(x, ad::Scale(b.ff2.Forward(x, ctx), 0.5));
  return b.final_norm.Forward(x);
}

Tensor AsrModel::Encode(const Tensor& features, const ForwardContext& ctx) const {
  Tensor x = Subsample(features);
  x = Dropout(ad::Add(x, PositionalEncoding(x.rows(), cfg_.d_model)),
              cfg_.dropout, ctx);
  for (const auto& block : encoder) x = EncoderBlock(block, x, ctx);
  return x;
}

Tensor AsrModel::CtcLogProbs(const Tensor& enc) const {
  return ad::LogSoftmax(ctc_head.Forward(enc));
}

Tensor AsrModel::CtcLoss(const Tensor& enc, const TokenSequence& target) const {
  return radioasr::CtcLoss(CtcLogProbs(enc), target.tokens, Vocabulary::kBlank);
}

Tensor AsrModel::DecoderLogits(const Tensor& enc, const std::vector<int>& inputs,
                               const ForwardContext& ctx) const {
  if (inputs.empty()) throw InvalidInputError("decoder: empty input sequence");
  for (int id : inputs)
    if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size)
      throw InvalidInputError("decoder: token id out of range");
  const std::size_t L = inputs.size();
  Tensor x = ad::Add(ad::Embedding(embedding, inputs),
                     PositionalEncoding(L, cfg_.d_model));
  x = Dropout(x, cfg_.dropout, ctx);
  const AttentionMask causal = AttentionMask::Causal(L);
  for (const auto& layer : decoder) {
    const Tensor s = layer.self_norm.Forward(x);
    x = ad::Add(x, Dropout(layer.self_attn.Forward(s, s, &causal), cfg_.dropout, ctx));
    const Tensor c = layer.cross_norm.Forward(x);
    x = ad::Add(x, Dropout(layer.cross_attn.Forward(c, enc), cfg_.dropout, ctx));
    x = ad::Add(x, layer.ff.Forward(x, ctx));
  }
  return output.Forward(decoder_norm.Forward(x));
}

Tensor AsrModel::AttLoss(const Tensor& enc, const TokenSequence& target,
                         const ForwardContext& ctx) const {
  if (target.tokens.empty()) throw InvalidInputError("att_loss: empty target");
  std::vector<int> in{Vocabulary::kSosEos};
  in.insert(in.end(), target.tokens.begin(), target.tokens.end());
  std::vector<int> out(target.tokens);
  out.push_back(Vocabulary::kSosEos);
  const Tensor logp = ad::LogSoftmax(DecoderLogits(enc, in, ctx));
  return ad::Neg(ad::Mean(ad::Pick(logp, out)));
}

AsrLossParts AsrModel::AsrLoss(const Tensor& enc, const TokenSequence& target,
                               double lambda, const ForwardContext& ctx) const {
  if (!(lambda >= 0 && lambda <= 1))
    throw InvalidInputError("asr_loss: lambda must be in [0, 1]");
  AsrLossParts parts;
  if (lambda < 1) parts.att = AttLoss(enc, target, ctx);
  if (lambda > 0) parts.ctc = CtcLoss(enc, target);
  if (lambda == 0)
    parts.total = parts.att;
  else if (lambda == 1)
    parts.total = parts.ctc;
  else
    parts.total = ad::Add(ad::Scale(parts.att, 1 - lambda), ad::Scale(parts.ctc, lambda));
  return parts;
}

TokenSequence AsrModel::GreedyDecode(const Tensor& enc, DecodeMode mode) const {
  ad::NoGradGuard no_grad;
  const std::size_t V = cfg_.vocab_size;
  TokenSequence out;
  if (mode == DecodeMode::kCtc) {
    const Tensor lp = CtcLogProbs(enc);
    std::vector<int> best(lp.rows());
    for (std::size_t t = 0; t < lp.rows(); ++t)
      best[t] = static_cast<int>(ArgMax(lp.data().subspan(t * V, V)));
    out.tokens = CtcCollapse(best, Vocabulary::kBlank);
    return out;
  }
  std::vector<int> prefix{Vocabulary::kSosEos};
  const std::size_t max_len = 2 * enc.rows();
  const ForwardContext eval;
  while (out.tokens.size() < max_len) {
    const Tensor logits = DecoderLogits(enc, prefix, eval);
    const std::size_t last = logits.rows() - 1;
    const int id = static_cast<int>(ArgMax(logits.data().subspan(last * V, V)));
    if (id == Vocabulary::kSosEos) break;
    out.tokens.push_back(id);
    prefix.push_back(id);
  }
  return out;
}

}  // namespace radioasr
