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

#include "radioasr/layers.h"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>

#include "radioasr/error.h"

namespace radioasr {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

double Sigm(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor ParameterSet::Add(const std::string& name, ad::Shape shape,
                         std::vector<double> init) {
  if (Find(name)) throw InvalidInputError("ParameterSet: duplicate " + name);
  Tensor t = Tensor::Parameter(std::move(shape), std::move(init));
  items_.emplace_back(name, t);
  return t;
}

const Tensor* ParameterSet::Find(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return &t;
  return nullptr;
}

std::size_t ParameterSet::NumScalars() const {
  std::size_t n = 0;
  for (const auto& [_, t] : items_) n += t.size();
  return n;
}

std::vector<double> UniformInit(std::size_t n, double bound,
                                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

ActivationKind ParseActivation(const std::string& name) {
  if (name == "relu") return ActivationKind::kRelu;
  if (name == "mish") return ActivationKind::kMish;
  if (name == "metaacon" || name == "meta-acon") return ActivationKind::kMetaAcon;
  if (name == "swish") return ActivationKind::kSwish;
  if (name == "sigmoid") return ActivationKind::kSigmoid;
  throw InvalidInputError("unknown activation '" + name + "'");
}

std::string ActivationName(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::kRelu: return "relu";
    case ActivationKind::kMish: return "mish";
    case ActivationKind::kMetaAcon: return "metaacon";
    case ActivationKind::kSwish: return "swish";
    case ActivationKind::kSigmoid: return "sigmoid";
  }
  throw InvalidInputError("unknown activation kind");
}

Tensor Mish(const Tensor& x) { return ad::Mul(x, ad::Tanh(ad::Softplus(x))); }

Tensor Swish(const Tensor& x) { return ad::Mul(x, ad::Sigmoid(x)); }

Tensor Activation(const Tensor& x, ActivationKind kind) {
  switch (kind) {
    case ActivationKind::kRelu: return ad::Relu(x);
    case ActivationKind::kMish: return Mish(x);
    case ActivationKind::kSwish: return Swish(x);
    case ActivationKind::kSigmoid: return ad::Sigmoid(x);
    case ActivationKind::kMetaAcon:
      throw InvalidInputError("Activation: MetaAcon has parameters; use MetaAcon");
  }
  throw InvalidInputError("Activation: unknown kind");
}

Tensor Dropout(const Tensor& x, double rate, const ForwardContext& ctx) {
  if (!ctx.training || rate <= 0) return x;
  if (!ctx.rng) throw InvalidStateError("Dropout: training without an rng");
  std::bernoulli_distribution keep(1.0 - rate);
  std::vector<double> mask(x.size());
  const double scale = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = keep(*ctx.rng) ? scale : 0.0;
  return ad::Mul(x, Tensor::Constant(x.shape(), std::move(mask)));
}

// ---------------------------------------------------------------------------

Linear::Linear(ParameterSet& params, const std::string& prefix, std::size_t in,
               std::size_t out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  weight = params.Add(prefix + ".weight", {in, out}, UniformInit(in * out, bound, rng));
  bias = params.Add(prefix + ".bias", {out}, std::vector<double>(out, 0.0));
}

Tensor Linear::Forward(const Tensor& x) const {
  return ad::Add(ad::MatMul(x, weight), bias);
}

// ---------------------------------------------------------------------------

std::pair<Tensor, Tensor> LstmCell(const Tensor& x_t, const Tensor& h_prev,
                                   const Tensor& c_prev, const Tensor& w_ih,
                                   const Tensor& w_hh, const Tensor& b) {
  const std::size_t h = h_prev.cols();
  const Tensor pre =
      ad::Add(ad::Add(ad::MatMul(x_t, w_ih), ad::MatMul(h_prev, w_hh)), b);
  const auto gates = ad::Split(pre, {h, h, h, h}, 1);
  const Tensor i = ad::Sigmoid(gates[0]);
  const Tensor f = ad::Sigmoid(gates[1]);
  const Tensor g = ad::Tanh(gates[2]);
  const Tensor o = ad::Sigmoid(gates[3]);
  const Tensor c = ad::Add(ad::Mul(f, c_prev), ad::Mul(i, g));
  return {ad::Mul(o, ad::Tanh(c)), c};
}

Tensor LstmRecurrence(const Tensor& input_proj, const Tensor& w_hh) {
  if (input_proj.ndim() != 2 || w_hh.ndim() != 2 ||
      input_proj.cols() != w_hh.cols() || w_hh.cols() != 4 * w_hh.rows())
    throw InvalidInputError("LstmRecurrence: shapes " +
                            ad::ShapeToString(input_proj.shape()) + " and " +
                            ad::ShapeToString(w_hh.shape()) + " are invalid");
  const std::size_t steps = input_proj.rows(), h = w_hh.rows();
  struct Saved {
    RowMat gates;  // activated i, f, g, o per step
    RowMat cells;
  };
  auto saved = std::make_shared<Saved>();
  saved->gates.resize(steps, 4 * h);
  saved->cells.resize(steps, h);
  std::vector<double> out(steps * h);
  ConstMap proj(input_proj.data().data(), steps, 4 * h);
  ConstMap whh(w_hh.data().data(), h, 4 * h);
  MutMap hs(out.data(), steps, h);
  Eigen::RowVectorXd a(4 * h), c_prev = Eigen::RowVectorXd::Zero(h);
  for (std::size_t t = 0; t < steps; ++t) {
    a = proj.row(t);
    if (t > 0) a.noalias() += hs.row(t - 1) * whh;
    for (std::size_t j = 0; j < h; ++j) {
      const double i = Sigm(a[j]), f = Sigm(a[h + j]), g = std::tanh(a[2 * h + j]),
                   o = Sigm(a[3 * h + j]);
      const double c = f * c_prev[j] + i * g;
      saved->gates(t, j) = i;
      saved->gates(t, h + j) = f;
      saved->gates(t, 2 * h + j) = g;
      saved->gates(t, 3 * h + j) = o;
      saved->cells(t, j) = c;
      hs(t, j) = o * std::tanh(c);
    }
    c_prev = saved->cells.row(t);
  }
  return ad::MakeResult(
      {steps, h}, std::move(out), {input_proj, w_hh},
      [steps, h, saved](const ad::Node& self, std::span<const double> g,
                        ad::BackwardContext& ctx) {
        auto g_proj = ctx.Grad(self, 0);
        auto g_whh = ctx.Grad(self, 1);
        ConstMap whh(self.parents[1]->value.data(), h, 4 * h);
        ConstMap hs(self.value.data(), steps, h);
        ConstMap gout(g.data(), steps, h);
        RowMat d_pre(steps, 4 * h);
        Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(h);
        Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(h);
        for (std::size_t tt = steps; tt-- > 0;) {
          for (std::size_t j = 0; j < h; ++j) {
            const double i = saved->gates(tt, j), f = saved->gates(tt, h + j),
                         gg = saved->gates(tt, 2 * h + j),
                         o = saved->gates(tt, 3 * h + j);
            const double c = saved->cells(tt, j);
            const double c_prev = tt > 0 ? saved->cells(tt - 1, j) : 0.0;
            const double tc = std::tanh(c);
            const double dh = gout(tt, j) + dh_next[j];
            const double dc = dh * o * (1 - tc * tc) + dc_next[j];
            d_pre(tt, j) = dc * gg * i * (1 - i);
            d_pre(tt, h + j) = dc * c_prev * f * (1 - f);
            d_pre(tt, 2 * h + j) = dc * i * (1 - gg * gg);
            d_pre(tt, 3 * h + j) = dh * tc * o * (1 - o);
            dc_next[j] = dc * f;
          }
          dh_next.noalias() = d_pre.row(tt) * whh.transpose();
        }
        if (!g_proj.empty()) MutMap(g_proj.data(), steps, 4 * h) += d_pre;
        if (!g_whh.empty() && steps > 1)
          MutMap(g_whh.data(), h, 4 * h).noalias() +=
              hs.topRows(steps - 1).transpose() * d_pre.bottomRows(steps - 1);
      },
      "lstm_recurrence");
}

Lstm::Lstm(ParameterSet& params, const std::string& prefix, std::size_t in,
           std::size_t hidden, std::mt19937_64& rng)
    : hidden_(hidden) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  w_ih = params.Add(prefix + ".w_ih", {in, 4 * hidden},
                    UniformInit(in * 4 * hidden, bound, rng));
  w_hh = params.Add(prefix + ".w_hh", {hidden, 4 * hidden},
                    UniformInit(hidden * 4 * hidden, bound, rng));
  std::vector<double> bias(4 * hidden, 0.0);
  std::fill(bias.begin() + hidden, bias.begin() + 2 * hidden, 1.0);  // forget
  b = params.Add(prefix + ".bias", {4 * hidden}, std::move(bias));
}

Tensor Lstm::Forward(const Tensor& x) const {
  return LstmRecurrence(ad::Add(ad::MatMul(x, w_ih), b), w_hh);
}

Blstm::Blstm(ParameterSet& params, const std::string& prefix, std::size_t in,
             std::size_t hidden, std::mt19937_64& rng)
    : forward_dir(params, prefix + ".fw", in, hidden, rng),
      backward_dir(params, prefix + ".bw", in, hidden, rng) {}

Tensor Blstm::Forward(const Tensor& x) const {
  const Tensor fw = forward_dir.Forward(x);
  const Tensor bw = ad::ReverseRows(backward_dir.Forward(ad::ReverseRows(x)));
  return ad::Concat({fw, bw}, 1);
}

// ---------------------------------------------------------------------------

LayerNormLayer::LayerNormLayer(ParameterSet& params, const std::string& prefix,
                               std::size_t d) {
  gamma = params.Add(prefix + ".gamma", {d}, std::vector<double>(d, 1.0));
  beta = params.Add(prefix + ".beta", {d}, std::vector<double>(d, 0.0));
}

Tensor LayerNormLayer::Forward(const Tensor& x) const {
  return ad::LayerNorm(x, gamma, beta);
}

AttentionMask AttentionMask::Causal(std::size_t length) {
  AttentionMask m;
  m.queries = m.keys = length;
  m.blocked.assign(length * length, 0);
  for (std::size_t q = 0; q < length; ++q)
    for (std::size_t k = q + 1; k < length; ++k) m.blocked[q * length + k] = 1;
  return m;
}

MultiHeadAttention::MultiHeadAttention(ParameterSet& params,
                                       const std::string& prefix,
                                       std::size_t d_model, std::size_t n_heads,
                                       std::mt19937_64& rng)
    : q(params, prefix + ".q", d_model, d_model, rng),
      k(params, prefix + ".k", d_model, d_model, rng),
      v(params, prefix + ".v", d_model, d_model, rng),
      out(params, prefix + ".out", d_model, d_model, rng),
      n_heads_(n_heads) {
  if (n_heads == 0 || d_model % n_heads != 0)
    throw InvalidInputError("MultiHeadAttention: d_model must divide by n_heads");
}

Tensor MultiHeadAttention::Forward(const Tensor& query, const Tensor& memory,
                                   const AttentionMask* mask) const {
  const std::size_t d = q.weight.rows();
  if (query.ndim() != 2 || memory.ndim() != 2 || query.cols() != d ||
      memory.cols() != d)
    throw InvalidInputError("MultiHeadAttention: inputs must be [T x " +
                            std::to_string(d) + "]");
  if (mask && (mask->queries != query.rows() || mask->keys != memory.rows()))
    throw InvalidInputError("MultiHeadAttention: mask shape mismatch");
  const std::size_t dh = d / n_heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Tensor qp = q.Forward(query);
  const Tensor kp = k.Forward(memory);
  const Tensor vp = v.Forward(memory);
  std::vector<Tensor> heads;
  heads.reserve(n_heads_);
  for (std::size_t hd = 0; hd < n_heads_; ++hd) {
    const Tensor qh = ad::Slice(qp, 1, hd * dh, (hd + 1) * dh);
    const Tensor kh = ad::Slice(kp, 1, hd * dh, (hd + 1) * dh);
    const Tensor vh = ad::Slice(vp, 1, hd * dh, (hd + 1) * dh);
    Tensor scores = ad::Scale(ad::MatMul(qh, ad::Transpose(kh)), scale);
    if (mask) scores = ad::MaskedFill(scores, mask->blocked, -1e9);
    heads.push_back(ad::MatMul(ad::Softmax(scores), vh));
  }
  return out.Forward(n_heads_ == 1 ? heads[0] : ad::Concat(heads, 1));
}

FeedForward::FeedForward(ParameterSet& params, const std::string& prefix,
                         std::size_t d, std::size_t hidden, double dropout,
                         std::mt19937_64& rng)
    : norm(params, prefix + ".norm", d),
      up(params, prefix + ".up", d, hidden, rng),
      down(params, prefix + ".down", hidden, d, rng),
      dropout_(dropout) {}

Tensor FeedForward::Forward(const Tensor& x, const ForwardContext& ctx) const {
  const Tensor hidden = Dropout(Swish(up.Forward(norm.Forward(x))), dropout_, ctx);
  return Dropout(down.Forward(hidden), dropout_, ctx);
}

ConformerConvModule::ConformerConvModule(ParameterSet& params,
                                         const std::string& prefix,
                                         std::size_t d, std::size_t kernel,
                                         double dropout, std::mt19937_64& rng)
    : norm_in(params, prefix + ".norm_in", d),
      pointwise_in(params, prefix + ".pw_in", d, 2 * d, rng),
      norm_mid(params, prefix + ".norm_mid", d),
      pointwise_out(params, prefix + ".pw_out", d, d, rng),
      dropout_(dropout) {
  if (kernel % 2 == 0)
    throw InvalidInputError("ConformerConvModule: kernel size must be odd");
  depthwise = params.Add(prefix + ".depthwise", {d, kernel},
                         UniformInit(d * kernel,
                                     1.0 / std::sqrt(static_cast<double>(kernel)),
                                     rng));
}

Tensor ConformerConvModule::Forward(const Tensor& x,
                                    const ForwardContext& ctx) const {
  const std::size_t d = x.cols();
  const auto halves = ad::Split(pointwise_in.Forward(norm_in.Forward(x)), {d, d}, 1);
  const Tensor glu = ad::Mul(halves[0], ad::Sigmoid(halves[1]));
  const Tensor conv = ad::DepthwiseConv1d(glu, depthwise);
  const Tensor act = Swish(norm_mid.Forward(conv));
  return Dropout(pointwise_out.Forward(act), dropout_, ctx);
}

Tensor PositionalEncoding(std::size_t length, std::size_t d) {
  if (length == 0 || d == 0)
    throw InvalidInputError("PositionalEncoding: length and d must be > 0");
  std::vector<double> pe(length * d);
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t j = 0; j < d; ++j) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(j - j % 2) / static_cast<double>(d));
      const double angle = static_cast<double>(t) * rate;
      pe[t * d + j] = j % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  return Tensor::Constant({length, d}, std::move(pe));
}

// ---------------------------------------------------------------------------

MetaAcon::MetaAcon(ParameterSet& params, const std::string& prefix,
                   std::size_t channels, std::size_t bottleneck,
                   std::mt19937_64& rng) {
  p1 = params.Add(prefix + ".p1", {channels}, std::vector<double>(channels, 1.0));
  p2 = params.Add(prefix + ".p2", {channels}, std::vector<double>(channels, 0.0));
  const double bound = std::sqrt(6.0 / static_cast<double>(channels + bottleneck));
  w1 = params.Add(prefix + ".w1", {channels, bottleneck},
                  UniformInit(channels * bottleneck, bound, rng));
  w2 = params.Add(prefix + ".w2", {bottleneck, channels},
                  UniformInit(channels * bottleneck, bound, rng));
}

Tensor MetaAcon::SwitchingFactor(const Tensor& x) const {
  const std::size_t c = x.cols();
  const Tensor pooled = ad::Reshape(ad::MeanAxis(x, 0), {1, c});
  return ad::Reshape(ad::Sigmoid(ad::MatMul(ad::MatMul(pooled, w1), w2)), {c});
}

Tensor MetaAcon::Forward(const Tensor& x) const {
  return ForwardWithBeta(x, SwitchingFactor(x));
}

Tensor MetaAcon::ForwardWithBeta(const Tensor& x, const Tensor& beta) const {
  if (x.ndim() != 2 || x.cols() != p1.size() || beta.size() != p1.size())
    throw InvalidInputError("MetaAcon: channel mismatch");
  const std::size_t t = x.rows();
  const Tensor dp = ad::RepeatRows(ad::Sub(p1, p2), t);
  const Tensor dpx = ad::Mul(dp, x);
  const Tensor gate = ad::Sigmoid(ad::Mul(ad::RepeatRows(beta, t), dpx));
  return ad::Add(ad::Mul(dpx, gate), ad::Mul(ad::RepeatRows(p2, t), x));
}

}  // namespace radioasr
