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

#include "radioasr/gradient_suite.h"

#include <random>

#include "radioasr/asr_backend.h"
#include "radioasr/ctc.h"
#include "radioasr/layers.h"
#include "radioasr/se_frontend.h"
#include "radioasr/spectral_ops.h"

namespace radioasr {

namespace {

using ad::GradCheckResult;
using ad::Shape;

struct Case {
  std::string name;
  std::function<Tensor()> loss;
  std::vector<Tensor> inputs;
};

// Uniform in [lo, hi).
Tensor Rand(const Shape& shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(ad::NumElements(shape));
  for (auto& x : v) x = d(rng);
  return Tensor::Parameter(shape, std::move(v));
}

// Magnitudes in [0.1, 1] with random sign: keeps kinks at 0 out of reach of
// the finite-difference stencil.
Tensor RandAwayFromZero(const Shape& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  std::vector<double> v(ad::NumElements(shape));
  for (auto& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
  return Tensor::Parameter(shape, std::move(v));
}

std::vector<Tensor> Params(const ParameterSet& ps) {
  std::vector<Tensor> out;
  for (const auto& [_, t] : ps.items()) out.push_back(t);
  return out;
}

std::vector<Tensor> Join(std::vector<Tensor> a, const std::vector<Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::string Tag(const std::string& name, std::size_t variant) {
  return name + "#" + std::to_string(variant);
}

// Shared parameter stores must outlive the closures that reference them.
struct Holder {
  std::vector<std::shared_ptr<void>> keep;
  template <typename T>
  std::shared_ptr<T> Make(T value) {
    auto p = std::make_shared<T>(std::move(value));
    keep.push_back(p);
    return p;
  }
};

void PrimitiveCases(std::vector<Case>& cases, Holder& hold) {
  using namespace ad;
  const std::vector<std::pair<std::size_t, std::size_t>> dims = {{2, 3}, {4, 5}, {1, 7}};
  for (std::size_t v = 0; v < dims.size(); ++v) {
    std::mt19937_64 rng(100 + v);
    const auto [r, c] = dims[v];
    const std::uint64_t ps = 7 + v;
    auto unary = [&](const std::string& name, std::function<Tensor(const Tensor&)> f,
                     Tensor x) {
      cases.push_back({Tag(name, v), [f, x, ps] { return RandomProjection(f(x), ps); }, {x}});
    };
    auto binary = [&](const std::string& name,
                      std::function<Tensor(const Tensor&, const Tensor&)> f, Tensor a, Tensor b) {
      cases.push_back({Tag(name, v), [f, a, b, ps] { return RandomProjection(f(a, b), ps); },
                       {a, b}});
    };
    const Shape s{r, c};
    binary("matmul", MatMul, Rand(s, rng), Rand({c, r + 1}, rng));
    binary("add", Add, Rand(s, rng), Rand(s, rng));
    binary("add_bias", Add, Rand(s, rng), Rand({c}, rng));
    binary("sub", Sub, Rand(s, rng), Rand(s, rng));
    binary("mul", Mul, Rand(s, rng), Rand(s, rng));
    binary("div", Div, Rand(s, rng), Rand(s, rng, 0.5, 1.5));
    unary("scale", [](const Tensor& x) { return Scale(x, -1.7); }, Rand(s, rng));
    unary("add_scalar", [](const Tensor& x) { return AddScalar(x, 0.3); }, Rand(s, rng));
    unary("neg", Neg, Rand(s, rng));
    unary("exp", Exp, Rand(s, rng));
    unary("log", Log, Rand(s, rng, 0.2, 2.0));
    unary("tanh", Tanh, Rand(s, rng));
    unary("sigmoid", Sigmoid, Rand(s, rng));
    unary("relu", Relu, RandAwayFromZero(s, rng));
    unary("softplus", Softplus, Rand(s, rng, -3, 3));
    unary("power", [](const Tensor& x) { return Power(x, 1.5); }, Rand(s, rng, 0.2, 2.0));
    unary("power_int", [](const Tensor& x) { return Power(x, 3.0); }, RandAwayFromZero(s, rng));
    unary("clamp_min", [](const Tensor& x) { return ClampMin(x, 0.0); }, RandAwayFromZero(s, rng));
    binary("concat_rows", [](const Tensor& a, const Tensor& b) { return Concat({a, b}, 0); },
           Rand(s, rng), Rand({r + 1, c}, rng));
    binary("concat_cols", [](const Tensor& a, const Tensor& b) { return Concat({a, b}, 1); },
           Rand(s, rng), Rand({r, 2}, rng));
    unary("split", [c](const Tensor& x) {
      auto parts = Split(x, {1, c}, 1);
      return Concat({Scale(parts[0], 2.0), parts[1]}, 1);
    }, Rand({r, c + 1}, rng));
    unary("slice", [](const Tensor& x) { return Slice(x, 0, 1, x.rows()); },
          Rand({r + 1, c}, rng));
    unary("slice_cols", [c](const Tensor& x) { return Slice(x, 1, 1, c); }, Rand(s, rng));
    unary("transpose", Transpose, Rand(s, rng));
    unary("reshape", [r, c](const Tensor& x) { return Reshape(x, {c, r}); }, Rand(s, rng));
    unary("reverse_rows", ReverseRows, Rand(s, rng));
    unary("sum", Sum, Rand(s, rng));
    unary("mean", Mean, Rand(s, rng));
    unary("sum_axis0", [](const Tensor& x) { return SumAxis(x, 0); }, Rand(s, rng));
    unary("sum_axis1", [](const Tensor& x) { return SumAxis(x, 1); }, Rand(s, rng));
    unary("mean_axis0", [](const Tensor& x) { return MeanAxis(x, 0); }, Rand(s, rng));
    unary("mean_axis1", [](const Tensor& x) { return MeanAxis(x, 1); }, Rand(s, rng));
    unary("repeat_rows", [r](const Tensor& x) { return RepeatRows(x, r + 1); }, Rand({c}, rng));
    unary("softmax", Softmax, Rand(s, rng, -2, 2));
    unary("log_softmax", LogSoftmax, Rand(s, rng, -2, 2));
    unary("softmax_1d", Softmax, Rand({c}, rng, -2, 2));
    {
      auto ids = hold.Make(std::vector<int>{});
      for (std::size_t i = 0; i < r + 2; ++i) ids->push_back(static_cast<int>((i * 3 + v) % (r + 1)));
      unary("embedding", [ids](const Tensor& t) { return Embedding(t, *ids); },
            Rand({r + 1, c}, rng));
    }
    {
      auto ids = hold.Make(std::vector<int>{});
      for (std::size_t i = 0; i < r; ++i) ids->push_back(static_cast<int>((i * 2 + v) % c));
      unary("pick", [ids](const Tensor& t) { return Pick(LogSoftmax(t), *ids); }, Rand(s, rng));
    }
    {
      auto mask = hold.Make(std::vector<std::uint8_t>(r * c, 0));
      for (std::size_t i = 0; i < r * c; ++i) (*mask)[i] = (i % 3 == 1) && (i % c != 0);
      unary("masked_fill", [mask](const Tensor& t) { return Softmax(MaskedFill(t, *mask, -1e9)); },
            Rand(s, rng));
    }
    {
      Tensor x = Rand({r, c + 1}, rng), g = Rand({c + 1}, rng), b = Rand({c + 1}, rng);
      cases.push_back({Tag("layer_norm_op", v),
                       [x, g, b, ps] { return RandomProjection(LayerNorm(x, g, b), ps); },
                       {x, g, b}});
    }
  }

  struct ConvShape {
    std::size_t t, cin, cout, k, stride, pad;
  };
  const ConvShape convs[] = {{5, 2, 3, 3, 1, 1}, {8, 3, 2, 3, 2, 1}, {7, 1, 4, 5, 2, 2}};
  for (std::size_t v = 0; v < 3; ++v) {
    std::mt19937_64 rng(200 + v);
    const ConvShape cs = convs[v];
    Tensor x = Rand({cs.t, cs.cin}, rng);
    Tensor w = Rand({cs.cout, cs.k * cs.cin}, rng);
    Tensor b = Rand({cs.cout}, rng);
    cases.push_back({Tag("conv1d", v),
                     [=] { return RandomProjection(Conv1d(x, w, b, cs.k, cs.stride, cs.pad), 11); },
                     {x, w, b}});
    Tensor xd = Rand({cs.t, cs.cout}, rng);
    Tensor wd = Rand({cs.cout, cs.k}, rng);
    cases.push_back({Tag("depthwise_conv1d", v),
                     [=] { return RandomProjection(DepthwiseConv1d(xd, wd), 12); }, {xd, wd}});
  }
}

void SpectralCases(std::vector<Case>& cases) {
  const StftParams stfts[] = {{16, 4}, {32, 8}, {24, 6}};
  const std::size_t lengths[] = {40, 77, 96};
  for (std::size_t v = 0; v < 3; ++v) {
    std::mt19937_64 rng(300 + v);
    const StftParams p = stfts[v];
    const std::size_t frames = p.NumFrames(lengths[v]);
    Tensor wave = Rand({lengths[v]}, rng);
    cases.push_back({Tag("stft", v), [=] { return ad::RandomProjection(ad::Stft(wave, p), 21); },
                     {wave}});
    Tensor packed = Rand({frames, 2 * p.bins()}, rng);
    cases.push_back({Tag("istft", v),
                     [=] { return ad::RandomProjection(ad::Istft(packed, p), 22); }, {packed}});
    Tensor packed2 = Rand({frames, 2 * p.bins()}, rng);
    cases.push_back({Tag("power_spectrum", v),
                     [=] { return ad::RandomProjection(ad::PowerSpectrum(packed2), 23); },
                     {packed2}});
    Tensor packed3 = Rand({frames, 2 * p.bins()}, rng);
    Tensor mask = Rand({frames, p.bins()}, rng, 0, 2);
    cases.push_back({Tag("mask_spectrogram", v),
                     [=] { return ad::RandomProjection(ad::MaskSpectrogram(packed3, mask), 24); },
                     {packed3, mask}});
    const std::size_t mels = 3 + v;
    const Matrix fb = MelFilterbank(p.n_fft, mels, kDefaultSampleRate);
    Tensor power = Rand({frames, p.bins()}, rng, 0.1, 2.0);
    cases.push_back({Tag("log_mel", v),
                     [=] { return ad::RandomProjection(ad::LogMel(power, fb), 25); }, {power}});
    MvnStats stats;
    stats.mean = Eigen::VectorXd::Random(static_cast<Eigen::Index>(mels));
    stats.std = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(mels), 0.7);
    Tensor feats = Rand({frames, mels}, rng);
    cases.push_back({Tag("apply_mvn", v),
                     [=] { return ad::RandomProjection(ad::ApplyMvn(feats, stats), 26); },
                     {feats}});
    // Composite used by the preserve path: ISTFT -> STFT -> power.
    Tensor packed4 = Rand({frames, 2 * p.bins()}, rng);
    cases.push_back({Tag("istft_stft_power", v),
                     [=] {
                       return ad::RandomProjection(
                           ad::PowerSpectrum(ad::Stft(ad::Istft(packed4, p), p)), 27);
                     },
                     {packed4}});
  }
}

void LayerCases(std::vector<Case>& cases, Holder& hold) {
  const std::size_t T[] = {3, 5, 4};
  const std::size_t D[] = {4, 6, 8};
  for (std::size_t v = 0; v < 3; ++v) {
    std::mt19937_64 rng(400 + v);
    const std::size_t t = T[v], d = D[v], h = 3 + v;
    auto ps = hold.Make(ParameterSet());
    const std::string pre = "v" + std::to_string(v) + ".";
    const ForwardContext eval_ctx;

    Tensor x = Rand({t, d}, rng);
    cases.push_back({Tag("mish", v), [=] { return ad::RandomProjection(Mish(x), 31); }, {x}});
    cases.push_back({Tag("swish", v), [=] { return ad::RandomProjection(Swish(x), 32); }, {x}});

    auto lin = hold.Make(Linear(*ps, pre + "lin", d, h, rng));
    cases.push_back({Tag("linear", v), [=] { return ad::RandomProjection(lin->Forward(x), 33); },
                     {x, lin->weight, lin->bias}});

    Tensor xt = Rand({1, d}, rng), h0 = Rand({1, h}, rng), c0 = Rand({1, h}, rng);
    Tensor wih = Rand({d, 4 * h}, rng, -0.5, 0.5), whh = Rand({h, 4 * h}, rng, -0.5, 0.5);
    Tensor b = Rand({4 * h}, rng);
    cases.push_back({Tag("lstm_cell", v),
                     [=] {
                       auto [hn, cn] = LstmCell(xt, h0, c0, wih, whh, b);
                       return ad::Add(ad::RandomProjection(hn, 34), ad::RandomProjection(cn, 35));
                     },
                     {xt, h0, c0, wih, whh, b}});
    Tensor proj = Rand({t, 4 * h}, rng);
    Tensor whh2 = Rand({h, 4 * h}, rng, -0.5, 0.5);
    cases.push_back({Tag("lstm_recurrence", v),
                     [=] { return ad::RandomProjection(LstmRecurrence(proj, whh2), 36); },
                     {proj, whh2}});

    auto lstm_ps = hold.Make(ParameterSet());
    auto lstm = hold.Make(Lstm(*lstm_ps, "lstm", d, h, rng));
    cases.push_back({Tag("lstm", v), [=] { return ad::RandomProjection(lstm->Forward(x), 37); },
                     Join({x}, Params(*lstm_ps))});
    auto blstm_ps = hold.Make(ParameterSet());
    auto blstm = hold.Make(Blstm(*blstm_ps, "blstm", d, h, rng));
    cases.push_back({Tag("blstm", v),
                     [=] { return ad::RandomProjection(blstm->Forward(x), 38); },
                     Join({x}, Params(*blstm_ps))});

    auto ln_ps = hold.Make(ParameterSet());
    auto ln = hold.Make(LayerNormLayer(*ln_ps, "ln", d));
    {
      // Move the affine parameters off their 1/0 init.
      std::mt19937_64 r2(450 + v);
      for (auto& t2 : Params(*ln_ps)) {
        Tensor handle = t2;
        for (auto& e : handle.mutable_data()) e += std::uniform_real_distribution<double>(-0.5, 0.5)(r2);
      }
    }
    cases.push_back({Tag("layer_norm", v),
                     [=] { return ad::RandomProjection(ln->Forward(x), 39); },
                     Join({x}, Params(*ln_ps))});

    const std::size_t heads = v == 1 ? 3 : 2;
    auto att_ps = hold.Make(ParameterSet());
    auto mha = hold.Make(MultiHeadAttention(*att_ps, "mha", d, heads, rng));
    Tensor mem = Rand({t + 2, d}, rng);
    cases.push_back({Tag("mhsa_self", v),
                     [=] { return ad::RandomProjection(mha->Forward(x, x), 40); },
                     Join({x}, Params(*att_ps))});
    auto causal = hold.Make(AttentionMask::Causal(t));
    cases.push_back({Tag("mhsa_causal", v),
                     [=] { return ad::RandomProjection(mha->Forward(x, x, causal.get()), 41); },
                     Join({x}, Params(*att_ps))});
    cases.push_back({Tag("mha_cross", v),
                     [=] { return ad::RandomProjection(mha->Forward(x, mem), 42); },
                     Join({x, mem}, Params(*att_ps))});

    auto ff_ps = hold.Make(ParameterSet());
    auto ff = hold.Make(FeedForward(*ff_ps, "ff", d, 2 * d, 0.0, rng));
    cases.push_back({Tag("feed_forward", v),
                     [=] { return ad::RandomProjection(ff->Forward(x, eval_ctx), 43); },
                     Join({x}, Params(*ff_ps))});

    auto conv_ps = hold.Make(ParameterSet());
    auto conv = hold.Make(ConformerConvModule(*conv_ps, "conv", d, 3 + 2 * (v % 2), 0.0, rng));
    cases.push_back({Tag("conformer_conv", v),
                     [=] { return ad::RandomProjection(conv->Forward(x, eval_ctx), 44); },
                     Join({x}, Params(*conv_ps))});

    auto acon_ps = hold.Make(ParameterSet());
    auto acon = hold.Make(MetaAcon(*acon_ps, "acon", d, 2 + v, rng));
    {
      std::mt19937_64 r2(470 + v);
      for (auto& t2 : Params(*acon_ps)) {
        Tensor handle = t2;
        for (auto& e : handle.mutable_data()) e += std::uniform_real_distribution<double>(-0.3, 0.3)(r2);
      }
    }
    cases.push_back({Tag("meta_acon", v),
                     [=] { return ad::RandomProjection(acon->Forward(x), 45); },
                     Join({x}, Params(*acon_ps))});
  }
}

void SeChainCases(std::vector<Case>& cases, Holder& hold) {
  const StftParams stfts[] = {{16, 4}, {32, 8}, {24, 6}};
  const std::size_t lengths[] = {48, 80, 112};
  const ActivationKind acts[] = {ActivationKind::kRelu, ActivationKind::kMish,
                                 ActivationKind::kMetaAcon};
  for (std::size_t v = 0; v < 3; ++v) {
    for (PhaseMode mode : {PhaseMode::kDiscard, PhaseMode::kPreserve}) {
      std::mt19937_64 rng(500 + v);
      FeatureConfig fc;
      fc.stft = stfts[v];
      fc.n_mels = 4 + v;
      SeConfig sc;
      sc.n_blstm_layers = 1 + (v == 2);
      sc.hidden_units = 3;
      sc.mask_activation = acts[v];
      sc.phase_mode = mode;
      sc.dropout = 0;
      sc.acon_bottleneck = 2;
      auto ps = hold.Make(ParameterSet());
      auto net = hold.Make(SeNetwork(*ps, sc, fc, rng, "se"));
      Waveform noisy, clean;
      std::normal_distribution<double> g(0, 0.3);
      for (std::size_t i = 0; i < lengths[v]; ++i) {
        clean.samples.push_back(std::sin(0.3 * i) * 0.4);
        noisy.samples.push_back(clean.samples.back() + g(rng));
      }
      const Tensor clean_mag = MagnitudeTensor(clean, fc.stft);
      const std::string name = std::string("se_chain_") + PhaseModeName(mode);
      cases.push_back({Tag(name, v),
                       [=] {
                         const EnhancedTape tape = EnhanceOnTape(*net, noisy, mode, ForwardContext{});
                         return ad::Add(SeLoss(tape.masked_mag, clean_mag),
                                        ad::RandomProjection(tape.features, 51));
                       },
                       Params(*ps)});
      // Features as a function of the mask alone.
      const Tensor spec = ad::PackSpectrogram(Stft(noisy, fc.stft));
      Tensor mask = Rand({spec.rows(), fc.stft.bins()}, rng, 0.2, 1.5);
      const Matrix fb = net->filterbank();
      cases.push_back({Tag("features_from_mask_" + PhaseModeName(mode), v),
                       [=] {
                         return ad::RandomProjection(
                             FeaturesFromMask(spec, mask, mode, fc.stft, fb).features, 52);
                       },
                       {mask}});
    }
  }
}

void CtcCases(std::vector<Case>& cases, Holder& hold) {
  struct CtcShape {
    std::size_t t, vocab;
    std::vector<int> target;
  };
  const CtcShape shapes[] = {{4, 3, {1, 2}}, {6, 4, {1, 1, 3}}, {5, 3, {2}}};
  for (std::size_t v = 0; v < 3; ++v) {
    std::mt19937_64 rng(600 + v);
    Tensor logits = Rand({shapes[v].t, shapes[v].vocab}, rng, -2, 2);
    auto target = hold.Make(shapes[v].target);
    cases.push_back({Tag("ctc", v),
                     [=] { return CtcLoss(ad::LogSoftmax(logits), *target); }, {logits}});
  }
}

void AsrCases(std::vector<Case>& cases, Holder& hold) {
  const std::size_t frames[] = {12, 16, 21};
  const std::vector<int> targets[] = {{3, 4}, {5, 3, 5}, {4, 4}};
  for (std::size_t v = 0; v < 3; ++v) {
    std::mt19937_64 rng(700 + v);
    AsrConfig cfg;
    cfg.n_encoder_layers = 1;
    cfg.n_decoder_layers = 1;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.ff_multiplier = 2;
    cfg.conv_kernel = 3;
    cfg.input_dim = 5;
    cfg.dropout = 0;
    cfg.vocab_size = 6;
    auto ps = hold.Make(ParameterSet());
    auto model = hold.Make(AsrModel(*ps, cfg, rng, "asr"));
    Tensor feats = Rand({frames[v], cfg.input_dim}, rng);
    TokenSequence target;
    target.tokens = targets[v];
    const ForwardContext ctx;
    cases.push_back({Tag("attention_loss", v),
                     [=] { return model->AttLoss(model->Encode(feats, ctx), target, ctx); },
                     Join({feats}, Params(*ps))});
    cases.push_back({Tag("asr_ctc_loss", v),
                     [=] { return model->CtcLoss(model->Encode(feats, ctx), target); },
                     Join({feats}, Params(*ps))});
    cases.push_back({Tag("asr_hybrid_loss", v),
                     [=] {
                       return model->AsrLoss(model->Encode(feats, ctx), target, 0.3, ctx).total;
                     },
                     Join({feats}, Params(*ps))});
  }
}

}  // namespace

std::vector<GradCheckResult> RunGradientSuite(
    const GradientSuiteOptions& options,
    const std::function<void(const GradCheckResult&)>& on_result) {
  Holder hold;
  std::vector<Case> cases;
  PrimitiveCases(cases, hold);
  SpectralCases(cases);
  LayerCases(cases, hold);
  SeChainCases(cases, hold);
  CtcCases(cases, hold);
  AsrCases(cases, hold);

  std::vector<GradCheckResult> results;
  for (const auto& c : cases) {
    if (!options.filter.empty() && c.name.find(options.filter) == std::string::npos) continue;
    GradCheckResult r = ad::CheckGradients(c.name, c.loss, c.inputs, options.check);
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace radioasr
