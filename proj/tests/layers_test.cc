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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "radioasr/error.h"
#include "radioasr/layers.h"

namespace radioasr {
namespace {

using Mat = std::vector<std::vector<double>>;

Mat ToMat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

Tensor RandomTensor(ad::Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1, 1);
  std::vector<double> v(ad::NumElements(s));
  for (auto& x : v) x = d(rng);
  return Tensor::Parameter(s, v);
}

double Sig(double x) { return 1 / (1 + std::exp(-x)); }

// Scalar LSTM over a sequence, gates i, f, g, o.
Mat LstmOracle(const Mat& x, const Mat& w_ih, const Mat& w_hh, const std::vector<double>& b) {
  const std::size_t h = w_hh.size();
  std::vector<double> hs(h, 0), cs(h, 0);
  Mat out;
  for (const auto& xt : x) {
    std::vector<double> a(b);
    for (std::size_t j = 0; j < 4 * h; ++j) {
      for (std::size_t i = 0; i < xt.size(); ++i) a[j] += xt[i] * w_ih[i][j];
      for (std::size_t i = 0; i < h; ++i) a[j] += hs[i] * w_hh[i][j];
    }
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = Sig(a[j]), fg = Sig(a[h + j]), gg = std::tanh(a[2 * h + j]),
                   og = Sig(a[3 * h + j]);
      cs[j] = fg * cs[j] + ig * gg;
      hs[j] = og * std::tanh(cs[j]);
    }
    out.push_back(hs);
  }
  return out;
}

TEST(LstmTest, MatchesScalarOracle) {
  ParameterSet ps;
  std::mt19937_64 rng(3);
  Lstm lstm(ps, "l", 3, 4, rng);
  const Tensor x = RandomTensor({6, 3}, 9);
  const Mat got = ToMat(lstm.Forward(x));
  const Mat want = LstmOracle(ToMat(x), ToMat(lstm.w_ih), ToMat(lstm.w_hh),
                              std::vector<double>(lstm.b.data().begin(), lstm.b.data().end()));
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(got[t][j], want[t][j], 1e-12);
}

TEST(LstmTest, FusedRecurrenceEqualsCellChain) {
  const Tensor proj = RandomTensor({5, 8}, 1);
  const Tensor whh = RandomTensor({2, 8}, 2);
  const Tensor fused = LstmRecurrence(proj, whh);
  Tensor h = Tensor::Zeros({1, 2}), c = Tensor::Zeros({1, 2});
  const Tensor eye = Tensor::Constant({8, 8}, [] {
    std::vector<double> v(64, 0);
    for (int i = 0; i < 8; ++i) v[i * 9] = 1;
    return v;
  }());
  for (std::size_t t = 0; t < 5; ++t) {
    auto [hn, cn] = LstmCell(ad::Slice(proj, 0, t, t + 1), h, c, eye, whh,
                             Tensor::Zeros({8}));
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(fused.at(t, j), hn.at(0, j), 1e-14);
    h = hn;
    c = cn;
  }
}

TEST(LstmTest, ForgetBiasInitialisedToOne) {
  ParameterSet ps;
  std::mt19937_64 rng(1);
  Lstm lstm(ps, "l", 2, 3, rng);
  for (std::size_t j = 0; j < 12; ++j) EXPECT_EQ(lstm.b.at(j), (j >= 3 && j < 6) ? 1.0 : 0.0);
}

TEST(BlstmTest, BackwardDirectionSeesReversedInput) {
  ParameterSet ps;
  std::mt19937_64 rng(4);
  Blstm blstm(ps, "b", 2, 3, rng);
  const Tensor x = RandomTensor({5, 2}, 5);
  const Tensor y = blstm.Forward(x);
  ASSERT_EQ(y.cols(), 6u);
  const Tensor back = ad::ReverseRows(blstm.backward_dir.Forward(ad::ReverseRows(x)));
  const Tensor fwd = blstm.forward_dir.Forward(x);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_DOUBLE_EQ(y.at(t, j), fwd.at(t, j));
      EXPECT_DOUBLE_EQ(y.at(t, 3 + j), back.at(t, j));
    }
  // The last frame of the backward half depends only on the last input.
  Tensor x2 = RandomTensor({5, 2}, 5);
  x2.mutable_data()[0] += 1.0;
  const Tensor y2 = blstm.Forward(x2);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(y2.at(4, 3 + j), y.at(4, 3 + j));
}

// Per-head attention with explicit loops.
Mat AttentionOracle(const MultiHeadAttention& mha, const Mat& q, const Mat& m,
                    const AttentionMask* mask) {
  auto lin = [](const Linear& l, const Mat& x) {
    const Mat w = ToMat(l.weight);
    Mat y(x.size(), std::vector<double>(w[0].size()));
    for (std::size_t t = 0; t < x.size(); ++t)
      for (std::size_t o = 0; o < w[0].size(); ++o) {
        y[t][o] = l.bias.at(o);
        for (std::size_t i = 0; i < w.size(); ++i) y[t][o] += x[t][i] * w[i][o];
      }
    return y;
  };
  const Mat Q = lin(mha.q, q), K = lin(mha.k, m), V = lin(mha.v, m);
  const std::size_t d = Q[0].size(), H = mha.n_heads(), dh = d / H;
  Mat concat(q.size(), std::vector<double>(d, 0));
  for (std::size_t h = 0; h < H; ++h)
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::vector<double> s(m.size());
      double mx = -1e300;
      for (std::size_t j = 0; j < m.size(); ++j) {
        if (mask && mask->blocked[i * m.size() + j]) {
          s[j] = -1e300;
          continue;
        }
        double dot = 0;
        for (std::size_t c = 0; c < dh; ++c) dot += Q[i][h * dh + c] * K[j][h * dh + c];
        s[j] = dot / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (auto& v : s) z += (v = v < -1e299 ? 0 : std::exp(v - mx));
      for (std::size_t j = 0; j < m.size(); ++j)
        for (std::size_t c = 0; c < dh; ++c) concat[i][h * dh + c] += s[j] / z * V[j][h * dh + c];
    }
  return lin(mha.out, concat);
}

TEST(AttentionTest, MatchesLoopOracle) {
  ParameterSet ps;
  std::mt19937_64 rng(8);
  MultiHeadAttention mha(ps, "a", 8, 2, rng);
  const Tensor q = RandomTensor({4, 8}, 1), m = RandomTensor({6, 8}, 2);
  const Mat cross = ToMat(mha.Forward(q, m));
  const Mat want = AttentionOracle(mha, ToMat(q), ToMat(m), nullptr);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(cross[i][c], want[i][c], 1e-12);
  const AttentionMask causal = AttentionMask::Causal(4);
  const Mat self = ToMat(mha.Forward(q, q, &causal));
  const Mat want_self = AttentionOracle(mha, ToMat(q), ToMat(q), &causal);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(self[i][c], want_self[i][c], 1e-12);
}

TEST(AttentionTest, CausalMaskHidesFuture) {
  ParameterSet ps;
  std::mt19937_64 rng(8);
  MultiHeadAttention mha(ps, "a", 4, 2, rng);
  const AttentionMask causal = AttentionMask::Causal(5);
  const Tensor x = RandomTensor({5, 4}, 3);
  Tensor x2 = RandomTensor({5, 4}, 3);
  for (std::size_t c = 0; c < 4; ++c) x2.mutable_data()[4 * 4 + c] += 5.0;  // change the last row
  const Tensor a = mha.Forward(x, x, &causal), b = mha.Forward(x2, x2, &causal);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(a.at(t, c), b.at(t, c));
  EXPECT_NE(a.at(4, 0), b.at(4, 0));
}

TEST(AttentionTest, RejectsIndivisibleHeads) {
  ParameterSet ps;
  std::mt19937_64 rng(1);
  EXPECT_THROW(MultiHeadAttention(ps, "a", 6, 4, rng), InvalidInputError);
}

TEST(ActivationTest, ClosedForms) {
  const Tensor x = Tensor::Parameter({4}, {-2.0, -0.5, 0.5, 3.0});
  const Tensor mish = Mish(x), swish = Swish(x);
  for (std::size_t i = 0; i < 4; ++i) {
    const double v = x.at(i);
    EXPECT_NEAR(mish.at(i), v * std::tanh(std::log1p(std::exp(v))), 1e-14);
    EXPECT_NEAR(swish.at(i), v * Sig(v), 1e-14);
  }
  EXPECT_EQ(ParseActivation("meta-acon"), ActivationKind::kMetaAcon);
  EXPECT_EQ(ActivationName(ParseActivation("mish")), "mish");
  EXPECT_THROW(ParseActivation("gelu"), InvalidInputError);
  EXPECT_THROW(Activation(x, ActivationKind::kMetaAcon), InvalidInputError);
}

TEST(MetaAconTest, MatchesFormula) {
  ParameterSet ps;
  std::mt19937_64 rng(2);
  MetaAcon acon(ps, "m", 3, 2, rng);
  acon.p1.mutable_data()[1] = 1.5;
  acon.p2.mutable_data()[2] = -0.25;
  const Tensor x = RandomTensor({4, 3}, 6);
  const Tensor y = acon.Forward(x);
  const Tensor beta = acon.SwitchingFactor(x);
  std::vector<double> pooled(3, 0);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t c = 0; c < 3; ++c) pooled[c] += x.at(t, c) / 4;
  for (std::size_t c = 0; c < 3; ++c) {
    double z = 0;
    for (std::size_t k = 0; k < 2; ++k) {
      double hidden = 0;
      for (std::size_t i = 0; i < 3; ++i) hidden += pooled[i] * acon.w1.at(i, k);
      z += hidden * acon.w2.at(k, c);
    }
    EXPECT_NEAR(beta.at(c), Sig(z), 1e-14);
    const double p1 = acon.p1.at(c), p2 = acon.p2.at(c);
    for (std::size_t t = 0; t < 4; ++t) {
      const double v = x.at(t, c), dp = (p1 - p2) * v;
      EXPECT_NEAR(y.at(t, c), dp * Sig(beta.at(c) * dp) + p2 * v, 1e-14);
    }
  }
}

TEST(DropoutTest, EvalIsIdentityTrainingScales) {
  const Tensor x = Tensor::Full({100, 10}, 1.0, true);
  EXPECT_EQ(Dropout(x, 0.5, ForwardContext{}).node(), x.node());
  std::mt19937_64 rng(1);
  const Tensor y = Dropout(x, 0.25, ForwardContext{true, &rng});
  std::size_t kept = 0;
  for (double v : y.data()) {
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1 / 0.75) < 1e-15);
    kept += v != 0;
  }
  EXPECT_NEAR(kept / 1000.0, 0.75, 0.05);
  EXPECT_THROW(Dropout(x, 0.25, ForwardContext{true, nullptr}), InvalidStateError);
}

TEST(PositionalEncodingTest, Values) {
  const Tensor pe = PositionalEncoding(5, 6);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t i = 0; i < 3; ++i) {
      const double rate = std::pow(10000.0, -2.0 * i / 6);
      EXPECT_NEAR(pe.at(t, 2 * i), std::sin(t * rate), 1e-14);
      EXPECT_NEAR(pe.at(t, 2 * i + 1), std::cos(t * rate), 1e-14);
    }
}

TEST(ConformerConvTest, RequiresOddKernelAndKeepsShape) {
  ParameterSet rejected, ps;
  std::mt19937_64 rng(1);
  EXPECT_THROW(ConformerConvModule(rejected, "c", 4, 4, 0.0, rng), InvalidInputError);
  ConformerConvModule conv(ps, "c", 4, 5, 0.0, rng);
  const Tensor y = conv.Forward(RandomTensor({7, 4}, 2), ForwardContext{});
  EXPECT_EQ(y.rows(), 7u);
  EXPECT_EQ(y.cols(), 4u);
}

TEST(ParameterSetTest, RegistryAndDuplicates) {
  ParameterSet ps;
  ps.Add("a", {2, 3}, std::vector<double>(6, 0));
  ps.Add("b", {4}, std::vector<double>(4, 0));
  EXPECT_EQ(ps.NumScalars(), 10u);
  EXPECT_NE(ps.Find("a"), nullptr);
  EXPECT_EQ(ps.Find("c"), nullptr);
  EXPECT_THROW(ps.Add("a", {1}, {0}), InvalidInputError);
  EXPECT_THROW(ps.Add("c", {2}, {0}), InvalidInputError);
}

}  // namespace
}  // namespace radioasr
