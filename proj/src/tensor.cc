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

#include "radioasr/tensor.h"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

#include "radioasr/error.h"

namespace radioasr::ad {
namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::atomic<bool> g_debug_checks{false};
thread_local int g_no_grad_depth = 0;

void Require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidInputError(msg);
}

void Require2d(const Tensor& t, const char* op) {
  Require(t.defined() && t.ndim() == 2,
          std::string(op) + ": expected a 2-D tensor, got " +
              (t.defined() ? ShapeToString(t.shape()) : "undefined"));
}

const std::vector<double>& ParentValue(const Node& self, std::size_t i) {
  return self.parents[i]->value;
}

double StableSigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double StableSoftplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Elementwise op with derivative expressed through input x and output y.
template <class F, class D>
Tensor Unary(const Tensor& a, F f, D deriv, const char* name) {
  std::vector<double> out(a.size());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return MakeResult(
      a.shape(), std::move(out), {a},
      [deriv](const Node& self, std::span<const double> g,
              BackwardContext& ctx) {
        auto ga = ctx.Grad(self, 0);
        if (ga.empty()) return;
        const auto& x = ParentValue(self, 0);
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] += g[i] * deriv(x[i], self.value[i]);
      },
      name);
}

bool IsBias(const Tensor& a, const Tensor& b) {
  return b.ndim() == 1 && a.ndim() >= 2 && b.size() == a.shape().back();
}

// View of an N-D shape as [outer, axis_len, inner].
struct AxisView {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisView ViewAround(const Shape& shape, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace

std::size_t NumElements(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string ShapeToString(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void SetDebugChecks(bool enabled) { g_debug_checks = enabled; }
bool DebugChecksEnabled() { return g_debug_checks; }

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool GradEnabled() { return g_no_grad_depth == 0; }

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::FromNode(NodePtr node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

Tensor Tensor::Constant(Shape shape, std::vector<double> values) {
  if (NumElements(shape) != values.size())
    throw InvalidInputError("Tensor: shape " + ShapeToString(shape) +
                            " does not match " +
                            std::to_string(values.size()) + " values");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return FromNode(std::move(node));
}

Tensor Tensor::Parameter(Shape shape, std::vector<double> values) {
  Tensor t = Constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::Zeros(Shape shape, bool requires_grad) {
  return Full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::Full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = NumElements(shape);
  Tensor t = Constant(std::move(shape), std::vector<double>(n, value));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::Scalar(double value) { return Constant({}, {value}); }

const Shape& Tensor::shape() const {
  if (!node_) throw InvalidStateError("Tensor: undefined");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size())
    throw InvalidInputError("Tensor: axis " + std::to_string(axis) +
                            " out of range for " + ShapeToString(s));
  return s[axis];
}

std::size_t Tensor::size() const { return NumElements(shape()); }

std::span<const double> Tensor::data() const {
  if (!node_) throw InvalidStateError("Tensor: undefined");
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw InvalidStateError("Tensor: undefined");
  if (!node_->parents.empty())
    throw InvalidStateError("Tensor: only leaves may be mutated");
  return node_->value;
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return data()[r * cols() + c];
}

double Tensor::item() const {
  if (size() != 1)
    throw InvalidInputError("Tensor::item on shape " + ShapeToString(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const {
  return node_ != nullptr && node_->requires_grad;
}

// ---------------------------------------------------------------------------
// Tape

std::vector<double> Gradients::Get(const Tensor& t) const {
  if (const auto* g = Find(t)) return *g;
  return std::vector<double>(t.size(), 0.0);
}

const std::vector<double>* Gradients::Find(const Tensor& t) const {
  auto it = grads_.find(t.node());
  return it == grads_.end() ? nullptr : &it->second;
}

std::span<double> BackwardContext::Grad(const Node& self, std::size_t index) {
  const Node* parent = self.parents.at(index).get();
  if (!parent->requires_grad) return {};
  auto& buf = (*buffers_)[parent];
  if (buf.empty()) buf.assign(parent->value.size(), 0.0);
  return buf;
}

Gradients Backward(const Tensor& loss, double seed) {
  if (!loss.defined() || !loss.requires_grad())
    throw InvalidStateError(
        "Backward: loss is detached (no input requires grad)");
  if (loss.size() != 1)
    throw InvalidInputError("Backward: loss must be scalar, got " +
                            ShapeToString(loss.shape()));

  // Post-order DFS gives a topological order (parents before children).
  std::vector<const Node*> order;
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<const Node*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  Gradients result;
  auto& buffers = result.grads_;
  buffers[loss.node()] = {seed};
  BackwardContext ctx;
  ctx.buffers_ = &buffers;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node* node = *it;
    auto found = buffers.find(node);
    if (found == buffers.end()) continue;
    if (node->parents.empty()) continue;  // leaf: keep its gradient
    if (node->backward) node->backward(*node, found->second, ctx);
    buffers.erase(node);
  }
  return result;
}

Tensor MakeResult(Shape shape, std::vector<double> value,
                  std::vector<Tensor> parents, BackwardFn fn,
                  const char* op_name) {
  if (NumElements(shape) != value.size())
    throw InternalError(std::string(op_name) + ": result size mismatch");
  if (g_debug_checks) {
    for (double v : value)
      if (!std::isfinite(v))
        throw NumericError(std::string(op_name) + ": non-finite forward value");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op_name;
  bool any = false;
  if (g_no_grad_depth == 0)
    for (const auto& p : parents) any = any || p.requires_grad();
  if (any) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node_ptr());
    node->backward = std::move(fn);
  }
  return Tensor::FromNode(std::move(node));
}

// ---------------------------------------------------------------------------
// Linear algebra and arithmetic

Tensor MatMul(const Tensor& a, const Tensor& b) {
  Require2d(a, "matmul");
  Require2d(b, "matmul");
  Require(a.cols() == b.rows(), "matmul: inner dims differ: " +
                                    ShapeToString(a.shape()) + " * " +
                                    ShapeToString(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() =
      ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  return MakeResult(
      {m, n}, std::move(out), {a, b},
      [m, k, n](const Node& self, std::span<const double> g,
                BackwardContext& ctx) {
        ConstMap gm(g.data(), m, n);
        if (auto ga = ctx.Grad(self, 0); !ga.empty())
          MutMap(ga.data(), m, k).noalias() +=
              gm * ConstMap(ParentValue(self, 1).data(), k, n).transpose();
        if (auto gb = ctx.Grad(self, 1); !gb.empty())
          MutMap(gb.data(), k, n).noalias() +=
              ConstMap(ParentValue(self, 0).data(), m, k).transpose() * gm;
      },
      "matmul");
}

namespace {

Tensor AddSub(const Tensor& a, const Tensor& b, double sign, const char* name) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.size());
    const auto x = a.data(), y = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + sign * y[i];
    return MakeResult(
        a.shape(), std::move(out), {a, b},
        [sign](const Node& self, std::span<const double> g,
               BackwardContext& ctx) {
          if (auto ga = ctx.Grad(self, 0); !ga.empty())
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
          if (auto gb = ctx.Grad(self, 1); !gb.empty())
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
        },
        name);
  }
  Require(IsBias(a, b), std::string(name) + ": shapes " +
                            ShapeToString(a.shape()) + " and " +
                            ShapeToString(b.shape()) + " are incompatible");
  const std::size_t width = b.size();
  std::vector<double> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = x[i] + sign * y[i % width];
  return MakeResult(
      a.shape(), std::move(out), {a, b},
      [sign, width](const Node& self, std::span<const double> g,
                    BackwardContext& ctx) {
        if (auto ga = ctx.Grad(self, 0); !ga.empty())
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        if (auto gb = ctx.Grad(self, 1); !gb.empty())
          for (std::size_t i = 0; i < g.size(); ++i)
            gb[i % width] += sign * g[i];
      },
      name);
}

void RequireSameShape(const Tensor& a, const Tensor& b, const char* name) {
  Require(a.shape() == b.shape(), std::string(name) + ": shapes " +
                                      ShapeToString(a.shape()) + " and " +
                                      ShapeToString(b.shape()) + " differ");
}

}  // namespace

Tensor Add(const Tensor& a, const Tensor& b) { return AddSub(a, b, 1.0, "add"); }
Tensor Sub(const Tensor& a, const Tensor& b) { return AddSub(a, b, -1.0, "sub"); }

Tensor Mul(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "mul");
  std::vector<double> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return MakeResult(
      a.shape(), std::move(out), {a, b},
      [](const Node& self, std::span<const double> g, BackwardContext& ctx) {
        const auto& x = ParentValue(self, 0);
        const auto& y = ParentValue(self, 1);
        if (auto ga = ctx.Grad(self, 0); !ga.empty())
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
        if (auto gb = ctx.Grad(self, 1); !gb.empty())
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
      },
      "mul");
}

Tensor Div(const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "div");
  std::vector<double> out(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] / y[i];
  return MakeResult(
      a.shape(), std::move(out), {a, b},
      [](const Node& self, std::span<const double> g, BackwardContext& ctx) {
        const auto& y = ParentValue(self, 1);
        if (auto ga = ctx.Grad(self, 0); !ga.empty())
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / y[i];
        if (auto gb = ctx.Grad(self, 1); !gb.empty())
          for (std::size_t i = 0; i < g.size(); ++i)
            gb[i] -= g[i] * self.value[i] / y[i];
      },
      "div");
}

Tensor Scale(const Tensor& a, double c) {
  return Unary(
      a, [c](double x) { return c * x; },
      [c](double, double) { return c; }, "scale");
}

Tensor AddScalar(const Tensor& a, double c) {
  return Unary(
      a, [c](double x) { return x + c; },
      [](double, double) { return 1.0; }, "add_scalar");
}

Tensor Neg(const Tensor& a) { return Scale(a, -1.0); }

Tensor Exp(const Tensor& a) {
  return Unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; }, "exp");
}

Tensor Log(const Tensor& a) {
  return Unary(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; }, "log");
}

Tensor Tanh(const Tensor& a) {
  return Unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; }, "tanh");
}

Tensor Sigmoid(const Tensor& a) {
  return Unary(
      a, StableSigmoid, [](double, double y) { return y * (1.0 - y); },
      "sigmoid");
}

Tensor Relu(const Tensor& a) {
  return Unary(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; }, "relu");
}

Tensor Softplus(const Tensor& a) {
  return Unary(
      a, StableSoftplus, [](double x, double) { return StableSigmoid(x); },
      "softplus");
}

Tensor Power(const Tensor& a, double exponent) {
  return Unary(
      a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x, double) {
        return exponent * std::pow(x, exponent - 1.0);
      },
      "power");
}

Tensor ClampMin(const Tensor& a, double lo) {
  return Unary(
      a, [lo](double x) { return x > lo ? x : lo; },
      [lo](double x, double) { return x > lo ? 1.0 : 0.0; }, "clamp_min");
}

// ---------------------------------------------------------------------------
// Structural ops

Tensor Concat(const std::vector<Tensor>& parts, std::size_t axis) {
  Require(!parts.empty(), "concat: no inputs");
  const Shape& ref = parts[0].shape();
  Require(axis < ref.size(), "concat: axis out of range");
  Shape out_shape = ref;
  out_shape[axis] = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      ok = i == axis || s[i] == ref[i];
    Require(ok, "concat: incompatible shapes " + ShapeToString(ref) + " and " +
                    ShapeToString(s));
    lens.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisView v = ViewAround(out_shape, axis);
  std::vector<double> out(NumElements(out_shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto src = parts[p].data();
    for (std::size_t o = 0; o < v.outer; ++o)
      std::copy_n(src.begin() + o * lens[p] * v.inner, lens[p] * v.inner,
                  out.begin() + (o * v.len + offset) * v.inner);
    offset += lens[p];
  }
  return MakeResult(
      out_shape, std::move(out), parts,
      [v, lens](const Node& self, std::span<const double> g,
                BackwardContext& ctx) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < lens.size(); ++p) {
          if (auto gp = ctx.Grad(self, p); !gp.empty()) {
            for (std::size_t o = 0; o < v.outer; ++o) {
              const double* src = g.data() + (o * v.len + offset) * v.inner;
              double* dst = gp.data() + o * lens[p] * v.inner;
              for (std::size_t i = 0; i < lens[p] * v.inner; ++i)
                dst[i] += src[i];
            }
          }
          offset += lens[p];
        }
      },
      "concat");
}

Tensor Slice(const Tensor& a, std::size_t axis, std::size_t begin,
             std::size_t end) {
  const Shape& s = a.shape();
  Require(axis < s.size() && begin <= end && end <= s[axis],
          "slice: range [" + std::to_string(begin) + ", " +
              std::to_string(end) + ") invalid for " + ShapeToString(s));
  const AxisView v = ViewAround(s, axis);
  const std::size_t len = end - begin;
  Shape out_shape = s;
  out_shape[axis] = len;
  std::vector<double> out(NumElements(out_shape));
  const auto src = a.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(src.begin() + (o * v.len + begin) * v.inner, len * v.inner,
                out.begin() + o * len * v.inner);
  return MakeResult(
      out_shape, std::move(out), {a},
      [v, begin, len](const Node& self, std::span<const double> g,
                      BackwardContext& ctx) {
        auto ga = ctx.Grad(self, 0);
        if (ga.empty()) return;
        for (std::size_t o = 0; o < v.outer; ++o) {
          const double* src = g.data() + o * len * v.inner;
          double* dst = ga.data() + (o * v.len + begin) * v.inner;
          for (std::size_t i = 0; i < len * v.inner; ++i) dst[i] += src[i];
        }
      },
      "slice");
}

std::vector<Tensor> Split(const Tensor& a, const std::vector<std::size_t>& sizes,
                          std::size_t axis) {
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  Require(axis < a.ndim() && total == a.dim(axis),
          "split: sizes do not cover axis of " + ShapeToString(a.shape()));
  std::vector<Tensor> parts;
  std::size_t begin = 0;
  for (auto s : sizes) {
    parts.push_back(Slice(a, axis, begin, begin + s));
    begin += s;
  }
  return parts;
}

Tensor Transpose(const Tensor& a) {
  Require2d(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  MutMap(out.data(), n, m) = ConstMap(a.data().data(), m, n).transpose();
  return MakeResult(
      {n, m}, std::move(out), {a},
      [m, n](const Node& self, std::span<const double> g,
             BackwardContext& ctx) {
        if (auto ga = ctx.Grad(self, 0); !ga.empty())
          MutMap(ga.data(), m, n) += ConstMap(g.data(), n, m).transpose();
      },
      "transpose");
}

Tensor Reshape(const Tensor& a, Shape shape) {
  Require(NumElements(shape) == a.size(), "reshape: " +
                                              ShapeToString(a.shape()) +
                                              " -> " + ShapeToString(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return MakeResult(
      std::move(shape), std::move(out), {a},
      [](const Node& self, std::span<const double> g, BackwardContext& ctx) {
        if (auto ga = ctx.Grad(self, 0); !ga.empty())
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      },
      "reshape");
}

Tensor ReverseRows(const Tensor& a) {
  Require2d(a, "reverse_rows");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  const auto src = a.data();
  for (std::size_t r = 0; r < m; ++r)
    std::copy_n(src.begin() + (m - 1 - r) * n, n, out.begin() + r * n);
  return MakeResult(
      a.shape(), std::move(out), {a},
      [m, n](const Node& self, std::span<const double> g,
             BackwardContext& ctx) {
        auto ga = ctx.Grad(self, 0);
        if (ga.empty()) return;
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < n; ++c)
            ga[(m - 1 - r) * n + c] += g[r * n + c];
      },
      "reverse_rows");
}

// ---------------------------------------------------------------------------
// Reductions

Tensor Sum(const Tensor& a) {
  double s = 0;
  for (double x : a.data()) s += x;
  return MakeResult(
      {}, {s}, {a},
      [](const Node& self, std::span<const double> g, BackwardContext& ctx) {
        if (auto ga = ctx.Grad(self, 0); !ga.empty())
          for (auto& x : ga) x += g[0];
      },
      "sum");
}

Tensor Mean(const Tensor& a) {
  Require(a.size() > 0, "mean: empty tensor");
  return Scale(Sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor SumAxis(const Tensor& a, std::size_t axis) {
  Require2d(a, "sum_axis");
  Require(axis < 2, "sum_axis: axis must be 0 or 1");
  const std::size_t m = a.rows(), n = a.cols();
  const auto x = a.data();
  std::vector<double> out(axis == 0 ? n : m, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c)
      out[axis == 0 ? c : r] += x[r * n + c];
  const std::size_t len = out.size();
  return MakeResult(
      {len}, std::move(out), {a},
      [m, n, axis](const Node& self, std::span<const double> g,
                   BackwardContext& ctx) {
        auto ga = ctx.Grad(self, 0);
        if (ga.empty()) return;
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < n; ++c)
            ga[r * n + c] += g[axis == 0 ? c : r];
      },
      "sum_axis");
}

Tensor MeanAxis(const Tensor& a, std::size_t axis) {
  Require2d(a, "mean_axis");
  const std::size_t count = a.dim(axis);
  Require(count > 0, "mean_axis: empty axis");
  return Scale(SumAxis(a, axis), 1.0 / static_cast<double>(count));
}

Tensor RepeatRows(const Tensor& v, std::size_t rows) {
  Require(v.ndim() == 1, "repeat_rows: expected 1-D input");
  const std::size_t n = v.size();
  std::vector<double> out(rows * n);
  const auto x = v.data();
  for (std::size_t r = 0; r < rows; ++r)
    std::copy(x.begin(), x.end(), out.begin() + r * n);
  return MakeResult(
      {rows, n}, std::move(out), {v},
      [rows, n](const Node& self, std::span<const double> g,
                BackwardContext& ctx) {
        auto gv = ctx.Grad(self, 0);
        if (gv.empty()) return;
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < n; ++c) gv[c] += g[r * n + c];
      },
      "repeat_rows");
}

// ---------------------------------------------------------------------------
// Softmax family

namespace {

std::pair<std::size_t, std::size_t> RowsCols(const Tensor& a, const char* op) {
  Require(a.ndim() == 1 || a.ndim() == 2,
          std::string(op) + ": expected 1-D or 2-D input");
  if (a.ndim() == 1) return {1, a.size()};
  return {a.rows(), a.cols()};
}

}  // namespace

Tensor Softmax(const Tensor& a) {
  const auto [m, n] = RowsCols(a, "softmax");
  const auto x = a.data();
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data() + r * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0;
    for (std::size_t c = 0; c < n; ++c) z += out[r * n + c] = std::exp(row[c] - mx);
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] /= z;
  }
  return MakeResult(
      a.shape(), std::move(out), {a},
      [m, n](const Node& self, std::span<const double> g,
             BackwardContext& ctx) {
        auto ga = ctx.Grad(self, 0);
        if (ga.empty()) return;
        const auto& y = self.value;
        for (std::size_t r = 0; r < m; ++r) {
          double dot = 0;
          for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * y[r * n + c];
          for (std::size_t c = 0; c < n; ++c)
            ga[r * n + c] += y[r * n + c] * (g[r * n + c] - dot);
        }
      },
      "softmax");
}

Tensor LogSoftmax(const Tensor& a) {
  const auto [m, n] = RowsCols(a, "log_softmax");
  const auto x = a.data();
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = x.data() + r * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0;
    for (std::size_t c = 0; c < n; ++c) z += std::exp(row[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = row[c] - lse;
  }
  return MakeResult(
      a.shape(), std::move(out), {a},
      [m, n](const Node& self, std::span<const double> g,
             BackwardContext& ctx) {
        auto ga = ctx.Grad(self, 0);
        if (ga.empty()) return;
        const auto& y = self.value;
        for (std::size_t r = 0; r < m; ++r) {
          double gsum = 0;
          for (std::size_t c = 0; c < n; ++c) gsum += g[r * n + c];
          for (std::size_t c = 0; c < n; ++c)
            ga[r * n + c] += g[r * n + c] - std::exp(y[r * n + c]) * gsum;
        }
      },
      "log_softmax");
}

// ---------------------------------------------------------------------------
// Indexing

Tensor Embedding(const Tensor& table, std::span<const int> ids) {
  Require2d(table, "embedding");
  const std::size_t vocab = table.rows(), d = table.cols();
  std::vector<int> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size() * d);
  const auto w = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    Require(idx[i] >= 0 && static_cast<std::size_t>(idx[i]) < vocab,
            "embedding: id " + std::to_string(idx[i]) + " out of range");
    std::copy_n(w.begin() + idx[i] * d, d, out.begin() + i * d);
  }
  const std::size_t n = idx.size();
  return MakeResult(
      {n, d}, std::move(out), {table},
      [idx = std::move(idx), d](const Node& self, std::span<const double> g,
                                BackwardContext& ctx) {
        auto gw = ctx.Grad(self, 0);
        if (gw.empty()) return;
        for (std::size_t i = 0; i < idx.size(); ++i)
          for (std::size_t c = 0; c < d; ++c) gw[idx[i] * d + c] += g[i * d + c];
      },
      "embedding");
}

Tensor Pick(const Tensor& a, std::span<const int> ids) {
  Require2d(a, "pick");
  Require(ids.size() == a.rows(), "pick: need one id per row");
  const std::size_t n = a.cols();
  std::vector<int> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    Require(idx[i] >= 0 && static_cast<std::size_t>(idx[i]) < n,
            "pick: id " + std::to_string(idx[i]) + " out of range");
    out[i] = a.data()[i * n + idx[i]];
  }
  const std::size_t m = idx.size();
  return MakeResult(
      {m}, std::move(out), {a},
      [idx = std::move(idx), n](const Node& self, std::span<const double> g,
                                BackwardContext& ctx) {
        auto ga = ctx.Grad(self, 0);
        if (ga.empty()) return;
        for (std::size_t i = 0; i < idx.size(); ++i) ga[i * n + idx[i]] += g[i];
      },
      "pick");
}

// ---------------------------------------------------------------------------
// Convolutions

Tensor Conv1d(const Tensor& x, const Tensor& w, const Tensor& bias,
              std::size_t kernel, std::size_t stride, std::size_t pad) {
  Require2d(x, "conv1d");
  Require2d(w, "conv1d");
  Require(kernel > 0 && stride > 0, "conv1d: kernel and stride must be > 0");
  const std::size_t t_in = x.rows(), c_in = x.cols(), c_out = w.rows();
  Require(w.cols() == kernel * c_in, "conv1d: weight shape " +
                                         ShapeToString(w.shape()) +
                                         " does not match kernel*Cin");
  Require(t_in + 2 * pad >= kernel, "conv1d: input shorter than kernel");
  const bool has_bias = bias.defined();
  if (has_bias)
    Require(bias.ndim() == 1 && bias.size() == c_out, "conv1d: bias shape");
  const std::size_t t_out = (t_in + 2 * pad - kernel) / stride + 1;
  const std::size_t width = kernel * c_in;

  // im2col: cols[t, k*Cin + c] = x[t*stride + k - pad, c]
  auto im2col = [=](std::span<const double> src) {
    std::vector<double> cols(t_out * width, 0.0);
    for (std::size_t t = 0; t < t_out; ++t)
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::ptrdiff_t src_t = static_cast<std::ptrdiff_t>(t * stride + k) -
                                     static_cast<std::ptrdiff_t>(pad);
        if (src_t < 0 || src_t >= static_cast<std::ptrdiff_t>(t_in)) continue;
        std::copy_n(src.begin() + src_t * c_in, c_in,
                    cols.begin() + t * width + k * c_in);
      }
    return cols;
  };

  const auto cols = im2col(x.data());
  std::vector<double> out(t_out * c_out);
  MutMap(out.data(), t_out, c_out).noalias() =
      ConstMap(cols.data(), t_out, width) *
      ConstMap(w.data().data(), c_out, width).transpose();
  if (has_bias) {
    const auto b = bias.data();
    for (std::size_t t = 0; t < t_out; ++t)
      for (std::size_t o = 0; o < c_out; ++o) out[t * c_out + o] += b[o];
  }
  std::vector<Tensor> parents{x, w};
  if (has_bias) parents.push_back(bias);
  return MakeResult(
      {t_out, c_out}, std::move(out), std::move(parents),
      [=](const Node& self, std::span<const double> g, BackwardContext& ctx) {
        ConstMap gm(g.data(), t_out, c_out);
        if (auto gw = ctx.Grad(self, 1); !gw.empty()) {
          const auto cols = im2col(ParentValue(self, 0));
          MutMap(gw.data(), c_out, width).noalias() +=
              gm.transpose() * ConstMap(cols.data(), t_out, width);
        }
        if (has_bias) {
          if (auto gb = ctx.Grad(self, 2); !gb.empty())
            for (std::size_t t = 0; t < t_out; ++t)
              for (std::size_t o = 0; o < c_out; ++o) gb[o] += g[t * c_out + o];
        }
        if (auto gx = ctx.Grad(self, 0); !gx.empty()) {
          RowMat gcols = gm * ConstMap(ParentValue(self, 1).data(), c_out, width);
          for (std::size_t t = 0; t < t_out; ++t)
            for (std::size_t k = 0; k < kernel; ++k) {
              const std::ptrdiff_t src_t =
                  static_cast<std::ptrdiff_t>(t * stride + k) -
                  static_cast<std::ptrdiff_t>(pad);
              if (src_t < 0 || src_t >= static_cast<std::ptrdiff_t>(t_in))
                continue;
              for (std::size_t c = 0; c < c_in; ++c)
                gx[src_t * c_in + c] += gcols(t, k * c_in + c);
            }
        }
      },
      "conv1d");
}

Tensor DepthwiseConv1d(const Tensor& x, const Tensor& w) {
  Require2d(x, "depthwise_conv1d");
  Require2d(w, "depthwise_conv1d");
  const std::size_t t_len = x.rows(), ch = x.cols(), kernel = w.cols();
  Require(w.rows() == ch, "depthwise_conv1d: weight rows must equal channels");
  Require(kernel % 2 == 1, "depthwise_conv1d: kernel size must be odd");
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kernel / 2);
  const auto xv = x.data(), wv = w.data();
  std::vector<double> out(t_len * ch, 0.0);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t k = 0; k < kernel; ++k) {
      const std::ptrdiff_t src =
          static_cast<std::ptrdiff_t>(t + k) - half;
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_len)) continue;
      for (std::size_t c = 0; c < ch; ++c)
        out[t * ch + c] += wv[c * kernel + k] * xv[src * ch + c];
    }
  return MakeResult(
      {t_len, ch}, std::move(out), {x, w},
      [=](const Node& self, std::span<const double> g, BackwardContext& ctx) {
        auto gx = ctx.Grad(self, 0);
        auto gw = ctx.Grad(self, 1);
        const auto& xv = ParentValue(self, 0);
        const auto& wv = ParentValue(self, 1);
        for (std::size_t t = 0; t < t_len; ++t)
          for (std::size_t k = 0; k < kernel; ++k) {
            const std::ptrdiff_t src =
                static_cast<std::ptrdiff_t>(t + k) - half;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_len)) continue;
            for (std::size_t c = 0; c < ch; ++c) {
              const double go = g[t * ch + c];
              if (!gx.empty()) gx[src * ch + c] += wv[c * kernel + k] * go;
              if (!gw.empty()) gw[c * kernel + k] += xv[src * ch + c] * go;
            }
          }
      },
      "depthwise_conv1d");
}

// ---------------------------------------------------------------------------
// Misc

Tensor MaskedFill(const Tensor& a, std::span<const std::uint8_t> mask,
                  double value) {
  Require(mask.size() == a.size(), "masked_fill: mask size mismatch");
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (m[i]) out[i] = value;
  return MakeResult(
      a.shape(), std::move(out), {a},
      [m = std::move(m)](const Node& self, std::span<const double> g,
                         BackwardContext& ctx) {
        auto ga = ctx.Grad(self, 0);
        if (ga.empty()) return;
        for (std::size_t i = 0; i < g.size(); ++i)
          if (!m[i]) ga[i] += g[i];
      },
      "masked_fill");
}

Tensor LayerNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps) {
  Require2d(x, "layer_norm");
  const std::size_t m = x.rows(), d = x.cols();
  Require(gamma.ndim() == 1 && gamma.size() == d && beta.ndim() == 1 &&
              beta.size() == d,
          "layer_norm: gamma/beta must be 1-D of size " + std::to_string(d));
  const auto xv = x.data(), gv = gamma.data(), bv = beta.data();
  std::vector<double> out(m * d);
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0;
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<double>(d);
    double var = 0;
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c)
      out[r * d + c] = gv[c] * (row[c] - mu) * inv + bv[c];
  }
  return MakeResult(
      {m, d}, std::move(out), {x, gamma, beta},
      [m, d, eps](const Node& self, std::span<const double> g,
                  BackwardContext& ctx) {
        const auto& xv = ParentValue(self, 0);
        const auto& gv = ParentValue(self, 1);
        auto gx = ctx.Grad(self, 0);
        auto gg = ctx.Grad(self, 1);
        auto gb = ctx.Grad(self, 2);
        std::vector<double> xhat(d), dxhat(d);
        for (std::size_t r = 0; r < m; ++r) {
          const double* row = xv.data() + r * d;
          const double* grow = g.data() + r * d;
          double mu = 0;
          for (std::size_t c = 0; c < d; ++c) mu += row[c];
          mu /= static_cast<double>(d);
          double var = 0;
          for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
          var /= static_cast<double>(d);
          const double inv = 1.0 / std::sqrt(var + eps);
          double mean_dx = 0, mean_dx_xhat = 0;
          for (std::size_t c = 0; c < d; ++c) {
            xhat[c] = (row[c] - mu) * inv;
            dxhat[c] = grow[c] * gv[c];
            mean_dx += dxhat[c];
            mean_dx_xhat += dxhat[c] * xhat[c];
            if (!gg.empty()) gg[c] += grow[c] * xhat[c];
            if (!gb.empty()) gb[c] += grow[c];
          }
          mean_dx /= static_cast<double>(d);
          mean_dx_xhat /= static_cast<double>(d);
          if (!gx.empty())
            for (std::size_t c = 0; c < d; ++c)
              gx[r * d + c] +=
                  inv * (dxhat[c] - mean_dx - xhat[c] * mean_dx_xhat);
        }
      },
      "layer_norm");
}

Tensor StopGradient(const Tensor& a) {
  return Tensor::Constant(a.shape(),
                          std::vector<double>(a.data().begin(), a.data().end()));
}

}  // namespace radioasr::ad
