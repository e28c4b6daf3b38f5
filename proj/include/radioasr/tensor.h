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

#ifndef RADIOASR_TENSOR_H_
#define RADIOASR_TENSOR_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace radioasr::ad {

using Shape = std::vector<std::size_t>;

std::size_t NumElements(const Shape& shape);
std::string ShapeToString(const Shape& shape);

class Node;
using NodePtr = std::shared_ptr<Node>;
class BackwardContext;

// Propagates the gradient of a node's output into its parents through
// BackwardContext::Grad(). Gradients accumulate; a parent that fans out to
// several consumers receives the sum of their contributions.
using BackwardFn = std::function<void(const Node& self,
                                      std::span<const double> grad_out,
                                      BackwardContext& ctx)>;

// One vertex of the dynamic tape. Leaves have no parents; parameters are
// leaves with requires_grad set. Values are never mutated once an op has
// consumed the node, except leaf parameters between steps (optimizer).
class Node {
 public:
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  BackwardFn backward;
  const char* op = "leaf";
};

// Value-semantics handle over a tape node. Copies share the node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor Constant(Shape shape, std::vector<double> values);
  static Tensor Parameter(Shape shape, std::vector<double> values);
  static Tensor Zeros(Shape shape, bool requires_grad = false);
  static Tensor Full(Shape shape, double value, bool requires_grad = false);
  static Tensor Scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;
  // 2-D conveniences.
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }

  std::span<const double> data() const;
  // Only legal on leaves; used by optimizers and initializers.
  std::span<double> mutable_data();
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const;
  const Node* node() const { return node_.get(); }
  const NodePtr& node_ptr() const { return node_; }

  static Tensor FromNode(NodePtr node);

 private:
  NodePtr node_;
};

// Gradients of one backward pass, keyed by tape node. Parameters are not
// mutated, so independent backward passes over shared parameters may run on
// different threads.
class Gradients {
 public:
  // Gradient w.r.t. t; zeros of t's shape when t was unreachable.
  std::vector<double> Get(const Tensor& t) const;
  // nullptr when t was unreachable.
  const std::vector<double>* Find(const Tensor& t) const;
  bool Contains(const Tensor& t) const { return Find(t) != nullptr; }

 private:
  friend class BackwardContext;
  friend Gradients Backward(const Tensor& loss, double seed);
  std::unordered_map<const Node*, std::vector<double>> grads_;
};

class BackwardContext {
 public:
  // Accumulation buffer for parent `index` of the node being processed.
  // Returns an empty span when that parent does not require grad.
  std::span<double> Grad(const Node& self, std::size_t index);

 private:
  friend Gradients Backward(const Tensor& loss, double seed);
  std::unordered_map<const Node*, std::vector<double>>* buffers_ = nullptr;
};

// Reverse-mode sweep from a scalar. `seed` scales d(loss)/d(loss).
// Throws InvalidStateError when the loss is not on a tape.
Gradients Backward(const Tensor& loss, double seed = 1.0);

// Creates an op result. When no parent requires grad the result is a
// detached constant and `fn` is dropped. Used by all primitives and by
// custom ops elsewhere in the library (STFT, CTC).
Tensor MakeResult(Shape shape, std::vector<double> value,
                  std::vector<Tensor> parents, BackwardFn fn,
                  const char* op_name);

// Debug mode: every op checks its forward value for NaN/Inf and throws
// NumericError. Process-wide.
void SetDebugChecks(bool enabled);
bool DebugChecksEnabled();

// While alive, ops on this thread record no tape: results are constants
// even when inputs require grad. Used for inference.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};
bool GradEnabled();

// ---------------------------------------------------------------------------
// Primitives.

Tensor MatMul(const Tensor& a, const Tensor& b);
// Same shapes, or b is 1-D with b.size() == last dim of a (bias rows).
Tensor Add(const Tensor& a, const Tensor& b);
Tensor Sub(const Tensor& a, const Tensor& b);
Tensor Mul(const Tensor& a, const Tensor& b);
Tensor Div(const Tensor& a, const Tensor& b);
Tensor Scale(const Tensor& a, double c);
Tensor AddScalar(const Tensor& a, double c);
Tensor Neg(const Tensor& a);

Tensor Exp(const Tensor& a);
Tensor Log(const Tensor& a);
Tensor Tanh(const Tensor& a);
Tensor Sigmoid(const Tensor& a);
Tensor Relu(const Tensor& a);
Tensor Softplus(const Tensor& a);
Tensor Power(const Tensor& a, double exponent);
// max(a, lo); subgradient 0 where a < lo.
Tensor ClampMin(const Tensor& a, double lo);

Tensor Concat(const std::vector<Tensor>& parts, std::size_t axis);
std::vector<Tensor> Split(const Tensor& a, const std::vector<std::size_t>& sizes,
                          std::size_t axis);
Tensor Slice(const Tensor& a, std::size_t axis, std::size_t begin,
             std::size_t end);
Tensor Transpose(const Tensor& a);
Tensor Reshape(const Tensor& a, Shape shape);
// Reverses the order of rows of a 2-D tensor.
Tensor ReverseRows(const Tensor& a);

Tensor Sum(const Tensor& a);
Tensor Mean(const Tensor& a);
// 2-D reduction over `axis`; result is 1-D.
Tensor SumAxis(const Tensor& a, std::size_t axis);
Tensor MeanAxis(const Tensor& a, std::size_t axis);
// 1-D [C] -> [rows x C].
Tensor RepeatRows(const Tensor& v, std::size_t rows);

// Row-wise over the last axis of a 1-D or 2-D tensor.
Tensor Softmax(const Tensor& a);
Tensor LogSoftmax(const Tensor& a);

// table [V x d], ids -> [n x d].
Tensor Embedding(const Tensor& table, std::span<const int> ids);
// a [n x V], ids [n] -> [n]; out[i] = a[i, ids[i]].
Tensor Pick(const Tensor& a, std::span<const int> ids);

// x [T x Cin], w [Cout x (K*Cin)] with w[o, k*Cin + c], bias [Cout] (may be
// undefined). Output [T' x Cout], T' = (T + 2*pad - K) / stride + 1.
Tensor Conv1d(const Tensor& x, const Tensor& w, const Tensor& bias,
              std::size_t kernel, std::size_t stride, std::size_t pad);
// x [T x C], w [C x K] with K odd, "same" zero padding. Output [T x C].
Tensor DepthwiseConv1d(const Tensor& x, const Tensor& w);

// Entries where mask != 0 are replaced by `value`; their gradient is zero.
Tensor MaskedFill(const Tensor& a, std::span<const std::uint8_t> mask,
                  double value);

// Row-wise layer normalization of x [T x d] with affine gamma/beta [d].
Tensor LayerNorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps = 1e-5);

// Same forward value; contributes no gradient to ancestors.
Tensor StopGradient(const Tensor& a);

}  // namespace radioasr::ad

#endif  // RADIOASR_TENSOR_H_
