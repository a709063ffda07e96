// Copyright 2026 The wsvad Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a cheap handle to a shared graph node. Every operation that
// touches a tensor requiring gradients records a closure that pushes the
// output gradient back into its inputs. backward() walks the recorded graph
// once in reverse topological order and then releases it, so a graph built
// by one forward pass can be differentiated exactly once.
//
// Graphs are not thread-safe; build and differentiate a graph on one thread.

#ifndef WSVAD_TENSOR_H_
#define WSVAD_TENSOR_H_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wsvad/config.h"

WSVAD_NAMESPACE_BEGIN

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;  // empty until a gradient reaches the node
  bool requires_grad = false;
  bool consumed = false;  // set on interior nodes once backward ran

  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad and accumulates into inputs[i]->grad.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn && inputs.empty(); }
  std::vector<Real>& ensure_grad();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<Real> values,
                            bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }

  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;
  // Extents of a 2-D tensor.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const Real> data() const;
  // Direct write access, meant for initializing leaves and optimizer updates.
  std::span<Real> mutable_data();
  Real item() const;
  Real at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  // Allocates a zero-filled gradient buffer.
  void zero_grad();
  // Drops the gradient buffer entirely.
  void clear_grad();

  // Same values, no graph history, no gradient requirement.
  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Populates .grad of every gradient-requiring tensor reachable from `loss`
// with d(loss)/d(tensor), accumulating into existing buffers. Throws
// ContractError when `loss` is not a single element or when the graph was
// already consumed by an earlier call.
void backward(const Tensor& loss);

// Whether new operations record graph history on this thread.
bool grad_enabled();

// Disables graph recording for its lifetime (evaluation, finite differences).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

namespace detail {

// Builds the result of an operation. The backward closure and the input
// references are only retained when recording is enabled and at least one
// input requires gradients.
Tensor make_result(Shape shape, std::vector<Real> value,
                   std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn);

}  // namespace detail

WSVAD_NAMESPACE_END

#endif  // WSVAD_TENSOR_H_
