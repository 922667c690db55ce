// Copyright (c) 2026 The coughsense Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "coughsense/nn/tensor.hpp"

namespace coughsense::nn {

/// One value in the recorded computation graph.
struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // pushes this->grad into parents

  /// Gradient storage, zero-initialized on first use.
  Tensor& grad_buffer();
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad_buffer(); }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }

  /// Reverse-mode sweep from this scalar. Leaf gradients accumulate; the
  /// recorded graph is released afterwards, so a second call without a new
  /// forward pass throws std::logic_error.
  void backward();

 private:
  std::shared_ptr<Node> node_;
};

/// Whether new ops record graph edges on this thread.
bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Wraps an op result. Edges are recorded only when grad mode is on and a
/// parent requires grad. Throws NumericError on non-finite output.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward_fn,
                const char* op_name);

}  // namespace coughsense::nn
