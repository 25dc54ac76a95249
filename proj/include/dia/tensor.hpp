/*
 * Copyright 2026 The dianet Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dia/errors.hpp"

namespace dia {

/// Extents in (batch, channel, height, width) order for 4-D data.
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Propagates this node's grad into its inputs. Empty for leaves.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Shared handle to a node of the autodiff graph. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_data(Shape shape, std::vector<double> data);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<double> data() { return node_->data; }
  std::span<const double> data() const { return node_->data; }
  double item() const;

  /// Empty span until a backward pass has reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool flag = true);
  bool is_leaf() const { return !node_->backward; }

  /// Reverse-mode sweep from a scalar root. Leaf grads accumulate across calls;
  /// interior grads are reset at the start of every sweep.
  void backward() const;

  /// Value copy with no graph history.
  Tensor detach() const;

  bool all_finite() const;

  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  /// Builds an op result. The graph edge and backward closure are dropped when
  /// grad mode is off or no input requires grad.
  static Tensor make_result(Shape shape, std::vector<double> data,
                            std::vector<Tensor> inputs,
                            std::function<void(detail::Node&)> backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

bool grad_mode_enabled();

/// Disables graph construction on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// A trainable tensor with a model-unique id. The gradient accumulator is the
/// value's grad buffer.
struct Parameter {
  std::string id;
  Tensor value;
  bool weight_decay = true;
};

/// Non-trainable state saved with a model (batch-norm running statistics).
struct Buffer {
  std::string id;
  Tensor value;
};

}  // namespace dia
