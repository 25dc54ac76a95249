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

#include "dia/tensor.hpp"

#include <cmath>
#include <sstream>
#include <unordered_set>

namespace dia {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  auto node = std::make_shared<detail::Node>();
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_to_string(shape));
  }
  node->data.assign(shape_numel(shape), value);
  node->shape = std::move(shape);
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + shape_to_string(shape));
  }
  if (data.size() != shape_numel(shape)) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_to_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

double Tensor::item() const {
  if (numel() != 1) throw UsageError("item() on tensor of shape " + shape_to_string(shape()));
  return node_->data[0];
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor& Tensor::set_requires_grad(bool flag) {
  node_->requires_grad = flag;
  return *this;
}

Tensor Tensor::detach() const { return from_data(shape(), node_->data); }

bool Tensor::all_finite() const {
  for (double v : node_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw UsageError("backward() needs a scalar root, got shape " + shape_to_string(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Each sweep starts from zero everywhere; leaves get this sweep's gradient
  // added to what they held before, so repeated sweeps accumulate exactly.
  std::vector<std::pair<detail::Node*, std::vector<double>>> held;
  for (auto* n : order) {
    if (!n->backward && !n->grad.empty()) held.emplace_back(n, std::move(n->grad));
    n->grad.assign(n->data.size(), 0.0);
  }
  node_->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
  for (auto& [n, prev] : held) {
    for (std::size_t i = 0; i < prev.size(); ++i) n->grad[i] += prev[i];
  }
}

Tensor Tensor::make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                           std::function<void(detail::Node&)> backward) {
  Tensor out = from_data(std::move(shape), std::move(data));
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto& node = out.node();
  node.requires_grad = true;
  node.backward = std::move(backward);
  node.inputs.reserve(inputs.size());
  for (auto& in : inputs) node.inputs.push_back(in.node_ptr());
  return out;
}

bool grad_mode_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace dia
