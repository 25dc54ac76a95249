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

#include "dia/optim.hpp"

namespace dia {

void Sgd::step(std::span<Parameter> params, double lr) {
  for (auto& p : params) {
    auto value = p.value.data();
    auto& v = velocity_[p.id];
    if (v.size() != value.size()) v.assign(value.size(), 0.0);
    const auto grad = p.value.grad();
    const double wd = p.weight_decay ? weight_decay_ : 0.0;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      v[i] = momentum_ * v[i] + g + wd * value[i];
      value[i] -= lr * v[i];
    }
  }
  zero_grad(params);
}

void Sgd::zero_grad(std::span<Parameter> params) const {
  for (auto& p : params) p.value.zero_grad();
}

}  // namespace dia
