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

#include <map>
#include <span>
#include <string>
#include <vector>

#include "dia/tensor.hpp"

namespace dia {

/// SGD with heavy-ball momentum and L2 weight decay folded into the velocity:
///   v <- momentum * v + grad + wd * param;  param <- param - lr * v.
/// Gradients are zeroed after every step.
class Sgd {
 public:
  Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(std::span<Parameter> params, double lr);
  void zero_grad(std::span<Parameter> params) const;

  const std::map<std::string, std::vector<double>>& velocity() const { return velocity_; }

 private:
  double momentum_;
  double weight_decay_;
  std::map<std::string, std::vector<double>> velocity_;
};

}  // namespace dia
