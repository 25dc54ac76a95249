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

#include "dia/init.hpp"

#include <cmath>

namespace dia::init {

namespace {
double fan_in(const Shape& shape) {
  double f = 1.0;
  for (std::size_t i = 1; i < shape.size(); ++i) f *= static_cast<double>(shape[i]);
  return f;
}
}  // namespace

Tensor kaiming_normal(const Shape& shape, Rng rng) {
  Tensor t = Tensor::zeros(shape);
  const double sd = std::sqrt(2.0 / fan_in(shape));
  for (auto& v : t.data()) v = sd * rng.normal();
  return t;
}

Tensor uniform_fan_in(const Shape& shape, Rng rng) {
  Tensor t = Tensor::zeros(shape);
  const double bound = 1.0 / std::sqrt(fan_in(shape));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace dia::init
