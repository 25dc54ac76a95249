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

#include "dia/rng.hpp"
#include "dia/tensor.hpp"

namespace dia::init {

/// N(0, 2/fan_in) where fan_in = product of all extents after the first.
Tensor kaiming_normal(const Shape& shape, Rng rng);

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = product of extents after the first.
Tensor uniform_fan_in(const Shape& shape, Rng rng);

}  // namespace dia::init
