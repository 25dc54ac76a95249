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
#include <vector>

namespace dia {

/// Hidden states h_t of one stage's attention unit, laid out as
/// (batch, channels, layers-in-stage) with layers fastest.
struct HiddenStateTrace {
  std::size_t stage = 0;
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t layers = 0;
  std::vector<double> values;

  double at(std::size_t b, std::size_t c, std::size_t layer) const {
    return values[(b * channels + c) * layers + layer];
  }
  double& at(std::size_t b, std::size_t c, std::size_t layer) {
    return values[(b * channels + c) * layers + layer];
  }
};

}  // namespace dia
