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

// Central finite-difference checks of reverse-mode gradients, in float64.
//
// Relative error of one case: max|a - n| / max(max|a|, max|n|, 1e-12) over all
// checked entries, a being the analytic and n the numeric gradient.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dia/tensor.hpp"

namespace dia {

enum class GradScope { Ops, Cell, Block, Network };

/// "ops" | "cell" | "block" | "network"; throws ConfigError otherwise.
GradScope parse_grad_scope(const std::string& name);
std::string to_string(GradScope scope);

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t entries = 0;
  bool passed() const { return max_rel_error < tolerance; }
};

struct GradCheckReport {
  GradScope scope = GradScope::Ops;
  std::vector<GradCheckResult> results;
  bool passed() const;
  double max_rel_error() const;
};

struct GradCheckOptions {
  double step = 1e-5;
  /// Checked entries per tensor; 0 = all. Sampled entries are seeded.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t seed = 0;
  /// Fault injection: added to the first analytic gradient entry of every case.
  double corrupt = 0.0;
};

/// Checks d loss / d t for every tensor in `wrt`. `loss` must rebuild the graph
/// from the current tensor values on each call.
GradCheckResult check_gradients(const std::string& name, const std::function<Tensor()>& loss,
                                const std::vector<Tensor>& wrt, double tolerance,
                                const GradCheckOptions& options = {});

/// Built-in suites. Tolerances: 1e-6 for ops, cell and block, 1e-4 for the network.
GradCheckReport run_gradcheck(GradScope scope, std::uint64_t seed = 0, double corrupt = 0.0);

}  // namespace dia
