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

// Feature-integration analysis of a stage's attention hidden states.
//
// For every target layer j = 2..f_z the hidden states h_1..h_{j-1} (flattened
// layer-major into (j-1)*c_z columns) are regressed on h_j with a random
// forest. Importances are summed over each source layer's c_z columns and the
// row is divided by its maximum. Layer 1 has no predecessors and gets no row.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dia/backbone.hpp"
#include "dia/checkpoint.hpp"
#include "dia/config.hpp"
#include "dia/data.hpp"
#include "dia/forest.hpp"
#include "dia/trace.hpp"

namespace dia {

/// Inference-mode forwards over `sample`, stacking h_t of every block of the
/// stage. Throws ConfigError when the stage has no recurrent attention unit.
HiddenStateTrace capture_traces(Network& model, const Dataset& sample, std::size_t stage,
                                std::size_t batch_size = 250);

struct IntegrationMatrix {
  std::size_t stage = 0;
  std::size_t layers = 0;  // f_z
  /// rows[j-2][n-1] = score of source layer n for target layer j.
  std::vector<std::vector<double>> rows;
  /// Rows whose importances were all zero (no split, or a zero maximum).
  std::vector<bool> degenerate;

  /// 1-based layers, n < j.
  double score(std::size_t target, std::size_t source) const { return rows.at(target - 2).at(source - 1); }
  bool operator==(const IntegrationMatrix&) const = default;
};

ForestOptions forest_options(const AnalysisOptions& options, std::uint64_t seed);

/// `layer_ids` names each trace layer (default 0..f_z-1). Forest seeds and
/// feature keys derive from these ids, so reordering the layers of a trace
/// together with their ids reorders the result the same way.
IntegrationMatrix integration_matrix(const HiddenStateTrace& trace, const AnalysisOptions& options,
                                     std::uint64_t seed, std::span<const std::uint64_t> layer_ids = {});

/// Header `target_layer,source_layer,score`, rows ordered by target then
/// source, 1-based layers, scores as %.17g.
std::string heatmap_csv(const IntegrationMatrix& matrix);
IntegrationMatrix parse_heatmap_csv(const std::string& text, std::size_t stage = 0);
void emit_heatmap_csv(const IntegrationMatrix& matrix, const std::filesystem::path& path);

/// Trace dump in the checkpoint container: "trace.stage<S>" with shape
/// (batch, channels, layers).
void add_trace(Checkpoint& container, const HiddenStateTrace& trace);
HiddenStateTrace read_trace(const Checkpoint& container, std::size_t stage);

}  // namespace dia
