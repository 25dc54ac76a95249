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

#include "dia/analysis.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dia/errors.hpp"

namespace dia {

HiddenStateTrace capture_traces(Network& model, const Dataset& sample, std::size_t stage, std::size_t batch_size) {
  const auto& cfg = model.config();
  if (stage >= model.num_stages()) {
    throw ConfigError("stage " + std::to_string(stage) + " out of range (model has " +
                      std::to_string(model.num_stages()) + " stages)");
  }
  const bool recurrent = cfg.attention == AttentionKind::DiaLstm || cfg.attention == AttentionKind::StandardLstm;
  if (!recurrent || !cfg.attention_in_stage(stage)) {
    throw ConfigError("stage " + std::to_string(stage) + " has no recurrent attention unit to trace");
  }
  if (sample.size() == 0) throw ConfigError("trace sample is empty");

  NoGradGuard guard;
  ForwardOptions fo;
  fo.capture = true;
  HiddenStateTrace out;
  for (std::size_t start = 0; start < sample.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, sample.size() - start);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), start);
    auto res = model.forward(sample.gather_images(idx), fo);
    if (res.explosion) throw std::domain_error("non-finite activations while capturing traces");
    const auto it = std::find_if(res.traces.begin(), res.traces.end(),
                                 [&](const HiddenStateTrace& t) { return t.stage == stage; });
    if (it == res.traces.end()) throw ConfigError("no trace captured for stage " + std::to_string(stage));
    if (out.values.empty()) {
      out = *it;
    } else {
      out.values.insert(out.values.end(), it->values.begin(), it->values.end());
      out.batch += it->batch;
    }
  }
  return out;
}

ForestOptions forest_options(const AnalysisOptions& options, std::uint64_t seed) {
  ForestOptions fo;
  fo.trees = options.trees;
  fo.max_depth = options.max_depth;
  fo.min_leaf = options.min_leaf;
  fo.feature_fraction = options.feature_fraction;
  fo.bootstrap = options.bootstrap;
  fo.seed = seed;
  return fo;
}

IntegrationMatrix integration_matrix(const HiddenStateTrace& trace, const AnalysisOptions& options,
                                     std::uint64_t seed, std::span<const std::uint64_t> layer_ids) {
  const std::size_t b = trace.batch, c = trace.channels, f = trace.layers;
  if (f < 2) throw ConfigError("integration matrix needs at least 2 layers in the stage");
  if (trace.values.size() != b * c * f) throw ShapeError("trace values do not match (batch, channels, layers)");
  std::vector<std::uint64_t> ids(layer_ids.begin(), layer_ids.end());
  if (ids.empty()) {
    ids.resize(f);
    std::iota(ids.begin(), ids.end(), 0);
  }
  if (ids.size() != f) throw ShapeError("one layer id per trace layer required");

  IntegrationMatrix m;
  m.stage = trace.stage;
  m.layers = f;
  const Rng root(seed);
  for (std::size_t j = 1; j < f; ++j) {  // 0-based target layer
    Matrix x(b, j * c), y(b, c);
    std::vector<std::uint64_t> keys(j * c);
    for (std::size_t n = 0; n < j; ++n) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        keys[n * c + ch] = ids[n] * c + ch;
        for (std::size_t s = 0; s < b; ++s) x.at(s, n * c + ch) = trace.at(s, ch, n);
      }
    }
    for (std::size_t s = 0; s < b; ++s)
      for (std::size_t ch = 0; ch < c; ++ch) y.at(s, ch) = trace.at(s, ch, j);

    const auto forest = RegressionForest::fit(x, y, forest_options(options, root.split(ids[j]).next_u64()), keys);
    std::vector<double> res(j, 0.0);
    for (std::size_t n = 0; n < j; ++n)
      for (std::size_t ch = 0; ch < c; ++ch) res[n] += forest.importances()[n * c + ch];
    const double top = *std::max_element(res.begin(), res.end());
    const bool degenerate = forest.degenerate() || !(top > 0.0);
    for (auto& v : res) v = degenerate ? 0.0 : v / top;
    m.rows.push_back(std::move(res));
    m.degenerate.push_back(degenerate);
  }
  return m;
}

std::string heatmap_csv(const IntegrationMatrix& matrix) {
  std::string out = "target_layer,source_layer,score\n";
  char buf[64];
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    for (std::size_t n = 0; n < matrix.rows[r].size(); ++n) {
      std::snprintf(buf, sizeof buf, "%.17g", matrix.rows[r][n]);
      out += std::to_string(r + 2) + "," + std::to_string(n + 1) + "," + buf + "\n";
    }
  }
  return out;
}

IntegrationMatrix parse_heatmap_csv(const std::string& text, std::size_t stage) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "target_layer,source_layer,score") {
    throw IoError("heatmap CSV: missing header");
  }
  IntegrationMatrix m;
  m.stage = stage;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t t = 0, s = 0;
    double v = 0.0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%zu,%zu,%lf%c", &t, &s, &v, &tail) != 3) {
      throw IoError("heatmap CSV: malformed row '" + line + "'");
    }
    // Rows must arrive as (2,1), (3,1), (3,2), (4,1), ...
    const bool next_row = s == 1 && t == m.rows.size() + 2;
    const bool same_row = !m.rows.empty() && t == m.rows.size() + 1 && s == m.rows.back().size() + 1 && s < t;
    if (!next_row && !same_row) throw IoError("heatmap CSV: rows out of order at '" + line + "'");
    if (next_row) m.rows.emplace_back();
    m.rows.back().push_back(v);
  }
  m.layers = m.rows.size() + 1;
  m.degenerate.resize(m.rows.size());
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    m.degenerate[r] = std::all_of(m.rows[r].begin(), m.rows[r].end(), [](double v) { return v == 0.0; });
  }
  return m;
}

void emit_heatmap_csv(const IntegrationMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << heatmap_csv(matrix);
  if (!out) throw IoError("write failed for " + path.string());
}

void add_trace(Checkpoint& container, const HiddenStateTrace& trace) {
  container.add_values("trace.stage" + std::to_string(trace.stage), {trace.batch, trace.channels, trace.layers},
                       trace.values);
}

HiddenStateTrace read_trace(const Checkpoint& container, std::size_t stage) {
  const auto& e = container.at("trace.stage" + std::to_string(stage));
  if (e.shape.size() != 3) throw IoError("trace entry must have rank 3");
  HiddenStateTrace t;
  t.stage = stage;
  t.batch = e.shape[0];
  t.channels = e.shape[1];
  t.layers = e.shape[2];
  t.values = e.values;
  return t;
}

}  // namespace dia
