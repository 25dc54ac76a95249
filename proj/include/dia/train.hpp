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

// Training and evaluation loops over an ExperimentConfig.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dia/backbone.hpp"
#include "dia/checkpoint.hpp"
#include "dia/config.hpp"
#include "dia/data.hpp"

namespace dia {

struct RunRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::string split;   // train | test | event
  std::string metric;  // loss | accuracy | batch_accuracy | lr | explosion
  double value = 0.0;

  bool operator==(const RunRow&) const = default;
};

struct ExplosionEvent {
  std::size_t step = 0;
  std::size_t epoch = 0;
  int stage = -1;
  int block = -1;
  /// features | attention | output | logits | loss | gradient
  std::string where;

  std::string describe() const;
};

/// Append-only run log. Wall time is kept beside the rows, not in them, so the
/// CSV is a pure function of (config, seed).
class RunRecord {
 public:
  void add(std::size_t step, std::size_t epoch, std::string split, std::string metric, double value);
  void mark_explosion(const ExplosionEvent& event);

  const std::vector<RunRow>& rows() const { return rows_; }
  const std::optional<ExplosionEvent>& explosion() const { return explosion_; }
  double wall_seconds = 0.0;

  /// Header `step,epoch,split,metric,value`, LF endings, values as %.17g.
  std::string to_csv() const;
  static std::vector<RunRow> parse_csv(const std::string& text);
  void write_csv(const std::filesystem::path& path) const;

  /// Last value logged for (split, metric), if any.
  std::optional<double> last(const std::string& split, const std::string& metric) const;

 private:
  std::vector<RunRow> rows_;
  std::optional<ExplosionEvent> explosion_;
};

struct PreparedData {
  Dataset train;
  Dataset test;
  ChannelStats stats;
};

/// Loads or generates both splits and normalizes them with statistics taken
/// from the training subset, or with `stats` when given.
PreparedData prepare_data(const ExperimentConfig& config,
                          const std::optional<ChannelStats>& stats = std::nullopt);

struct TrainHooks {
  /// Called after each successful optimizer step with that step's forward output.
  std::function<void(std::size_t step, const NetworkOutput&)> on_step;
  /// Capture attention traces during training forwards.
  bool capture = false;
};

struct TrainResult {
  RunRecord record;
  std::unique_ptr<Network> model;
  ChannelStats stats;
  /// Index of the last step run, an exploding step included.
  std::size_t steps = 0;
  bool exploded() const { return record.explosion().has_value(); }
};

TrainResult train(const ExperimentConfig& config, const PreparedData& data, const TrainHooks& hooks = {});

/// Fraction of rows whose argmax (first maximum) equals the label.
double top1_accuracy(std::span<const double> logits, std::size_t classes, std::span<const int> labels);

/// Inference-mode top-1 accuracy of the model on the dataset.
double evaluate(Network& model, const Dataset& data, std::size_t batch_size = 250);

/// Model state plus config text ("meta.config", `out` reset to its default)
/// and normalization statistics ("meta.norm_mean", "meta.norm_std").
Checkpoint build_checkpoint(const Network& model, const ExperimentConfig& config, const ChannelStats& stats);

struct LoadedModel {
  ExperimentConfig config;
  std::unique_ptr<Network> model;
  ChannelStats stats;
};

LoadedModel load_model(const Checkpoint& checkpoint);

}  // namespace dia
