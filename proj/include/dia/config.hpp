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

// Flat experiment configuration: one `key = value` per line, `#` starts a
// comment. Unknown keys and malformed values raise ConfigError before any
// compute happens.
//
//   batch_size, epoch, max_steps, lr, momentum, wd, schedule, gamma, augment,
//   seed, eval_interval, inject_nan_step
//   stages (channels:blocks:stride,...), depth, block, attention,
//   reduction_ratio, cells, output_activation, f_ext, use_bn,
//   skip_removal_fraction, dia_stages, classes, stem_channels
//   dataset, data_path, subset, test_subset, difficulty, image_size
//   analysis_samples, forest_trees, forest_max_depth, forest_min_leaf,
//   forest_feature_fraction, forest_bootstrap
//   out

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dia/backbone.hpp"

namespace dia {

enum class DatasetKind { Synth, Cifar10, Cifar100 };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::Synth;
  std::filesystem::path path;
  std::size_t subset = 2000;
  std::size_t test_subset = 1000;
  double difficulty = 1.0;
  std::size_t image_size = 32;
};

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 180;
  /// Optimizer steps after which training stops; 0 = no cap.
  std::size_t max_steps = 0;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  /// Epochs after which the learning rate is multiplied by gamma.
  std::vector<std::size_t> schedule{60, 120};
  double gamma = 0.1;
  bool augment = true;
  std::uint64_t seed = 0;
  std::size_t eval_interval = 1;
  /// Fault injection: the loss of this (1-based) step is replaced by NaN.
  std::optional<std::size_t> inject_nan_step;

  void validate() const;
  /// Learning rate in effect during a 1-based epoch.
  double lr_at_epoch(std::size_t epoch) const;
};

struct AnalysisOptions {
  std::size_t samples = 512;
  std::size_t trees = 100;
  std::size_t max_depth = 0;
  std::size_t min_leaf = 2;
  double feature_fraction = 1.0 / 3.0;
  bool bootstrap = true;
};

struct ExperimentConfig {
  NetworkConfig network;
  TrainConfig train;
  DatasetSpec dataset;
  AnalysisOptions analysis;
  std::filesystem::path out_dir = "out";

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Canonical text form; parse(to_text()) reproduces the config.
  std::string to_text() const;
  void validate() const;
};

}  // namespace dia
