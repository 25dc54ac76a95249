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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dia/rng.hpp"
#include "dia/tensor.hpp"

namespace dia {

struct Dataset {
  Tensor images;  // [M,C,H,W]
  std::vector<int> labels;
  std::size_t classes = 0;

  std::size_t size() const { return labels.size(); }
  /// Copies of the listed samples as one batch.
  Tensor gather_images(std::span<const std::size_t> indices) const;
  std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
  /// First n samples.
  Dataset head(std::size_t n) const;
};

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Per-channel mean and population standard deviation over all samples and pixels.
ChannelStats compute_channel_stats(const Dataset& data);
/// (x - mean) / stddev per channel; a zero stddev is treated as 1.
void normalize_in_place(Dataset& data, const ChannelStats& stats);

// ---------------------------------------------------------------------------
// CIFAR binary layout: CIFAR-10 records are 3073 bytes (label, 3x1024 pixels
// row-major per channel); CIFAR-100 records are 3074 bytes (coarse label, fine
// label, pixels). The fine label is the class.

enum class CifarVariant { C10, C100 };

struct CifarRecords {
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> coarse_labels;  // CIFAR-100 only
  std::vector<std::uint8_t> pixels;         // 3072 bytes per record

  std::size_t size() const { return labels.size(); }
  bool operator==(const CifarRecords&) const = default;
};

constexpr std::size_t kCifarPixels = 3 * 32 * 32;
std::size_t cifar_record_size(CifarVariant variant);
std::size_t cifar_classes(CifarVariant variant);

/// Throws IoError on truncated input or out-of-range labels.
CifarRecords parse_cifar(const std::string& bytes, CifarVariant variant);
std::string serialize_cifar(const CifarRecords& records, CifarVariant variant);
CifarRecords read_cifar_file(const std::filesystem::path& path, CifarVariant variant);

/// Pixels scaled to [0,1], not normalized.
Dataset cifar_to_dataset(const CifarRecords& records, CifarVariant variant);

/// Records of a CIFAR file, or of the train/test split of a directory holding
/// the standard file names (data_batch_{1..5}.bin / test_batch.bin, or
/// train.bin / test.bin for CIFAR-100).
CifarRecords read_cifar_split(const std::filesystem::path& path, CifarVariant variant, bool train_split);

/// Loads a CIFAR file, or the train/test split of a directory holding the
/// standard file names, and normalizes it with `stats` (computed from the
/// loaded data when absent).
Dataset load_cifar(const std::filesystem::path& path, CifarVariant variant, bool train_split,
                   std::optional<ChannelStats> stats = std::nullopt,
                   ChannelStats* stats_out = nullptr);

// ---------------------------------------------------------------------------
// Synthetic stand-in: K smooth class prototypes (orthogonal, equal norm, RMS 1
// per pixel) plus i.i.d. Gaussian pixel noise with standard deviation
// `difficulty`. The nearest-prototype rule is Bayes-optimal for this model.

class SynthTask {
 public:
  SynthTask(std::uint64_t seed, std::size_t classes, double difficulty, std::size_t image_size = 32);

  /// Split "train" and "test" share prototypes but draw independent noise.
  /// Labels cycle 0..K-1.
  Dataset sample(std::size_t count, const std::string& split) const;

  const std::vector<std::vector<double>>& prototypes() const { return prototypes_; }
  std::size_t classes() const { return classes_; }
  std::size_t image_size() const { return image_size_; }
  double difficulty() const { return difficulty_; }

 private:
  std::uint64_t seed_;
  std::size_t classes_;
  double difficulty_;
  std::size_t image_size_;
  std::vector<std::vector<double>> prototypes_;
};

Dataset synth_task(std::uint64_t seed, std::size_t count, std::size_t classes, double difficulty,
                   const std::string& split = "train", std::size_t image_size = 32);

/// Closed-form accuracy of the nearest-prototype rule for the synthetic model:
/// integral of phi(z) Phi(z + sqrt(D)/difficulty)^(K-1) dz, D = 3*S*S.
double synth_prototype_accuracy(std::size_t classes, double difficulty, std::size_t image_size = 32);
/// Difficulty at which synth_prototype_accuracy equals `target` (bisection).
double synth_difficulty_for_accuracy(std::size_t classes, double target, std::size_t image_size = 32);

/// Random crop from a zero-padded (4 px) image plus horizontal flip with p=1/2,
/// applied independently per sample. Shape is preserved.
Tensor augment_batch(const Tensor& images, Rng rng);

}  // namespace dia
