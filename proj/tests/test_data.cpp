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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "dia/data.hpp"
#include "dia/errors.hpp"

namespace dia {
namespace {

namespace fs = std::filesystem;

CifarRecords random_records(std::size_t n, CifarVariant variant, std::uint64_t seed) {
  Rng rng(seed);
  CifarRecords r;
  const auto k = cifar_classes(variant);
  for (std::size_t i = 0; i < n; ++i) {
    r.labels.push_back(static_cast<std::uint8_t>(rng.below(k)));
    if (variant == CifarVariant::C100) r.coarse_labels.push_back(static_cast<std::uint8_t>(rng.below(20)));
    for (std::size_t p = 0; p < kCifarPixels; ++p) r.pixels.push_back(static_cast<std::uint8_t>(rng.below(256)));
  }
  return r;
}

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dianet_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

TEST(Cifar, RecordSizes) {
  EXPECT_EQ(cifar_record_size(CifarVariant::C10), 3073u);
  EXPECT_EQ(cifar_record_size(CifarVariant::C100), 3074u);
  EXPECT_EQ(cifar_classes(CifarVariant::C100), 100u);
}

TEST(Cifar, RoundTripIsBitExact) {
  for (auto v : {CifarVariant::C10, CifarVariant::C100}) {
    const auto recs = random_records(7, v, 42);
    const auto bytes = serialize_cifar(recs, v);
    ASSERT_EQ(bytes.size(), 7 * cifar_record_size(v));
    const auto back = parse_cifar(bytes, v);
    EXPECT_EQ(back, recs);
    EXPECT_EQ(serialize_cifar(back, v), bytes);
  }
}

TEST(Cifar, ByteLayout) {
  CifarRecords r;
  r.labels = {7};
  r.pixels.assign(kCifarPixels, 0);
  r.pixels[0] = 11;
  r.pixels[1024] = 22;
  const auto bytes = serialize_cifar(r, CifarVariant::C10);
  EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 7);
  EXPECT_EQ(static_cast<unsigned char>(bytes[1]), 11);
  EXPECT_EQ(static_cast<unsigned char>(bytes[1025]), 22);
}

TEST(Cifar, RejectsTruncatedAndBadLabels) {
  auto bytes = serialize_cifar(random_records(3, CifarVariant::C10, 1), CifarVariant::C10);
  EXPECT_THROW(parse_cifar(bytes.substr(0, bytes.size() - 1), CifarVariant::C10), IoError);
  EXPECT_THROW(parse_cifar(bytes.substr(0, 100), CifarVariant::C10), IoError);
  EXPECT_THROW(parse_cifar("", CifarVariant::C10), IoError);
  bytes[3073] = static_cast<char>(10);
  EXPECT_THROW(parse_cifar(bytes, CifarVariant::C10), IoError);

  // A C10 file of 3 records is not a whole number of C100 records.
  const auto c10 = serialize_cifar(random_records(3, CifarVariant::C10, 1), CifarVariant::C10);
  EXPECT_THROW(parse_cifar(c10, CifarVariant::C100), IoError);
}

TEST(Cifar, FileAndDirectoryReading) {
  const auto dir = temp_dir("cifar");
  std::vector<CifarRecords> batches;
  for (int b = 1; b <= 5; ++b) {
    batches.push_back(random_records(2, CifarVariant::C10, b));
    write_file(dir / ("data_batch_" + std::to_string(b) + ".bin"), serialize_cifar(batches.back(), CifarVariant::C10));
  }
  const auto test = random_records(3, CifarVariant::C10, 99);
  write_file(dir / "test_batch.bin", serialize_cifar(test, CifarVariant::C10));

  const auto train = read_cifar_split(dir, CifarVariant::C10, true);
  ASSERT_EQ(train.size(), 10u);
  EXPECT_EQ(train.labels[2], batches[1].labels[0]);
  EXPECT_EQ(read_cifar_split(dir, CifarVariant::C10, false), test);
  EXPECT_EQ(read_cifar_file(dir / "test_batch.bin", CifarVariant::C10), test);
  EXPECT_THROW(read_cifar_file(dir / "missing.bin", CifarVariant::C10), IoError);
  fs::remove_all(dir);
}

TEST(Cifar, DatasetScaling) {
  auto r = random_records(2, CifarVariant::C10, 5);
  r.pixels[kCifarPixels + 1024 + 33] = 255;
  const auto d = cifar_to_dataset(r, CifarVariant::C10);
  EXPECT_EQ(d.images.shape(), (Shape{2, 3, 32, 32}));
  EXPECT_EQ(d.classes, 10u);
  EXPECT_EQ(d.labels[1], r.labels[1]);
  EXPECT_EQ(d.images.data()[kCifarPixels + 1024 + 33], 1.0);
  EXPECT_EQ(d.images.data()[5], r.pixels[5] / 255.0);
}

TEST(Normalize, MatchesHandComputation) {
  // Two images, 2 channels, 1x2 pixels. Channel 0 values {1,3,5,7}: mean 4,
  // population sd sqrt(5). Channel 1 constant 2: sd 0, treated as 1.
  Dataset d;
  d.images = Tensor::from_data({2, 2, 1, 2}, {1, 3, 2, 2, 5, 7, 2, 2});
  d.labels = {0, 1};
  d.classes = 2;
  const auto s = compute_channel_stats(d);
  EXPECT_DOUBLE_EQ(s.mean[0], 4.0);
  EXPECT_DOUBLE_EQ(s.stddev[0], std::sqrt(5.0));
  EXPECT_DOUBLE_EQ(s.mean[1], 2.0);
  EXPECT_DOUBLE_EQ(s.stddev[1], 0.0);
  normalize_in_place(d, s);
  EXPECT_DOUBLE_EQ(d.images.data()[0], -3.0 / std::sqrt(5.0));
  EXPECT_DOUBLE_EQ(d.images.data()[5], 3.0 / std::sqrt(5.0));
  EXPECT_DOUBLE_EQ(d.images.data()[2], 0.0);
}

double nearest_prototype_accuracy(const SynthTask& task, const Dataset& d) {
  const auto& protos = task.prototypes();
  const std::size_t dim = protos[0].size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double* x = d.images.data().data() + i * dim;
    std::size_t best = 0;
    double best_dist = INFINITY;
    for (std::size_t k = 0; k < protos.size(); ++k) {
      double dist = 0.0;
      for (std::size_t j = 0; j < dim; ++j) dist += (x[j] - protos[k][j]) * (x[j] - protos[k][j]);
      if (dist < best_dist) {
        best_dist = dist;
        best = k;
      }
    }
    correct += static_cast<int>(best) == d.labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(d.size());
}

TEST(Synth, ZeroDifficultyIsSeparable) {
  const SynthTask task(3, 4, 0.0, 16);
  const auto d = task.sample(200, "train");
  EXPECT_EQ(nearest_prototype_accuracy(task, d), 1.0);
  EXPECT_EQ(synth_prototype_accuracy(4, 0.0, 16), 1.0);
}

TEST(Synth, PrototypesOrthogonalWithUnitRms) {
  const SynthTask task(3, 4, 1.0, 8);
  const auto& p = task.prototypes();
  ASSERT_EQ(p.size(), 4u);
  ASSERT_EQ(p[0].size(), 3u * 8u * 8u);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) {
      double dot = 0.0;
      for (std::size_t j = 0; j < p[a].size(); ++j) dot += p[a][j] * p[b][j];
      EXPECT_NEAR(dot, a == b ? 192.0 : 0.0, 1e-9);
    }
}

TEST(Synth, MonteCarloMatchesClosedFormAt85) {
  const double d = synth_difficulty_for_accuracy(4, 0.85, 16);
  EXPECT_NEAR(synth_prototype_accuracy(4, d, 16), 0.85, 1e-6);
  double mean = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const SynthTask task(seed, 4, d, 16);
    const double acc = nearest_prototype_accuracy(task, task.sample(2000, "test"));
    EXPECT_NEAR(acc, 0.85, 0.03) << "seed " << seed;
    mean += acc / 5.0;
  }
  EXPECT_NEAR(mean, 0.85, 0.015);
}

TEST(Synth, DeterministicAndSplitsDiffer) {
  const auto a = synth_task(9, 40, 4, 2.0, "train", 8);
  const auto b = synth_task(9, 40, 4, 2.0, "train", 8);
  const auto t = synth_task(9, 40, 4, 2.0, "test", 8);
  ASSERT_EQ(a.images.numel(), b.images.numel());
  EXPECT_TRUE(std::equal(a.images.data().begin(), a.images.data().end(), b.images.data().begin()));
  EXPECT_FALSE(std::equal(a.images.data().begin(), a.images.data().end(), t.images.data().begin()));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.labels[i], static_cast<int>(i % 4));
  EXPECT_THROW(SynthTask(1, 4, -1.0, 8), ConfigError);
}

TEST(Synth, AccuracyMonotoneInDifficulty) {
  double prev = 1.0;
  for (double d : {9.0, 12.0, 24.0, 48.0}) {
    const double a = synth_prototype_accuracy(4, d, 16);
    EXPECT_LT(a, prev);
    EXPECT_GT(a, 0.25);
    prev = a;
  }
}

TEST(Augment, PreservesShapeAndValues) {
  const auto d = synth_task(1, 6, 3, 1.0, "train", 8);
  const Tensor out = augment_batch(d.images, Rng(4));
  EXPECT_EQ(out.shape(), d.images.shape());
  const std::set<double> source(d.images.data().begin(), d.images.data().end());
  for (double v : out.data()) EXPECT_TRUE(v == 0.0 || source.count(v));
  const Tensor again = augment_batch(d.images, Rng(4));
  EXPECT_TRUE(std::equal(out.data().begin(), out.data().end(), again.data().begin()));
  const Tensor other = augment_batch(d.images, Rng(5));
  EXPECT_FALSE(std::equal(out.data().begin(), out.data().end(), other.data().begin()));
}

TEST(DatasetOps, HeadAndGather) {
  const auto d = synth_task(1, 10, 2, 1.0, "train", 4);
  const auto h = d.head(3);
  EXPECT_EQ(h.size(), 3u);
  EXPECT_EQ(h.images.shape(), (Shape{3, 3, 4, 4}));
  const std::vector<std::size_t> idx{4, 1};
  const auto imgs = d.gather_images(idx);
  EXPECT_EQ(imgs.data()[0], d.images.data()[4 * 48]);
  EXPECT_EQ(d.gather_labels(idx), (std::vector<int>{0, 1}));
}

}  // namespace
}  // namespace dia
