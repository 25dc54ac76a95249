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

#include "dia/data.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include "dia/errors.hpp"

namespace dia {

Tensor Dataset::gather_images(std::span<const std::size_t> indices) const {
  const auto& s = images.shape();
  const std::size_t per = s[1] * s[2] * s[3];
  std::vector<double> out(indices.size() * per);
  auto src = images.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    std::copy_n(src.begin() + static_cast<long>(indices[i] * per), per, out.begin() + static_cast<long>(i * per));
  }
  return Tensor::from_data({indices.size(), s[1], s[2], s[3]}, std::move(out));
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  n = std::min(n, size());
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return {gather_images(idx), gather_labels(idx), classes};
}

ChannelStats compute_channel_stats(const Dataset& data) {
  const auto& s = data.images.shape();
  const std::size_t m = s[0], c = s[1], hw = s[2] * s[3];
  ChannelStats st{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  auto x = data.images.data();
  const double n = static_cast<double>(m * hw);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < hw; ++p) acc += x[(i * c + ch) * hw + p];
    const double mu = acc / n;
    double sq = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < hw; ++p) {
        const double d = x[(i * c + ch) * hw + p] - mu;
        sq += d * d;
      }
    st.mean[ch] = mu;
    st.stddev[ch] = std::sqrt(sq / n);
  }
  return st;
}

void normalize_in_place(Dataset& data, const ChannelStats& stats) {
  const auto& s = data.images.shape();
  const std::size_t m = s[0], c = s[1], hw = s[2] * s[3];
  if (stats.mean.size() != c || stats.stddev.size() != c) {
    throw ShapeError("normalize: stats for " + std::to_string(stats.mean.size()) + " channels, data has " +
                     std::to_string(c));
  }
  auto x = data.images.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double sd = stats.stddev[ch] > 0.0 ? stats.stddev[ch] : 1.0;
      for (std::size_t p = 0; p < hw; ++p) {
        auto& v = x[(i * c + ch) * hw + p];
        v = (v - stats.mean[ch]) / sd;
      }
    }
}

std::size_t cifar_record_size(CifarVariant variant) {
  return (variant == CifarVariant::C10 ? 1 : 2) + kCifarPixels;
}

std::size_t cifar_classes(CifarVariant variant) { return variant == CifarVariant::C10 ? 10 : 100; }

CifarRecords parse_cifar(const std::string& bytes, CifarVariant variant) {
  const std::size_t rec = cifar_record_size(variant);
  if (bytes.empty()) throw IoError("empty CIFAR data");
  if (bytes.size() % rec != 0) {
    throw IoError("truncated CIFAR data: " + std::to_string(bytes.size()) + " bytes is not a multiple of " +
                  std::to_string(rec));
  }
  const std::size_t n = bytes.size() / rec;
  CifarRecords out;
  out.labels.reserve(n);
  out.pixels.resize(n * kCifarPixels);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* r = reinterpret_cast<const std::uint8_t*>(bytes.data() + i * rec);
    std::size_t off = 0;
    if (variant == CifarVariant::C100) out.coarse_labels.push_back(r[off++]);
    const std::uint8_t label = r[off++];
    if (label >= cifar_classes(variant)) {
      throw IoError("CIFAR record " + std::to_string(i) + ": label " + std::to_string(label) + " out of range");
    }
    out.labels.push_back(label);
    std::copy_n(r + off, kCifarPixels, out.pixels.begin() + static_cast<long>(i * kCifarPixels));
  }
  return out;
}

std::string serialize_cifar(const CifarRecords& records, CifarVariant variant) {
  std::string out;
  out.reserve(records.size() * cifar_record_size(variant));
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (variant == CifarVariant::C100) out.push_back(static_cast<char>(records.coarse_labels.at(i)));
    out.push_back(static_cast<char>(records.labels[i]));
    const auto* px = records.pixels.data() + i * kCifarPixels;
    out.append(reinterpret_cast<const char*>(px), kCifarPixels);
  }
  return out;
}

CifarRecords read_cifar_file(const std::filesystem::path& path, CifarVariant variant) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open CIFAR file " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_cifar(bytes, variant);
}

Dataset cifar_to_dataset(const CifarRecords& records, CifarVariant variant) {
  const std::size_t n = records.size();
  std::vector<double> px(records.pixels.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = records.pixels[i] / 255.0;
  Dataset d;
  d.images = Tensor::from_data({n, 3, 32, 32}, std::move(px));
  d.labels.assign(records.labels.begin(), records.labels.end());
  d.classes = cifar_classes(variant);
  return d;
}

CifarRecords read_cifar_split(const std::filesystem::path& path, CifarVariant variant, bool train_split) {
  CifarRecords records;
  if (std::filesystem::is_directory(path)) {
    std::vector<std::string> files;
    if (variant == CifarVariant::C10) {
      if (train_split) {
        for (int i = 1; i <= 5; ++i) files.push_back("data_batch_" + std::to_string(i) + ".bin");
      } else {
        files.push_back("test_batch.bin");
      }
    } else {
      files.push_back(train_split ? "train.bin" : "test.bin");
    }
    for (const auto& f : files) {
      auto part = read_cifar_file(path / f, variant);
      records.labels.insert(records.labels.end(), part.labels.begin(), part.labels.end());
      records.coarse_labels.insert(records.coarse_labels.end(), part.coarse_labels.begin(),
                                   part.coarse_labels.end());
      records.pixels.insert(records.pixels.end(), part.pixels.begin(), part.pixels.end());
    }
  } else {
    records = read_cifar_file(path, variant);
  }
  return records;
}

Dataset load_cifar(const std::filesystem::path& path, CifarVariant variant, bool train_split,
                   std::optional<ChannelStats> stats, ChannelStats* stats_out) {
  const CifarRecords records = read_cifar_split(path, variant, train_split);
  if (records.size() == 0) throw IoError("no CIFAR records in " + path.string());
  Dataset d = cifar_to_dataset(records, variant);
  const ChannelStats st = stats ? *stats : compute_channel_stats(d);
  normalize_in_place(d, st);
  if (stats_out) *stats_out = st;
  return d;
}

SynthTask::SynthTask(std::uint64_t seed, std::size_t classes, double difficulty, std::size_t image_size)
    : seed_(seed), classes_(classes), difficulty_(difficulty), image_size_(image_size) {
  if (classes < 2) throw ConfigError("synth task needs at least 2 classes");
  if (!(difficulty >= 0.0) || !std::isfinite(difficulty)) throw ConfigError("synth difficulty must be >= 0");
  if (image_size < 4) throw ConfigError("synth image size must be >= 4");
  const std::size_t s = image_size, dims = 3 * s * s;
  if (classes > dims) throw ConfigError("synth task has more classes than pixel dimensions");
  const Rng root = Rng(seed).split("synth.prototypes");
  const double two_pi = 2.0 * std::numbers::pi;

  for (std::size_t k = 0; k < classes; ++k) {
    Rng rng = root.split(k);
    std::vector<double> p(dims, 0.0);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double dc = 0.5 * rng.normal();
      for (std::size_t i = 0; i < s * s; ++i) p[ch * s * s + i] = dc;
    }
    for (int grating = 0; grating < 3; ++grating) {
      const double freq = 1.0 + 3.0 * rng.uniform();
      const double angle = std::numbers::pi * rng.uniform();
      const double phase = two_pi * rng.uniform();
      const double fx = freq * std::cos(angle) / static_cast<double>(s);
      const double fy = freq * std::sin(angle) / static_cast<double>(s);
      double amp[3];
      for (double& a : amp) a = rng.normal();
      for (std::size_t y = 0; y < s; ++y)
        for (std::size_t x = 0; x < s; ++x) {
          const double wave = std::cos(two_pi * (fx * static_cast<double>(x) + fy * static_cast<double>(y)) + phase);
          for (std::size_t ch = 0; ch < 3; ++ch) p[(ch * s + y) * s + x] += amp[ch] * wave;
        }
    }
    // Gram-Schmidt against earlier prototypes (twice for stability), then scale
    // to norm sqrt(dims).
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : prototypes_) {
        double dot = 0.0;
        for (std::size_t i = 0; i < dims; ++i) dot += p[i] * q[i];
        const double coef = dot / static_cast<double>(dims);
        for (std::size_t i = 0; i < dims; ++i) p[i] -= coef * q[i];
      }
    }
    double norm = 0.0;
    for (double v : p) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-9) throw ConfigError("synth prototypes are degenerate; try another seed");
    const double f = std::sqrt(static_cast<double>(dims)) / norm;
    for (double& v : p) v *= f;
    prototypes_.push_back(std::move(p));
  }
}

Dataset SynthTask::sample(std::size_t count, const std::string& split) const {
  if (count == 0) throw ConfigError("synth sample count must be >= 1");
  const std::size_t s = image_size_, dims = 3 * s * s;
  const Rng noise_root = Rng(seed_).split("synth.noise").split(split);
  std::vector<double> px(count * dims);
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t label = i % classes_;
    labels[i] = static_cast<int>(label);
    Rng rng = noise_root.split(i);
    const auto& proto = prototypes_[label];
    double* dst = px.data() + i * dims;
    for (std::size_t d = 0; d < dims; ++d) {
      dst[d] = proto[d] + (difficulty_ > 0.0 ? difficulty_ * rng.normal() : 0.0);
    }
  }
  return {Tensor::from_data({count, 3, s, s}, std::move(px)), std::move(labels), classes_};
}

Dataset synth_task(std::uint64_t seed, std::size_t count, std::size_t classes, double difficulty,
                   const std::string& split, std::size_t image_size) {
  return SynthTask(seed, classes, difficulty, image_size).sample(count, split);
}

double synth_prototype_accuracy(std::size_t classes, double difficulty, std::size_t image_size) {
  if (difficulty <= 0.0) return 1.0;
  const double snr = std::sqrt(3.0 * static_cast<double>(image_size * image_size)) / difficulty;
  const auto phi = [](double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };
  const auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
  // Composite Simpson on [-12, 12].
  const int n = 6000;
  const double lo = -12.0, hi = 12.0, h = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = lo + i * h;
    const double f = phi(z) * std::pow(cdf(z + snr), static_cast<double>(classes - 1));
    acc += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return acc * h / 3.0;
}

double synth_difficulty_for_accuracy(std::size_t classes, double target, std::size_t image_size) {
  const double chance = 1.0 / static_cast<double>(classes);
  if (!(target > chance && target < 1.0)) throw ConfigError("target accuracy must lie in (1/K, 1)");
  double lo = 1e-6, hi = 1.0;
  while (synth_prototype_accuracy(classes, hi, image_size) > target) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (synth_prototype_accuracy(classes, mid, image_size) > target) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

Tensor augment_batch(const Tensor& images, Rng rng) {
  const auto& s = images.shape();
  const std::size_t b = s[0], c = s[1], h = s[2], w = s[3];
  constexpr long kPad = 4;
  std::vector<double> out(images.numel(), 0.0);
  auto src = images.data();
  for (std::size_t i = 0; i < b; ++i) {
    const long dy = static_cast<long>(rng.below(2 * kPad + 1)) - kPad;
    const long dx = static_cast<long>(rng.below(2 * kPad + 1)) - kPad;
    const bool flip = rng.below(2) == 1;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const long sy = static_cast<long>(y) + dy;
          const long sx0 = static_cast<long>(flip ? w - 1 - x : x) + dx;
          if (sy < 0 || sy >= static_cast<long>(h) || sx0 < 0 || sx0 >= static_cast<long>(w)) continue;
          out[((i * c + ch) * h + y) * w + x] = src[((i * c + ch) * h + sy) * w + sx0];
        }
  }
  return Tensor::from_data(s, std::move(out));
}

}  // namespace dia
