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

#include "dia/train.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "dia/errors.hpp"
#include "dia/optim.hpp"

namespace dia {

std::string ExplosionEvent::describe() const {
  std::string s = "explosion at step " + std::to_string(step) + " (" + where;
  if (stage >= 0) s += ", stage " + std::to_string(stage);
  if (block >= 0) s += ", block " + std::to_string(block);
  return s + ")";
}

void RunRecord::add(std::size_t step, std::size_t epoch, std::string split, std::string metric, double value) {
  rows_.push_back({step, epoch, std::move(split), std::move(metric), value});
}

void RunRecord::mark_explosion(const ExplosionEvent& event) {
  explosion_ = event;
  std::string metric = "explosion:" + event.where;
  if (event.stage >= 0) metric += ":stage" + std::to_string(event.stage);
  if (event.block >= 0) metric += ":block" + std::to_string(event.block);
  add(event.step, event.epoch, "event", metric, static_cast<double>(event.step));
}

std::string RunRecord::to_csv() const {
  std::string out = "step,epoch,split,metric,value\n";
  char buf[64];
  for (const auto& r : rows_) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out += std::to_string(r.step) + "," + std::to_string(r.epoch) + "," + r.split + "," + r.metric + "," + buf + "\n";
  }
  return out;
}

std::vector<RunRow> RunRecord::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "step,epoch,split,metric,value") {
    throw IoError("run record: missing header");
  }
  std::vector<RunRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (f.size() != 5) throw IoError("run record: malformed row '" + line + "'");
    try {
      rows.push_back({std::stoull(f[0]), std::stoull(f[1]), f[2], f[3], std::stod(f[4])});
    } catch (const std::logic_error&) {
      throw IoError("run record: malformed row '" + line + "'");
    }
  }
  return rows;
}

void RunRecord::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << to_csv();
  if (!out) throw IoError("write failed for " + path.string());
}

std::optional<double> RunRecord::last(const std::string& split, const std::string& metric) const {
  for (auto it = rows_.rbegin(); it != rows_.rend(); ++it) {
    if (it->split == split && it->metric == metric) return it->value;
  }
  return std::nullopt;
}

namespace {

Dataset cifar_subset(const CifarRecords& all, CifarVariant variant, std::size_t offset, std::size_t count) {
  if (offset >= all.size()) throw IoError("CIFAR data has only " + std::to_string(all.size()) + " records");
  count = std::min(count, all.size() - offset);
  CifarRecords part;
  part.labels.assign(all.labels.begin() + offset, all.labels.begin() + offset + count);
  if (!all.coarse_labels.empty()) {
    part.coarse_labels.assign(all.coarse_labels.begin() + offset, all.coarse_labels.begin() + offset + count);
  }
  part.pixels.assign(all.pixels.begin() + offset * kCifarPixels, all.pixels.begin() + (offset + count) * kCifarPixels);
  return cifar_to_dataset(part, variant);
}

bool grads_finite(const std::vector<Parameter>& params) {
  for (const auto& p : params) {
    for (double g : p.value.grad()) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

std::size_t argmax_row(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& config, const std::optional<ChannelStats>& stats) {
  const auto& ds = config.dataset;
  PreparedData out;
  if (ds.kind == DatasetKind::Synth) {
    const SynthTask task(config.train.seed, config.network.classes, ds.difficulty, ds.image_size);
    out.train = task.sample(ds.subset, "train");
    out.test = task.sample(ds.test_subset, "test");
  } else {
    const auto variant = ds.kind == DatasetKind::Cifar10 ? CifarVariant::C10 : CifarVariant::C100;
    if (std::filesystem::is_directory(ds.path)) {
      out.train = cifar_subset(read_cifar_split(ds.path, variant, true), variant, 0, ds.subset);
      out.test = cifar_subset(read_cifar_split(ds.path, variant, false), variant, 0, ds.test_subset);
    } else {
      // One file: the first `subset` records train, the following ones test.
      const auto all = read_cifar_split(ds.path, variant, true);
      out.train = cifar_subset(all, variant, 0, ds.subset);
      out.test = cifar_subset(all, variant, out.train.size(), ds.test_subset);
    }
  }
  out.stats = stats ? *stats : compute_channel_stats(out.train);
  normalize_in_place(out.train, out.stats);
  normalize_in_place(out.test, out.stats);
  return out;
}

TrainResult train(const ExperimentConfig& config, const PreparedData& data, const TrainHooks& hooks) {
  config.validate();
  const auto& tc = config.train;
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult result;
  result.stats = data.stats;
  result.model = std::make_unique<Network>(config.network, tc.seed);
  Network& net = *result.model;
  auto params = net.parameters();
  Sgd opt(tc.momentum, tc.weight_decay);
  RunRecord& rec = result.record;

  const std::size_t m = data.train.size();
  const std::size_t batches = m / tc.batch_size;  // last partial batch dropped
  if (batches == 0) throw ConfigError("training subset smaller than one batch");
  const Rng shuffle_root = Rng(tc.seed).split("shuffle");
  const Rng augment_root = Rng(tc.seed).split("augment");

  std::size_t step = 0;
  bool stop = false;
  for (std::size_t epoch = 1; epoch <= tc.epochs && !stop; ++epoch) {
    const double lr = tc.lr_at_epoch(epoch);
    rec.add(step, epoch, "train", "lr", lr);

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = shuffle_root.split(epoch);
    for (std::size_t i = m; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    std::size_t correct = 0, seen = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      ++step;
      const std::span<const std::size_t> idx(order.data() + b * tc.batch_size, tc.batch_size);
      Tensor x = data.train.gather_images(idx);
      const std::vector<int> y = data.train.gather_labels(idx);
      if (tc.augment) x = augment_batch(x, augment_root.split(step));

      ForwardOptions fo;
      fo.training = true;
      fo.capture = hooks.capture;
      NetworkOutput out = net.forward(x, fo);
      const auto explode = [&](int stage, int block, std::string where) {
        rec.mark_explosion({step, epoch, stage, block, std::move(where)});
        stop = true;
      };
      if (out.explosion) {
        explode(out.explosion->stage, out.explosion->block, out.explosion->where);
        break;
      }
      Tensor loss = softmax_cross_entropy(out.logits, y);
      double loss_value = loss.item();
      if (tc.inject_nan_step && *tc.inject_nan_step == step) loss_value = std::nan("");
      if (!std::isfinite(loss_value)) {
        explode(-1, -1, "loss");
        break;
      }
      rec.add(step, epoch, "train", "loss", loss_value);
      loss.backward();
      if (!grads_finite(params)) {
        explode(-1, -1, "gradient");
        break;
      }
      opt.step(params, lr);

      const auto logits = out.logits.data();
      const std::size_t k = out.logits.dim(1);
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (argmax_row(logits.subspan(i * k, k)) == static_cast<std::size_t>(y[i])) ++correct;
      }
      seen += y.size();
      if (hooks.on_step) hooks.on_step(step, out);
      if (tc.max_steps && step >= tc.max_steps) {
        stop = true;
        break;
      }
    }
    if (rec.explosion()) break;
    rec.add(step, epoch, "train", "batch_accuracy", seen ? static_cast<double>(correct) / seen : 0.0);
    if (epoch % tc.eval_interval == 0 || stop || epoch == tc.epochs) {
      rec.add(step, epoch, "train", "accuracy", evaluate(net, data.train));
      rec.add(step, epoch, "test", "accuracy", evaluate(net, data.test));
    }
  }
  result.steps = step;
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

double top1_accuracy(std::span<const double> logits, std::size_t classes, std::span<const int> labels) {
  if (classes == 0 || logits.size() != classes * labels.size()) {
    throw ShapeError("top1_accuracy: " + std::to_string(logits.size()) + " logits for " +
                     std::to_string(labels.size()) + " labels x " + std::to_string(classes) + " classes");
  }
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (argmax_row(logits.subspan(i * classes, classes)) == static_cast<std::size_t>(labels[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double evaluate(Network& model, const Dataset& data, std::size_t batch_size) {
  NoGradGuard guard;
  const std::size_t k = model.config().classes;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, data.size() - start);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), start);
    const auto out = model.forward(data.gather_images(idx));
    const auto labels = data.gather_labels(idx);
    if (out.explosion) continue;  // NaN logits score nothing
    const auto logits = out.logits.data();
    for (std::size_t i = 0; i < n; ++i) {
      if (argmax_row(logits.subspan(i * k, k)) == static_cast<std::size_t>(labels[i])) ++correct;
    }
  }
  return data.size() ? static_cast<double>(correct) / static_cast<double>(data.size()) : 0.0;
}

Checkpoint build_checkpoint(const Network& model, const ExperimentConfig& config, const ChannelStats& stats) {
  Checkpoint ckpt;
  // The output directory says where a run was written, not what was trained.
  ExperimentConfig stored = config;
  stored.out_dir = ExperimentConfig{}.out_dir;
  ckpt.add_text("meta.config", stored.to_text());
  ckpt.add_values("meta.norm_mean", {stats.mean.size()}, stats.mean);
  ckpt.add_values("meta.norm_std", {stats.stddev.size()}, stats.stddev);
  write_model_state(model, ckpt);
  return ckpt;
}

LoadedModel load_model(const Checkpoint& checkpoint) {
  LoadedModel out;
  out.config = ExperimentConfig::parse(checkpoint.text("meta.config"));
  out.stats.mean = checkpoint.at("meta.norm_mean").values;
  out.stats.stddev = checkpoint.at("meta.norm_std").values;
  out.model = std::make_unique<Network>(out.config.network, out.config.train.seed);
  read_model_state(checkpoint, *out.model);
  return out;
}

}  // namespace dia
