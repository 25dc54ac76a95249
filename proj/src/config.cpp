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

#include "dia/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dia/errors.hpp"

namespace dia {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (seps.find(ch) != std::string::npos) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
  throw ConfigError("config key '" + key + "': invalid value '" + value + "' (" + why + ")");
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad(key, v, "expected a non-negative integer");
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  // "a/b" fractions are accepted so that 1/3 can be written exactly.
  if (const auto slash = v.find('/'); slash != std::string::npos) {
    const double num = parse_double(key, trim(v.substr(0, slash)));
    const double den = parse_double(key, trim(v.substr(slash + 1)));
    if (den == 0.0) bad(key, v, "zero denominator");
    return num / den;
  }
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    bad(key, v, "expected a finite number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, v, "expected true/false");
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty() || v == "none") return out;
  for (const auto& part : split(v, ",/")) out.push_back(parse_size(key, part));
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <typename T>
std::string join(const std::vector<T>& xs, const char* sep) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? sep : "") << xs[i];
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("epoch must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("wd must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0,1]");
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (schedule[i] <= schedule[i - 1]) throw ConfigError("schedule must be strictly increasing");
  }
}

double TrainConfig::lr_at_epoch(std::size_t epoch) const {
  double rate = lr;
  for (auto s : schedule) {
    if (s < epoch) rate *= gamma;
  }
  return rate;
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig cfg;
  auto& net = cfg.network;
  auto& tr = cfg.train;
  auto& ds = cfg.dataset;
  auto& an = cfg.analysis;
  std::optional<std::size_t> depth;
  bool classes_set = false;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"batch_size", [&](auto& k, auto& v) { tr.batch_size = parse_size(k, v); }},
      {"epoch", [&](auto& k, auto& v) { tr.epochs = parse_size(k, v); }},
      {"max_steps", [&](auto& k, auto& v) { tr.max_steps = parse_size(k, v); }},
      {"lr", [&](auto& k, auto& v) { tr.lr = parse_double(k, v); }},
      {"momentum", [&](auto& k, auto& v) { tr.momentum = parse_double(k, v); }},
      {"wd", [&](auto& k, auto& v) { tr.weight_decay = parse_double(k, v); }},
      {"schedule", [&](auto& k, auto& v) { tr.schedule = parse_size_list(k, v); }},
      {"gamma", [&](auto& k, auto& v) { tr.gamma = parse_double(k, v); }},
      {"augment", [&](auto& k, auto& v) { tr.augment = parse_bool(k, v); }},
      {"seed", [&](auto& k, auto& v) { tr.seed = parse_size(k, v); }},
      {"eval_interval", [&](auto& k, auto& v) { tr.eval_interval = parse_size(k, v); }},
      {"inject_nan_step",
       [&](auto& k, auto& v) {
         if (v == "none") tr.inject_nan_step.reset(); else tr.inject_nan_step = parse_size(k, v);
       }},
      {"stages",
       [&](auto& k, auto& v) {
         net.stages.clear();
         for (const auto& part : split(v, ",")) {
           const auto f = split(part, ":");
           if (f.size() != 3) bad(k, v, "expected channels:blocks:stride entries");
           net.stages.push_back({parse_size(k, f[0]), parse_size(k, f[1]), parse_size(k, f[2])});
         }
       }},
      {"depth", [&](auto& k, auto& v) { depth = parse_size(k, v); }},
      {"block",
       [&](auto& k, auto& v) {
         if (v == "basic") net.block = BlockKind::Basic;
         else if (v == "bottleneck") net.block = BlockKind::Bottleneck;
         else bad(k, v, "expected basic|bottleneck");
       }},
      {"attention",
       [&](auto& k, auto& v) {
         if (v == "none") net.attention = AttentionKind::None;
         else if (v == "se") net.attention = AttentionKind::Se;
         else if (v == "dia_lstm") net.attention = AttentionKind::DiaLstm;
         else if (v == "standard_lstm") net.attention = AttentionKind::StandardLstm;
         else bad(k, v, "expected none|se|dia_lstm|standard_lstm");
       }},
      {"reduction_ratio", [&](auto& k, auto& v) { net.reduction_ratio = parse_size(k, v); }},
      {"cells", [&](auto& k, auto& v) { net.cells = parse_size(k, v); }},
      {"output_activation",
       [&](auto& k, auto& v) {
         if (v == "sigmoid") net.output_activation = OutputActivation::Sigmoid;
         else if (v == "tanh") net.output_activation = OutputActivation::Tanh;
         else bad(k, v, "expected sigmoid|tanh");
       }},
      {"f_ext",
       [&](auto& k, auto& v) {
         if (v == "gap") net.f_ext = FeatureExtractor::Gap;
         else if (v == "bn_gap") net.f_ext = FeatureExtractor::BnGap;
         else bad(k, v, "expected gap|bn_gap");
       }},
      {"use_bn", [&](auto& k, auto& v) { net.use_batch_norm = parse_bool(k, v); }},
      {"skip_removal_fraction", [&](auto& k, auto& v) { net.skip_removal_fraction = parse_double(k, v); }},
      {"dia_stages",
       [&](auto& k, auto& v) {
         if (v == "all") {
           net.attention_stages.reset();
         } else {
           const auto list = parse_size_list(k, v);
           net.attention_stages = std::set<std::size_t>(list.begin(), list.end());
         }
       }},
      {"classes",
       [&](auto& k, auto& v) {
         net.classes = parse_size(k, v);
         classes_set = true;
       }},
      {"stem_channels", [&](auto& k, auto& v) { net.stem_channels = parse_size(k, v); }},
      {"dataset",
       [&](auto& k, auto& v) {
         if (v == "synth") ds.kind = DatasetKind::Synth;
         else if (v == "cifar10") ds.kind = DatasetKind::Cifar10;
         else if (v == "cifar100") ds.kind = DatasetKind::Cifar100;
         else bad(k, v, "expected synth|cifar10|cifar100");
       }},
      {"data_path", [&](auto&, auto& v) { ds.path = v; }},
      {"subset", [&](auto& k, auto& v) { ds.subset = parse_size(k, v); }},
      {"test_subset", [&](auto& k, auto& v) { ds.test_subset = parse_size(k, v); }},
      {"difficulty", [&](auto& k, auto& v) { ds.difficulty = parse_double(k, v); }},
      {"image_size", [&](auto& k, auto& v) { ds.image_size = parse_size(k, v); }},
      {"analysis_samples", [&](auto& k, auto& v) { an.samples = parse_size(k, v); }},
      {"forest_trees", [&](auto& k, auto& v) { an.trees = parse_size(k, v); }},
      {"forest_max_depth", [&](auto& k, auto& v) { an.max_depth = parse_size(k, v); }},
      {"forest_min_leaf", [&](auto& k, auto& v) { an.min_leaf = parse_size(k, v); }},
      {"forest_feature_fraction", [&](auto& k, auto& v) { an.feature_fraction = parse_double(k, v); }},
      {"forest_bootstrap", [&](auto& k, auto& v) { an.bootstrap = parse_bool(k, v); }},
      {"out", [&](auto&, auto& v) { cfg.out_dir = v; }},
  };

  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' given twice");
    it->second(key, value);
  }

  if (depth) {
    // CIFAR-style ResNet depth: 6n+2 (basic) or 9n+2 (bottleneck) layers.
    const std::size_t per = net.block == BlockKind::Basic ? 6 : 9;
    if (*depth < per + 2 || (*depth - 2) % per != 0) {
      throw ConfigError("depth " + std::to_string(*depth) + " is not of the form " + std::to_string(per) +
                        "n+2 for " + to_string(net.block) + " blocks");
    }
    const std::size_t blocks = (*depth - 2) / per;
    for (auto& st : net.stages) st.blocks = blocks;
  }
  if (ds.kind != DatasetKind::Synth) {
    const std::size_t k = ds.kind == DatasetKind::Cifar10 ? 10 : 100;
    if (classes_set && net.classes != k) {
      throw ConfigError("classes = " + std::to_string(net.classes) + " conflicts with dataset (" +
                        std::to_string(k) + " classes)");
    }
    net.classes = k;
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void ExperimentConfig::validate() const {
  network.validate();
  train.validate();
  if (dataset.kind != DatasetKind::Synth && dataset.path.empty()) {
    throw ConfigError("data_path is required for CIFAR datasets");
  }
  if (dataset.kind != DatasetKind::Synth && dataset.image_size != 32) {
    throw ConfigError("CIFAR images are 32x32; image_size must be 32");
  }
  if (dataset.subset == 0 || dataset.test_subset == 0) throw ConfigError("subset sizes must be >= 1");
  if (dataset.subset < train.batch_size) throw ConfigError("subset smaller than batch_size");
  if (!(dataset.difficulty >= 0.0)) throw ConfigError("difficulty must be >= 0");
  if (dataset.image_size < 4) throw ConfigError("image_size must be >= 4");
  if (analysis.trees == 0) throw ConfigError("forest_trees must be >= 1");
  if (analysis.min_leaf == 0) throw ConfigError("forest_min_leaf must be >= 1");
  if (!(analysis.feature_fraction > 0.0 && analysis.feature_fraction <= 1.0)) {
    throw ConfigError("forest_feature_fraction must lie in (0,1]");
  }
  if (analysis.samples < 2 * analysis.min_leaf) throw ConfigError("analysis_samples must be >= 2*forest_min_leaf");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  const auto& n = network;
  const auto& t = train;
  std::vector<std::string> stages;
  for (const auto& s : n.stages) {
    stages.push_back(std::to_string(s.channels) + ":" + std::to_string(s.blocks) + ":" + std::to_string(s.stride));
  }
  os << "batch_size = " << t.batch_size << "\n"
     << "epoch = " << t.epochs << "\n"
     << "max_steps = " << t.max_steps << "\n"
     << "lr = " << fmt_double(t.lr) << "\n"
     << "momentum = " << fmt_double(t.momentum) << "\n"
     << "wd = " << fmt_double(t.weight_decay) << "\n"
     << "schedule = " << (t.schedule.empty() ? "none" : join(t.schedule, ",")) << "\n"
     << "gamma = " << fmt_double(t.gamma) << "\n"
     << "augment = " << (t.augment ? "true" : "false") << "\n"
     << "seed = " << t.seed << "\n"
     << "eval_interval = " << t.eval_interval << "\n"
     << "inject_nan_step = " << (t.inject_nan_step ? std::to_string(*t.inject_nan_step) : "none") << "\n"
     << "stages = " << join(stages, ",") << "\n"
     << "block = " << to_string(n.block) << "\n"
     << "attention = " << to_string(n.attention) << "\n"
     << "reduction_ratio = " << n.reduction_ratio << "\n"
     << "cells = " << n.cells << "\n"
     << "output_activation = " << to_string(n.output_activation) << "\n"
     << "f_ext = " << to_string(n.f_ext) << "\n"
     << "use_bn = " << (n.use_batch_norm ? "true" : "false") << "\n"
     << "skip_removal_fraction = " << fmt_double(n.skip_removal_fraction) << "\n";
  if (n.attention_stages) {
    std::vector<std::size_t> xs(n.attention_stages->begin(), n.attention_stages->end());
    os << "dia_stages = " << (xs.empty() ? "none" : join(xs, ",")) << "\n";
  } else {
    os << "dia_stages = all\n";
  }
  os << "classes = " << n.classes << "\n"
     << "stem_channels = " << n.stem_channels << "\n";
  const char* kind = dataset.kind == DatasetKind::Synth ? "synth"
                     : dataset.kind == DatasetKind::Cifar10 ? "cifar10" : "cifar100";
  os << "dataset = " << kind << "\n";
  if (!dataset.path.empty()) os << "data_path = " << dataset.path.string() << "\n";
  os << "subset = " << dataset.subset << "\n"
     << "test_subset = " << dataset.test_subset << "\n"
     << "difficulty = " << fmt_double(dataset.difficulty) << "\n"
     << "image_size = " << dataset.image_size << "\n"
     << "analysis_samples = " << analysis.samples << "\n"
     << "forest_trees = " << analysis.trees << "\n"
     << "forest_max_depth = " << analysis.max_depth << "\n"
     << "forest_min_leaf = " << analysis.min_leaf << "\n"
     << "forest_feature_fraction = " << fmt_double(analysis.feature_fraction) << "\n"
     << "forest_bootstrap = " << (analysis.bootstrap ? "true" : "false") << "\n"
     << "out = " << out_dir.string() << "\n";
  return os.str();
}

}  // namespace dia
