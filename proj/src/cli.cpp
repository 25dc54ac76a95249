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

#include "dia/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "dia/analysis.hpp"
#include "dia/checkpoint.hpp"
#include "dia/config.hpp"
#include "dia/errors.hpp"
#include "dia/gradcheck.hpp"
#include "dia/kernels.hpp"
#include "dia/train.hpp"

namespace dia::cli {

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg = args.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(args.config);
  if (args.seed) cfg.train.seed = *args.seed;
  if (!args.out.empty()) cfg.out_dir = args.out;
  cfg.validate();
  return cfg;
}

void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto data = prepare_data(cfg);
  make_out_dir(cfg.out_dir);
  std::ofstream(cfg.out_dir / "config.txt", std::ios::binary) << cfg.to_text();
  const auto result = train(cfg, data);
  result.record.write_csv(cfg.out_dir / "run.csv");
  out << "steps " << result.steps << "  wall " << fmt("%.2f", result.record.wall_seconds) << "s\n";
  if (result.exploded()) {
    err << result.record.explosion()->describe() << "\n";
    return kExitExplosion;
  }
  build_checkpoint(*result.model, cfg, result.stats).save(cfg.out_dir / "checkpoint.dia");
  if (auto v = result.record.last("train", "accuracy")) out << "train_top1 " << fmt("%.4f", *v) << "\n";
  if (auto v = result.record.last("test", "accuracy")) out << "test_top1 " << fmt("%.4f", *v) << "\n";
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint, const std::string& split, std::ostream& out) {
  if (checkpoint.empty()) throw UsageError("eval needs --checkpoint");
  auto loaded = load_model(Checkpoint::load(checkpoint));
  ExperimentConfig cfg = loaded.config;
  if (!args.config.empty()) {
    const auto other = load_config(args);
    if (other.network.classes != cfg.network.classes) {
      throw ConfigError("dataset has " + std::to_string(other.network.classes) + " classes, model has " +
                        std::to_string(cfg.network.classes));
    }
    cfg.dataset = other.dataset;
  }
  if (args.seed) cfg.train.seed = *args.seed;
  const auto data = prepare_data(cfg, loaded.stats);
  const double acc = evaluate(*loaded.model, split == "train" ? data.train : data.test);
  out << "top1 " << fmt("%.4f", acc) << "\n";
  return kExitOk;
}

int cmd_params(const ExperimentConfig& cfg, std::ostream& out) {
  bool ok = true;
  out << params_table(cfg.network, &ok);
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_gradcheck(const std::string& scope, std::uint64_t seed, double corrupt, std::ostream& out) {
  std::vector<GradScope> scopes;
  if (scope == "all") {
    scopes = {GradScope::Ops, GradScope::Cell, GradScope::Block, GradScope::Network};
  } else {
    scopes = {parse_grad_scope(scope)};
  }
  bool ok = true;
  for (auto sc : scopes) {
    const auto report = run_gradcheck(sc, seed, corrupt);
    for (const auto& r : report.results) {
      char line[160];
      std::snprintf(line, sizeof line, "%-8s %-32s max_rel_err %.3e  tol %.0e  %s\n", to_string(sc).c_str(),
                    r.name.c_str(), r.max_rel_error, r.tolerance, r.passed() ? "PASS" : "FAIL");
      out << line;
    }
    ok = ok && report.passed();
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_analyze(const CommonArgs& args, const std::string& checkpoint, std::optional<std::size_t> stage,
                std::ostream& out) {
  if (checkpoint.empty()) throw UsageError("analyze needs --checkpoint");
  auto loaded = load_model(Checkpoint::load(checkpoint));
  ExperimentConfig cfg = args.config.empty() ? loaded.config : load_config(args);
  cfg.network = loaded.config.network;
  if (!args.out.empty()) cfg.out_dir = args.out;
  if (args.seed) cfg.train.seed = *args.seed;

  const auto& net_cfg = loaded.model->config();
  const bool recurrent = net_cfg.attention == AttentionKind::DiaLstm || net_cfg.attention == AttentionKind::StandardLstm;
  std::vector<std::size_t> stages;
  if (stage) {
    if (*stage >= net_cfg.stages.size()) throw ConfigError("--stage " + std::to_string(*stage) + " out of range");
    if (!recurrent || !net_cfg.attention_in_stage(*stage)) {
      throw ConfigError("stage " + std::to_string(*stage) + " has no DIA unit");
    }
    stages.push_back(*stage);
  } else {
    for (std::size_t s = 0; s < net_cfg.stages.size(); ++s) {
      if (recurrent && net_cfg.attention_in_stage(s)) stages.push_back(s);
    }
    if (stages.empty()) throw ConfigError("model has no stage with a DIA unit");
  }
  for (auto s : stages) {
    if (net_cfg.stages[s].blocks < 2) throw ConfigError("stage " + std::to_string(s) + " has fewer than 2 blocks");
  }

  const auto data = prepare_data(cfg, loaded.stats);
  const Dataset sample = data.test.head(cfg.analysis.samples);
  if (sample.size() < 2 * cfg.analysis.min_leaf) throw ConfigError("too few analysis samples");
  make_out_dir(cfg.out_dir);
  Checkpoint dump;
  for (auto s : stages) {
    const auto trace = capture_traces(*loaded.model, sample, s);
    add_trace(dump, trace);
    const auto m = integration_matrix(trace, cfg.analysis, cfg.train.seed);
    const fs::path path = cfg.out_dir / ("heatmap_stage" + std::to_string(s) + ".csv");
    emit_heatmap_csv(m, path);
    out << "stage " << s << " -> " << path.string() << "\n";
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
      out << "  layer " << r + 2 << ":";
      for (double v : m.rows[r]) out << " " << fmt("%.3f", v);
      if (m.degenerate[r]) out << "  (degenerate)";
      out << "\n";
    }
  }
  dump.save(cfg.out_dir / "traces.dia");
  return kExitOk;
}

int classify(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

int cmd_sweep(const CommonArgs& base, const std::vector<std::string>& configs, std::ostream& out, std::ostream& err) {
  if (configs.empty()) throw UsageError("sweep needs at least one --config");
  // Parse everything up front so a bad file fails before any run starts.
  std::vector<ExperimentConfig> cfgs;
  std::map<std::string, std::size_t> names;
  const fs::path root = base.out.empty() ? fs::path("out") : fs::path(base.out);
  for (const auto& path : configs) {
    CommonArgs a = base;
    a.config = path;
    a.out.clear();
    auto cfg = load_config(a);
    const std::string stem = fs::path(path).stem().string();
    if (!names.emplace(stem, cfgs.size()).second) throw UsageError("two sweep configs share the name " + stem);
    cfg.out_dir = root / stem;
    cfgs.push_back(std::move(cfg));
  }
  std::vector<int> codes(cfgs.size(), 0);
  std::vector<std::ostringstream> outs(cfgs.size()), errs(cfgs.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    threads.emplace_back([&, i] {
      codes[i] = classify([&] { return cmd_train(cfgs[i], outs[i], errs[i]); }, errs[i]);
    });
  }
  for (auto& t : threads) t.join();
  int worst = kExitOk;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    out << "[" << cfgs[i].out_dir.filename().string() << "] exit " << codes[i] << "\n" << outs[i].str();
    err << errs[i].str();
    worst = std::max(worst, codes[i]);
  }
  return worst;
}

}  // namespace

std::optional<std::size_t> expected_stage_attention(const NetworkConfig& config, std::size_t stage) {
  const auto& spec = config.stages.at(stage);
  const std::size_t n = spec.channels, r = config.reduction_ratio;
  if (!config.attention_in_stage(stage)) return 0;
  switch (config.attention) {
    case AttentionKind::None: return 0;
    case AttentionKind::StandardLstm: return 8 * n * n;
    case AttentionKind::DiaLstm:
      if (n % r) return std::nullopt;
      return config.cells * 10 * n * n / r;
    case AttentionKind::Se:
      if (n % r) return std::nullopt;
      return spec.blocks * 2 * n * n / r;
  }
  return std::nullopt;
}

std::string params_table(const NetworkConfig& config, bool* all_match) {
  const auto bd = count_model_params(config);
  std::ostringstream os;
  char line[200];
  std::snprintf(line, sizeof line, "%-6s %8s %7s %12s %12s %14s %12s  %s\n", "stage", "channels", "blocks",
                "backbone", "attention", "attn_weights", "expected", "check");
  os << "attention " << to_string(config.attention) << ", r = " << config.reduction_ratio << ", cells = "
     << config.cells << "\n"
     << line;
  bool ok = true;
  for (std::size_t s = 0; s < config.stages.size(); ++s) {
    const auto& st = bd.stages[s];
    const auto expected = expected_stage_attention(config, s);
    std::string check = "n/a", exp_text = "-";
    if (expected) {
      exp_text = std::to_string(*expected);
      check = *expected == st.attention_weights_only ? "MATCH" : "MISMATCH";
      ok = ok && check == "MATCH";
    }
    std::snprintf(line, sizeof line, "%-6zu %8zu %7zu %12zu %12zu %14zu %12s  %s\n", s, config.stages[s].channels,
                  config.stages[s].blocks, st.backbone, st.attention, st.attention_weights_only, exp_text.c_str(),
                  check.c_str());
    os << line;
  }
  os << "stem " << bd.stem << "\n"
     << "classifier " << bd.classifier << "\n"
     << "total " << bd.total << "\n"
     << "attention_increment " << bd.attention_increment << "\n"
     << "attention_increment_weights_only " << bd.attention_weights_only << "\n";
  if (all_match) *all_match = ok;
  return os.str();
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"dianet: channel-attention residual networks with a stage-shared LSTM unit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads for the convolution kernels (0 = runtime default)");

  CommonArgs common;
  std::string checkpoint, scope = "all", split = "test";
  std::optional<std::size_t> stage;
  double corrupt = 0.0;
  std::vector<std::string> sweep_configs;

  const auto add_common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) sub->add_option("--config", common.config, "experiment config file");
    sub->add_option("--out", common.out, "output directory (overrides the config's `out`)");
    sub->add_option("--seed", common.seed, "overrides the config's seed");
  };
  auto* train_cmd = app.add_subcommand("train", "train a model; writes run.csv and checkpoint.dia");
  add_common(train_cmd);
  auto* eval_cmd = app.add_subcommand("eval", "top-1 accuracy of a checkpoint");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--split", split, "test | train")->check(CLI::IsMember({"test", "train"}));
  auto* params_cmd = app.add_subcommand("params", "parameter accounting with closed-form checks");
  add_common(params_cmd);
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  grad_cmd->add_option("--scope", scope, "ops | cell | block | network | all")
      ->check(CLI::IsMember({"ops", "cell", "block", "network", "all"}));
  grad_cmd->add_option("--seed", common.seed, "seed for the random test inputs");
  grad_cmd->add_option("--corrupt-grad", corrupt, "fault injection: offset added to one analytic gradient")
      ->group("");
  auto* analyze_cmd = app.add_subcommand("analyze", "feature-integration heatmaps of captured hidden states");
  add_common(analyze_cmd);
  analyze_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  analyze_cmd->add_option("--stage", stage, "0-based stage (default: every stage with a DIA unit)");
  auto* sweep_cmd = app.add_subcommand("sweep", "train several configs concurrently into <out>/<config name>/");
  add_common(sweep_cmd, false);
  sweep_cmd->add_option("--config", sweep_configs, "config files (repeatable)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (threads > 0) kernels::set_num_threads(threads);

  return classify([&]() -> int {
    if (*train_cmd) return cmd_train(load_config(common), out, err);
    if (*eval_cmd) return cmd_eval(common, checkpoint, split, out);
    if (*params_cmd) return cmd_params(load_config(common), out);
    if (*grad_cmd) return cmd_gradcheck(scope, common.seed.value_or(0), corrupt, out);
    if (*analyze_cmd) return cmd_analyze(common, checkpoint, stage, out);
    if (*sweep_cmd) return cmd_sweep(common, sweep_configs, out, err);
    throw UsageError("no subcommand");
  }, err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"dianet"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace dia::cli
