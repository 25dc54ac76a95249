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

#include "dia/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dia/attention.hpp"
#include "dia/backbone.hpp"
#include "dia/errors.hpp"
#include "dia/ops.hpp"
#include "dia/rng.hpp"

namespace dia {

GradScope parse_grad_scope(const std::string& name) {
  if (name == "ops") return GradScope::Ops;
  if (name == "cell") return GradScope::Cell;
  if (name == "block") return GradScope::Block;
  if (name == "network") return GradScope::Network;
  throw ConfigError("unknown gradcheck scope '" + name + "' (expected ops|cell|block|network)");
}

std::string to_string(GradScope scope) {
  switch (scope) {
    case GradScope::Ops: return "ops";
    case GradScope::Cell: return "cell";
    case GradScope::Block: return "block";
    case GradScope::Network: return "network";
  }
  return "?";
}

bool GradCheckReport::passed() const {
  return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.passed(); });
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& r : results) m = std::max(m, r.max_rel_error);
  return m;
}

GradCheckResult check_gradients(const std::string& name, const std::function<Tensor()>& loss,
                                const std::vector<Tensor>& wrt, double tolerance,
                                const GradCheckOptions& options) {
  for (auto t : wrt) {
    t.set_requires_grad();
    t.zero_grad();
  }
  loss().backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& t : wrt) {
    analytic.emplace_back(t.grad().begin(), t.grad().end());
    analytic.back().resize(t.numel(), 0.0);
  }
  if (!analytic.empty() && !analytic[0].empty()) analytic[0][0] += options.corrupt;

  Rng pick = Rng(options.seed).split(name);
  double max_diff = 0.0, max_a = 0.0, max_n = 0.0;
  std::size_t entries = 0;
  NoGradGuard guard;
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    Tensor t = wrt[k];
    std::vector<std::size_t> idx(t.numel());
    std::iota(idx.begin(), idx.end(), 0);
    if (options.max_entries_per_tensor && idx.size() > options.max_entries_per_tensor) {
      for (std::size_t i = 0; i < options.max_entries_per_tensor; ++i) {
        std::swap(idx[i], idx[i + pick.below(idx.size() - i)]);
      }
      idx.resize(options.max_entries_per_tensor);
    }
    auto data = t.data();
    for (auto i : idx) {
      const double orig = data[i];
      data[i] = orig + options.step;
      const double up = loss().item();
      data[i] = orig - options.step;
      const double down = loss().item();
      data[i] = orig;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[k][i];
      max_diff = std::max(max_diff, std::abs(a - numeric));
      max_a = std::max(max_a, std::abs(a));
      max_n = std::max(max_n, std::abs(numeric));
      ++entries;
    }
  }
  for (auto t : wrt) t.zero_grad();
  const double rel = max_diff / std::max({max_a, max_n, 1e-12});
  return {name, std::isfinite(rel) ? rel : INFINITY, tolerance, entries};
}

namespace {

constexpr double kOpsTol = 1e-6;
constexpr double kNetworkTol = 1e-4;

// Uniform in [-2,2], kept at least `gap` away from zero so relu kinks stay
// outside the finite-difference stencil.
Tensor random_tensor(Shape shape, Rng& rng, double gap = 0.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) {
    do {
      x = rng.uniform(-2.0, 2.0);
    } while (std::abs(x) < gap);
  }
  return Tensor::from_data(std::move(shape), std::move(v));
}

// sum(out * w) with fixed random weights, so every output entry matters.
Tensor project(const Tensor& out, const Tensor& w) { return sum(mul(out, w)); }

struct Suite {
  GradCheckReport report;
  GradCheckOptions options;
  Rng rng;

  void run(const std::string& name, const std::function<Tensor()>& loss, const std::vector<Tensor>& wrt,
           double tol = kOpsTol) {
    report.results.push_back(check_gradients(name, loss, wrt, tol, options));
  }
};

void ops_suite(Suite& s) {
  auto& rng = s.rng;
  {
    Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng), w = random_tensor({2, 3}, rng);
    s.run("add", [=] { return project(add(a, b), w); }, {a, b});
    s.run("mul", [=] { return project(mul(a, b), w); }, {a, b});
    s.run("scale", [=] { return project(scale(a, -1.7), w); }, {a});
    s.run("sum", [=] { return sum(a); }, {a});
    s.run("sigmoid", [=] { return project(sigmoid(a), w); }, {a});
    s.run("tanh", [=] { return project(dia::tanh(a), w); }, {a});
  }
  {
    Tensor a = random_tensor({2, 5}, rng, 1e-3), w = random_tensor({2, 5}, rng);
    s.run("relu", [=] { return project(relu(a), w); }, {a});
  }
  {
    Tensor x = random_tensor({3, 4}, rng), wt = random_tensor({5, 4}, rng), b = random_tensor({5}, rng);
    Tensor w = random_tensor({3, 5}, rng);
    s.run("linear", [=] { return project(linear(x, wt, b), w); }, {x, wt, b});
  }
  {
    Tensor x = random_tensor({2, 3, 5, 5}, rng), k = random_tensor({4, 3, 3, 3}, rng);
    Tensor w1 = random_tensor({2, 4, 5, 5}, rng), w2 = random_tensor({2, 4, 2, 2}, rng);
    s.run("conv2d.s1p1", [=] { return project(conv2d(x, k, 1, 1), w1); }, {x, k});
    s.run("conv2d.s2p0", [=] { return project(conv2d(x, k, 2, 0), w2); }, {x, k});
    Tensor k1 = random_tensor({4, 3, 1, 1}, rng);
    s.run("conv2d.1x1", [=] { return project(conv2d(x, k1, 1, 0), w1); }, {x, k1});
  }
  {
    Tensor x = random_tensor({2, 3, 4, 4}, rng), w = random_tensor({2, 3}, rng);
    s.run("global_average_pool", [=] { return project(global_average_pool(x), w); }, {x});
    Tensor sc = random_tensor({2, 3}, rng), w4 = random_tensor({2, 3, 4, 4}, rng);
    s.run("channelwise_mul", [=] { return project(channelwise_mul(x, sc), w4); }, {x, sc});
    Tensor g = random_tensor({3}, rng), b = random_tensor({3}, rng);
    s.run("batch_norm.train", [=] {
      auto st = BatchNormState::create(3);
      return project(batch_norm(x, g, b, st, true), w4);
    }, {x, g, b});
    s.run("batch_norm.eval", [=] {
      auto st = BatchNormState::create(3);
      st.running_mean.data()[1] = 0.3;
      st.running_var.data()[2] = 2.0;
      return project(batch_norm(x, g, b, st, false), w4);
    }, {x, g, b});
    s.run("batch_norm.no_affine", [=] {
      auto st = BatchNormState::create(3);
      return project(batch_norm(x, {}, {}, st, true), w4);
    }, {x});
    Tensor x2 = random_tensor({5, 3}, rng), w2 = random_tensor({5, 3}, rng);
    s.run("batch_norm.2d", [=] {
      auto st = BatchNormState::create(3);
      return project(batch_norm(x2, g, b, st, true), w2);
    }, {x2, g, b});
  }
  {
    Tensor logits = random_tensor({4, 5}, rng);
    const std::vector<int> labels{0, 3, 4, 1};
    s.run("softmax_cross_entropy", [=] { return softmax_cross_entropy(logits, labels); }, {logits});
  }
  {
    Tensor x = random_tensor({2, 2, 4, 4}, rng), k = random_tensor({3, 2, 3, 3}, rng);
    Tensor g = random_tensor({3}, rng), b = random_tensor({3}, rng), w = random_tensor({2, 3, 4, 4}, rng);
    s.run("conv_bn_relu", [=] {
      auto st = BatchNormState::create(3);
      return project(relu(batch_norm(conv2d(x, k, 1, 1), g, b, st, true)), w);
    }, {x, k, g, b});
  }
}

std::vector<Tensor> tensors_of(const std::vector<Parameter>& params) {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.value);
  return out;
}

void cell_suite(Suite& s) {
  auto& rng = s.rng;
  const std::size_t n = 6, r = 2, b = 3;
  for (auto act : {OutputActivation::Sigmoid, OutputActivation::Tanh}) {
    const std::string tag = act == OutputActivation::Sigmoid ? "sigmoid" : "tanh";
    auto cell = DiaLstmParams::create(n, r, act, rng.split("dia." + tag));
    // Randomize biases too so every gate sees a generic operating point.
    for (auto& bias : cell.bias) bias = random_tensor({n}, rng);
    auto wrt = tensors_of(cell.parameters(""));
    Tensor y = random_tensor({b, n}, rng), h0 = random_tensor({b, n}, rng), c0 = random_tensor({b, n}, rng);
    Tensor w = random_tensor({b, n}, rng);
    auto all = wrt;
    all.insert(all.end(), {y, h0, c0});
    s.run("dia_lstm_step." + tag, [=] {
      DiaState st{h0, c0, 0};
      auto next = dia_lstm_step(y, st, cell);
      return add(project(next.h, w), project(next.c, w));
    }, all);

    std::vector<Tensor> ys;
    for (int t = 0; t < 5; ++t) ys.push_back(random_tensor({b, n}, rng));
    auto unroll = wrt;
    unroll.insert(unroll.end(), ys.begin(), ys.end());
    s.run("dia_lstm_unroll5." + tag, [=] {
      DiaState st = DiaState::zeros(b, n);
      Tensor total = Tensor::scalar(0.0);
      for (const auto& yt : ys) {
        st = dia_lstm_step(yt, st, cell);
        total = add(total, project(st.h, w));
      }
      return total;
    }, unroll);
  }
  {
    auto lstm = StandardLstmParams::create(n, rng.split("lstm"));
    auto wrt = tensors_of(lstm.parameters(""));
    std::vector<Tensor> ys;
    for (int t = 0; t < 5; ++t) ys.push_back(random_tensor({b, n}, rng));
    Tensor w = random_tensor({b, n}, rng);
    wrt.insert(wrt.end(), ys.begin(), ys.end());
    s.run("standard_lstm_unroll5", [=] {
      DiaState st = DiaState::zeros(b, n);
      Tensor total = Tensor::scalar(0.0);
      for (const auto& yt : ys) {
        st = standard_lstm_step(yt, st, lstm);
        total = add(total, project(st.h, w));
      }
      return total;
    }, wrt);
  }
  {
    std::vector<DiaLstmParams> cells{DiaLstmParams::create(n, r, OutputActivation::Sigmoid, rng.split("stack0")),
                                     DiaLstmParams::create(n, r, OutputActivation::Sigmoid, rng.split("stack1"))};
    std::vector<Tensor> wrt;
    for (const auto& c : cells) {
      auto t = tensors_of(c.parameters(""));
      wrt.insert(wrt.end(), t.begin(), t.end());
    }
    Tensor y = random_tensor({b, n}, rng), w = random_tensor({b, n}, rng);
    wrt.push_back(y);
    s.run("stack_cells.2", [=] {
      std::vector<DiaState> st(2, DiaState::zeros(b, n));
      auto res = stack_cells(cells, y, st);
      auto res2 = stack_cells(cells, y, res.states);
      return project(res2.h_top, w);
    }, wrt);
  }
  {
    auto se = SeParams::create(n, r, 0, rng.split("se"));
    Tensor a = random_tensor({b, n, 3, 3}, rng), w = random_tensor({b, n}, rng);
    auto wrt = tensors_of(se.parameters(""));
    wrt.push_back(a);
    s.run("se_forward", [=] { return project(se_forward(a, se), w); }, wrt);
  }
}

NetworkConfig tiny_config(AttentionKind attention) {
  NetworkConfig cfg;
  cfg.stages = {{4, 2, 1}, {6, 2, 2}};
  cfg.attention = attention;
  cfg.reduction_ratio = 2;
  cfg.classes = 2;
  return cfg;
}

void block_suite(Suite& s) {
  struct Case {
    std::string name;
    NetworkConfig cfg;
  };
  std::vector<Case> cases;
  cases.push_back({"block.basic.dia", tiny_config(AttentionKind::DiaLstm)});
  {
    auto c = tiny_config(AttentionKind::DiaLstm);
    c.block = BlockKind::Bottleneck;
    c.stages = {{8, 2, 1}, {8, 2, 2}};
    c.f_ext = FeatureExtractor::BnGap;
    cases.push_back({"block.bottleneck.dia.bn_gap", c});
  }
  cases.push_back({"block.basic.se", tiny_config(AttentionKind::Se)});
  cases.push_back({"block.basic.standard_lstm", tiny_config(AttentionKind::StandardLstm)});
  {
    auto c = tiny_config(AttentionKind::DiaLstm);
    c.skip_removal_fraction = 1.0;
    cases.push_back({"block.basic.dia.no_skip", c});
  }
  for (auto& cs : cases) {
    auto net = std::make_shared<Network>(cs.cfg, s.rng.next_u64());
    const std::size_t stage = 1, ch_in = cs.cfg.stages[0].channels, ch = cs.cfg.stages[1].channels;
    Tensor x = random_tensor({2, ch_in, 6, 6}, s.rng);
    Tensor w = random_tensor({2, ch, 3, 3}, s.rng);
    std::vector<Tensor> wrt{x};
    for (const auto& p : net->parameters()) {
      // The downsampling block 0 of stage 1 plus the stage's attention unit.
      if (p.id.rfind("stage1.block0.", 0) == 0 || p.id.rfind("stage1.attention.", 0) == 0) wrt.push_back(p.value);
    }
    s.run(cs.name, [=] {
      ForwardOptions fo;
      fo.training = true;
      auto ctx = net->fresh_context(stage, 2);
      auto out = net->residual_block_forward(stage, 0, x, ctx, fo);
      return project(out.output, w);
    }, wrt);
  }
}

void network_suite(Suite& s) {
  for (auto kind : {AttentionKind::DiaLstm, AttentionKind::None}) {
    auto cfg = tiny_config(kind);
    auto net = std::make_shared<Network>(cfg, s.rng.next_u64());
    Tensor images = random_tensor({3, 3, 8, 8}, s.rng);
    const std::vector<int> labels{0, 1, 1};
    s.run("network." + to_string(kind), [=] {
      ForwardOptions fo;
      fo.training = true;
      return softmax_cross_entropy(net->forward(images, fo).logits, labels);
    }, tensors_of(net->parameters()), kNetworkTol);
  }
}

}  // namespace

GradCheckReport run_gradcheck(GradScope scope, std::uint64_t seed, double corrupt) {
  Suite s{{scope, {}}, {}, Rng(seed).split("gradcheck").split(to_string(scope))};
  s.options.seed = seed;
  s.options.corrupt = corrupt;
  switch (scope) {
    case GradScope::Ops: ops_suite(s); break;
    case GradScope::Cell: cell_suite(s); break;
    case GradScope::Block: block_suite(s); break;
    case GradScope::Network:
      s.options.max_entries_per_tensor = 24;
      network_suite(s);
      break;
  }
  return s.report;
}

}  // namespace dia
