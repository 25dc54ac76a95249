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

#include "dia/attention.hpp"

#include <map>
#include <stdexcept>

#include "dia/init.hpp"
#include "dia/ops.hpp"

namespace dia {

namespace {

constexpr std::array<const char*, 4> kGateNames{"i", "f", "o", "g"};

std::map<std::string, Tensor> materialize(const std::vector<MatrixLayout>& layout, const Rng* rng) {
  std::map<std::string, Tensor> out;
  for (const auto& m : layout) {
    if (m.is_bias) {
      out[m.name] = Tensor::full(m.shape, rng && m.name == "bias.f" ? 1.0 : 0.0);
    } else if (rng) {
      out[m.name] = init::uniform_fan_in(m.shape, rng->split(m.name));
    } else {
      out[m.name] = Tensor::zeros(m.shape);
    }
    out[m.name].set_requires_grad();
  }
  return out;
}

void append_gate_layout(std::vector<MatrixLayout>& layout, std::size_t channels, std::size_t in_width) {
  for (const char* stream : {"gate_input.", "gate_hidden."})
    for (const char* g : kGateNames) layout.push_back({std::string(stream) + g, {channels, in_width}, false});
  for (const char* g : kGateNames) layout.push_back({std::string("bias.") + g, {channels}, true});
}

template <typename P>
void assign_gates(P& p, std::map<std::string, Tensor>& m) {
  for (std::size_t k = 0; k < 4; ++k) {
    p.gate_input[k] = m.at(std::string("gate_input.") + kGateNames[k]);
    p.gate_hidden[k] = m.at(std::string("gate_hidden.") + kGateNames[k]);
    p.bias[k] = m.at(std::string("bias.") + kGateNames[k]);
  }
}

template <typename P>
void push_gate_params(const P& p, const std::string& prefix, std::vector<Parameter>& out) {
  for (std::size_t k = 0; k < 4; ++k) out.push_back({prefix + "gate_input." + kGateNames[k], p.gate_input[k]});
  for (std::size_t k = 0; k < 4; ++k) out.push_back({prefix + "gate_hidden." + kGateNames[k], p.gate_hidden[k]});
  for (std::size_t k = 0; k < 4; ++k) out.push_back({prefix + "bias." + kGateNames[k], p.bias[k]});
}

void check_state(const Tensor& y, const DiaState& state, std::size_t channels, const char* op) {
  if (y.rank() != 2 || y.dim(1) != channels) {
    throw ShapeError(std::string(op) + ": input " + shape_to_string(y.shape()) + " expected [B," +
                     std::to_string(channels) + "]");
  }
  if (state.h.shape() != y.shape() || state.c.shape() != y.shape()) {
    throw ShapeError(std::string(op) + ": state " + shape_to_string(state.h.shape()) + "/" +
                     shape_to_string(state.c.shape()) + " does not match input " +
                     shape_to_string(y.shape()));
  }
  if (!y.all_finite()) throw std::domain_error(std::string(op) + ": non-finite input");
}

Tensor output_activation(const Tensor& c, OutputActivation act) {
  return act == OutputActivation::Sigmoid ? sigmoid(c) : tanh(c);
}

// Shared gate algebra once both streams have been projected to the gate inputs.
DiaState gate_update(const Tensor& from_input_stream, const Tensor& from_hidden_stream,
                     const DiaState& state, const std::array<Tensor, 4>& gate_input,
                     const std::array<Tensor, 4>& gate_hidden, const std::array<Tensor, 4>& bias,
                     OutputActivation act) {
  std::array<Tensor, 4> pre;
  for (std::size_t k = 0; k < 4; ++k) {
    pre[k] = add(linear(from_input_stream, gate_input[k], bias[k]),
                 linear(from_hidden_stream, gate_hidden[k]));
  }
  const Tensor i = sigmoid(pre[kInputGate]);
  const Tensor f = sigmoid(pre[kForgetGate]);
  const Tensor o = sigmoid(pre[kOutputGate]);
  const Tensor g = tanh(pre[kCandidate]);
  DiaState next;
  next.c = add(mul(f, state.c), mul(i, g));
  next.h = mul(o, output_activation(next.c, act));
  next.step = state.step + 1;
  return next;
}

}  // namespace

std::size_t reduced_width(std::size_t channels, std::size_t reduction_ratio) {
  if (reduction_ratio == 0) throw std::invalid_argument("reduction ratio must be >= 1");
  return (channels + reduction_ratio - 1) / reduction_ratio;
}

DiaState DiaState::zeros(std::size_t batch, std::size_t channels) {
  return {Tensor::zeros({batch, channels}), Tensor::zeros({batch, channels}), 0};
}

std::vector<MatrixLayout> DiaLstmParams::layout(std::size_t channels, std::size_t reduction_ratio) {
  const std::size_t r = reduced_width(channels, reduction_ratio);
  std::vector<MatrixLayout> layout{{"reduce_input", {r, channels}, false},
                                   {"reduce_hidden", {r, channels}, false}};
  append_gate_layout(layout, channels, r);
  return layout;
}

namespace {
DiaLstmParams build_dia(std::size_t channels, std::size_t ratio, OutputActivation act, const Rng* rng) {
  auto m = materialize(DiaLstmParams::layout(channels, ratio), rng);
  DiaLstmParams p;
  p.channels = channels;
  p.reduction_ratio = ratio;
  p.output_activation = act;
  p.reduce_input = m.at("reduce_input");
  p.reduce_hidden = m.at("reduce_hidden");
  assign_gates(p, m);
  return p;
}
}  // namespace

DiaLstmParams DiaLstmParams::create(std::size_t channels, std::size_t reduction_ratio,
                                    OutputActivation act, const Rng& rng) {
  return build_dia(channels, reduction_ratio, act, &rng);
}

DiaLstmParams DiaLstmParams::zeros(std::size_t channels, std::size_t reduction_ratio,
                                   OutputActivation act) {
  return build_dia(channels, reduction_ratio, act, nullptr);
}

std::vector<Parameter> DiaLstmParams::parameters(const std::string& prefix) const {
  std::vector<Parameter> out{{prefix + "reduce_input", reduce_input},
                             {prefix + "reduce_hidden", reduce_hidden}};
  push_gate_params(*this, prefix, out);
  return out;
}

std::vector<MatrixLayout> StandardLstmParams::layout(std::size_t channels) {
  std::vector<MatrixLayout> layout;
  append_gate_layout(layout, channels, channels);
  return layout;
}

StandardLstmParams StandardLstmParams::create(std::size_t channels, const Rng& rng) {
  auto m = materialize(layout(channels), &rng);
  StandardLstmParams p;
  p.channels = channels;
  assign_gates(p, m);
  return p;
}

StandardLstmParams StandardLstmParams::zeros(std::size_t channels) {
  auto m = materialize(layout(channels), nullptr);
  StandardLstmParams p;
  p.channels = channels;
  assign_gates(p, m);
  return p;
}

std::vector<Parameter> StandardLstmParams::parameters(const std::string& prefix) const {
  std::vector<Parameter> out;
  push_gate_params(*this, prefix, out);
  return out;
}

std::vector<MatrixLayout> SeParams::layout(std::size_t channels, std::size_t reduction_ratio) {
  const std::size_t r = reduced_width(channels, reduction_ratio);
  return {{"reduce", {r, channels}, false}, {"expand", {channels, r}, false}};
}

SeParams SeParams::create(std::size_t channels, std::size_t reduction_ratio, std::size_t block_index,
                          const Rng& rng) {
  auto m = materialize(layout(channels, reduction_ratio), &rng);
  return {channels, reduction_ratio, block_index, m.at("reduce"), m.at("expand")};
}

SeParams SeParams::zeros(std::size_t channels, std::size_t reduction_ratio) {
  auto m = materialize(layout(channels, reduction_ratio), nullptr);
  return {channels, reduction_ratio, 0, m.at("reduce"), m.at("expand")};
}

std::vector<Parameter> SeParams::parameters(const std::string& prefix) const {
  return {{prefix + "reduce", reduce}, {prefix + "expand", expand}};
}

DiaState dia_lstm_step(const Tensor& y, const DiaState& state, const DiaLstmParams& params) {
  check_state(y, state, params.channels, "dia_lstm_step");
  const Tensor u_y = relu(linear(y, params.reduce_input));
  const Tensor u_h = relu(linear(state.h, params.reduce_hidden));
  return gate_update(u_y, u_h, state, params.gate_input, params.gate_hidden, params.bias,
                     params.output_activation);
}

DiaState standard_lstm_step(const Tensor& y, const DiaState& state, const StandardLstmParams& params) {
  check_state(y, state, params.channels, "standard_lstm_step");
  return gate_update(y, state.h, state, params.gate_input, params.gate_hidden, params.bias,
                     params.output_activation);
}

Tensor se_forward(const Tensor& a, const SeParams& params) {
  if (a.rank() != 4 || a.dim(1) != params.channels) {
    throw ShapeError("se_forward: features " + shape_to_string(a.shape()) + " expected [B," +
                     std::to_string(params.channels) + ",H,W]");
  }
  const Tensor pooled = global_average_pool(a);
  return sigmoid(linear(relu(linear(pooled, params.reduce)), params.expand));
}

StackResult stack_cells(std::span<const DiaLstmParams> cells, const Tensor& y,
                        std::span<const DiaState> states) {
  if (cells.empty()) throw std::invalid_argument("stack_cells: empty stack");
  if (states.size() != cells.size()) {
    throw std::invalid_argument("stack_cells: " + std::to_string(states.size()) + " states for " +
                                std::to_string(cells.size()) + " cells");
  }
  StackResult result;
  result.states.reserve(cells.size());
  Tensor input = y;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    result.states.push_back(dia_lstm_step(input, states[k], cells[k]));
    input = result.states.back().h;
  }
  result.h_top = input;
  return result;
}

std::size_t count_params(AttentionUnitKind unit, std::size_t channels, std::size_t reduction_ratio,
                         bool include_bias) {
  std::vector<MatrixLayout> layout;
  switch (unit) {
    case AttentionUnitKind::DiaLstm: layout = DiaLstmParams::layout(channels, reduction_ratio); break;
    case AttentionUnitKind::StandardLstm: layout = StandardLstmParams::layout(channels); break;
    case AttentionUnitKind::Se: layout = SeParams::layout(channels, reduction_ratio); break;
  }
  std::size_t total = 0;
  for (const auto& m : layout) {
    if (m.is_bias && !include_bias) continue;
    total += shape_numel(m.shape);
  }
  return total;
}

}  // namespace dia
