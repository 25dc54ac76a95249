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

// Channel-attention units fed by pooled block features.
//
// DiaLstmParams is the modified LSTM shared by every block of a stage:
//
//   u_y = relu(R_y y)          u_h = relu(R_h h_{t-1})        R_*: [N/r x N]
//   i,f,o = sigmoid(G_y* u_y + G_h* u_h + b_*)                 G_*: [N x N/r]
//   g     = tanh(G_yg u_y + G_hg u_h + b_g)
//   c_t   = f * c_{t-1} + i * g
//   h_t   = o * act(c_t)          act = sigmoid (default) or tanh
//
// Each input stream has its own reduction, shared by that stream's four gate
// transforms, which gives 2*N^2/r + 8*N^2/r = 10*N^2/r weights. The standard
// LSTM baseline has no reductions (8*N^2 weights) and tanh output. The SE
// baseline is one independent two-layer bottleneck per block.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dia/rng.hpp"
#include "dia/tensor.hpp"

namespace dia {

enum class OutputActivation { Sigmoid, Tanh };
enum class AttentionUnitKind { DiaLstm, StandardLstm, Se };

/// Gate slots in every four-gate array.
enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kOutputGate = 2, kCandidate = 3 };

/// One stored matrix or vector of an attention unit.
struct MatrixLayout {
  std::string name;
  Shape shape;
  bool is_bias = false;
};

/// ceil(N / r); equals N / r whenever r divides N.
std::size_t reduced_width(std::size_t channels, std::size_t reduction_ratio);

struct DiaState {
  Tensor h;
  Tensor c;
  std::size_t step = 0;

  static DiaState zeros(std::size_t batch, std::size_t channels);
};

struct DiaLstmParams {
  std::size_t channels = 0;
  std::size_t reduction_ratio = 1;
  OutputActivation output_activation = OutputActivation::Sigmoid;
  Tensor reduce_input;
  Tensor reduce_hidden;
  std::array<Tensor, 4> gate_input;
  std::array<Tensor, 4> gate_hidden;
  std::array<Tensor, 4> bias;

  std::size_t reduced() const { return reduced_width(channels, reduction_ratio); }

  static std::vector<MatrixLayout> layout(std::size_t channels, std::size_t reduction_ratio);
  /// Weights U(+-1/sqrt(fan_in)); forget bias 1, other biases 0.
  static DiaLstmParams create(std::size_t channels, std::size_t reduction_ratio,
                              OutputActivation act, const Rng& rng);
  static DiaLstmParams zeros(std::size_t channels, std::size_t reduction_ratio,
                             OutputActivation act);

  std::vector<Parameter> parameters(const std::string& prefix) const;
};

struct StandardLstmParams {
  std::size_t channels = 0;
  OutputActivation output_activation = OutputActivation::Tanh;
  std::array<Tensor, 4> gate_input;
  std::array<Tensor, 4> gate_hidden;
  std::array<Tensor, 4> bias;

  static std::vector<MatrixLayout> layout(std::size_t channels);
  static StandardLstmParams create(std::size_t channels, const Rng& rng);
  static StandardLstmParams zeros(std::size_t channels);

  std::vector<Parameter> parameters(const std::string& prefix) const;
};

struct SeParams {
  std::size_t channels = 0;
  std::size_t reduction_ratio = 1;
  std::size_t block_index = 0;
  Tensor reduce;  // [N/r x N]
  Tensor expand;  // [N x N/r]

  static std::vector<MatrixLayout> layout(std::size_t channels, std::size_t reduction_ratio);
  static SeParams create(std::size_t channels, std::size_t reduction_ratio, std::size_t block_index,
                         const Rng& rng);
  static SeParams zeros(std::size_t channels, std::size_t reduction_ratio);

  std::vector<Parameter> parameters(const std::string& prefix) const;
};

/// One DIA-LSTM step on pooled features y [B,N].
/// Throws ShapeError on dimension mismatch and std::domain_error on non-finite y.
DiaState dia_lstm_step(const Tensor& y, const DiaState& state, const DiaLstmParams& params);

DiaState standard_lstm_step(const Tensor& y, const DiaState& state, const StandardLstmParams& params);

/// sigmoid(W2 relu(W1 GAP(a))) for a [B,N,H,W]; returns gates [B,N].
Tensor se_forward(const Tensor& a, const SeParams& params);

struct StackResult {
  Tensor h_top;
  std::vector<DiaState> states;
};

/// Cell k consumes the hidden output of cell k-1; cell 0 consumes y.
StackResult stack_cells(std::span<const DiaLstmParams> cells, const Tensor& y,
                        std::span<const DiaState> states);

/// Exact count by enumerating the stored matrices. Without biases this equals
/// 10*N^2/r (DIA-LSTM, r | N), 8*N^2 (standard LSTM) and 2*N^2/r (SE, r | N).
std::size_t count_params(AttentionUnitKind unit, std::size_t channels, std::size_t reduction_ratio,
                         bool include_bias);

}  // namespace dia
