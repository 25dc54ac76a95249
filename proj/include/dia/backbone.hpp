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

// Residual network whose blocks are recalibrated by a channel-attention vector:
//
//   a_t     = f(x_t)                          residual branch (conv-BN-relu ...)
//   h_t     = attention(a_t, shared state)    DIA-LSTM / standard LSTM / SE / none
//   x_{t+1} = relu(skip(x_t) + a_t * h_t)     skip dropped for removed shortcuts
//
// A stage's recurrent unit is one parameter set shared by all of its blocks;
// its (h, c) state starts at zero on every forward pass of the stage.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dia/attention.hpp"
#include "dia/ops.hpp"
#include "dia/trace.hpp"

namespace dia {

enum class BlockKind { Basic, Bottleneck };
enum class AttentionKind { None, Se, DiaLstm, StandardLstm };
enum class FeatureExtractor { Gap, BnGap };

struct StageSpec {
  std::size_t channels = 16;
  std::size_t blocks = 3;
  std::size_t stride = 1;

  bool operator==(const StageSpec&) const = default;
};

struct NetworkConfig {
  std::vector<StageSpec> stages{{16, 3, 1}, {32, 3, 2}, {64, 3, 2}};
  BlockKind block = BlockKind::Basic;
  AttentionKind attention = AttentionKind::DiaLstm;
  std::size_t reduction_ratio = 4;
  std::size_t cells = 1;
  OutputActivation output_activation = OutputActivation::Sigmoid;
  FeatureExtractor f_ext = FeatureExtractor::Gap;
  bool use_batch_norm = true;
  double skip_removal_fraction = 0.0;
  /// Stages that get the attention unit; nullopt means every stage.
  std::optional<std::set<std::size_t>> attention_stages;
  std::size_t classes = 10;
  std::size_t in_channels = 3;
  /// 0 selects the first stage's width (basic) or a quarter of it (bottleneck).
  std::size_t stem_channels = 0;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  bool attention_in_stage(std::size_t stage) const;
  /// floor(skip_removal_fraction * blocks), taken from the end of the stage.
  std::size_t removed_skips(std::size_t stage) const;
  bool skip_removed(std::size_t stage, std::size_t block) const;
  std::size_t resolved_stem_channels() const;
};

std::string to_string(BlockKind kind);
std::string to_string(AttentionKind kind);
std::string to_string(FeatureExtractor kind);
std::string to_string(OutputActivation kind);

/// Convolution followed by optional batch norm; no bias.
struct ConvBn {
  Tensor weight;
  Tensor gamma;
  Tensor beta;
  BatchNormState bn;
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool use_bn = true;

  static ConvBn create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                       std::size_t stride, bool use_bn, const Rng& rng);
  Tensor forward(const Tensor& x, bool training);
  void collect(const std::string& prefix, std::vector<Parameter>& params,
               std::vector<Buffer>& buffers) const;
};

struct ResidualBlock {
  std::vector<ConvBn> layers;
  std::optional<ConvBn> projection;
  BatchNormState f_ext_bn;
  bool skip_removed = false;

  /// a_t; a final relu is applied only after the skip sum.
  Tensor residual(const Tensor& x, bool training);
};

struct BlockOutputs {
  Tensor features;   // a_t
  Tensor attention;  // h_t, undefined without attention
  Tensor output;     // x_{t+1}
  double activation_norm = 0.0;
  /// Set to "features", "attention" or "output" at the first non-finite value.
  std::optional<std::string> non_finite;
};

struct ExplosionSite {
  int stage = -1;  // -1: stem or classifier
  int block = -1;
  std::string where;
};

struct ForwardOptions {
  bool training = false;
  bool capture = false;
  /// Replaces every attention vector with ones (equivalence checks).
  bool force_unit_attention = false;
};

struct NetworkOutput {
  Tensor logits;
  std::vector<HiddenStateTrace> traces;
  std::vector<std::vector<double>> activation_norms;  // [stage][block]
  std::optional<ExplosionSite> explosion;
};

/// Attention unit instances of one stage. Recurrent kinds hold a single
/// parameter set used by every block; SE holds one instance per block.
struct StageAttention {
  AttentionKind kind = AttentionKind::None;
  std::vector<DiaLstmParams> dia_cells;
  std::optional<StandardLstmParams> lstm;
  std::vector<SeParams> se;
};

/// Per-forward recurrent state of one stage.
struct AttentionContext {
  std::vector<DiaState> states;
};

struct Stage {
  StageSpec spec;
  std::vector<ResidualBlock> blocks;
  StageAttention attention;
};

struct StageOutput {
  Tensor features;
  HiddenStateTrace trace;
  std::vector<double> activation_norms;
  std::optional<ExplosionSite> explosion;
};

class Network {
 public:
  Network(NetworkConfig config, std::uint64_t seed);

  NetworkOutput forward(const Tensor& images, const ForwardOptions& options = {});

  BlockOutputs residual_block_forward(std::size_t stage, std::size_t block, const Tensor& x,
                                      AttentionContext& context, const ForwardOptions& options);
  StageOutput stage_forward(std::size_t stage, const Tensor& x, const ForwardOptions& options);
  AttentionContext fresh_context(std::size_t stage, std::size_t batch) const;

  std::vector<Parameter> parameters() const;
  std::vector<Buffer> buffers() const;
  const NetworkConfig& config() const { return config_; }
  std::size_t num_stages() const { return stages_.size(); }
  Stage& stage(std::size_t s) { return stages_.at(s); }

 private:
  NetworkConfig config_;
  ConvBn stem_;
  std::vector<Stage> stages_;
  Tensor classifier_weight_;
  Tensor classifier_bias_;
};

struct StageParamCount {
  std::size_t backbone = 0;
  std::size_t attention = 0;               // with biases
  std::size_t attention_weights_only = 0;  // biases omitted
};

struct ParamBreakdown {
  std::size_t stem = 0;
  std::vector<StageParamCount> stages;
  std::size_t classifier = 0;
  std::size_t total = 0;
  std::size_t attention_increment = 0;
  std::size_t attention_weights_only = 0;
};

/// Exact enumeration over a constructed model's parameters.
ParamBreakdown count_model_params(const NetworkConfig& config);

}  // namespace dia
