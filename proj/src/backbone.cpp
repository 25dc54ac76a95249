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

#include "dia/backbone.hpp"

#include <cmath>
#include <limits>

#include "dia/init.hpp"

namespace dia {

namespace {

std::string stage_prefix(std::size_t s) { return "stage" + std::to_string(s) + "."; }
std::string block_prefix(std::size_t s, std::size_t b) {
  return stage_prefix(s) + "block" + std::to_string(b) + ".";
}

double rms(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += v * v;
  return std::sqrt(acc / static_cast<double>(t.numel()));
}

}  // namespace

std::string to_string(BlockKind kind) { return kind == BlockKind::Basic ? "basic" : "bottleneck"; }

std::string to_string(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::None: return "none";
    case AttentionKind::Se: return "se";
    case AttentionKind::DiaLstm: return "dia_lstm";
    case AttentionKind::StandardLstm: return "standard_lstm";
  }
  return "?";
}

std::string to_string(FeatureExtractor kind) { return kind == FeatureExtractor::Gap ? "gap" : "bn_gap"; }

std::string to_string(OutputActivation kind) {
  return kind == OutputActivation::Sigmoid ? "sigmoid" : "tanh";
}

void NetworkConfig::validate() const {
  if (stages.empty()) throw ConfigError("network needs at least one stage");
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto& st = stages[s];
    const std::string where = "stage " + std::to_string(s) + ": ";
    if (st.channels == 0) throw ConfigError(where + "channels must be >= 1");
    if (st.blocks == 0) throw ConfigError(where + "block count must be >= 1");
    if (st.stride == 0) throw ConfigError(where + "stride must be >= 1");
    if (block == BlockKind::Bottleneck && st.channels < 4) {
      throw ConfigError(where + "bottleneck blocks need at least 4 channels");
    }
  }
  if (reduction_ratio == 0) throw ConfigError("reduction_ratio must be >= 1");
  if (cells == 0) throw ConfigError("cells must be >= 1");
  if (cells > 1 && attention != AttentionKind::DiaLstm) {
    throw ConfigError("stacked cells are only defined for attention = dia_lstm");
  }
  if (!(skip_removal_fraction >= 0.0 && skip_removal_fraction <= 1.0)) {
    throw ConfigError("skip_removal_fraction must lie in [0,1]");
  }
  if (attention_stages) {
    for (auto s : *attention_stages) {
      if (s >= stages.size()) {
        throw ConfigError("attention stage index " + std::to_string(s) + " out of range");
      }
    }
  }
  if (classes < 2) throw ConfigError("classes must be >= 2");
  if (in_channels == 0) throw ConfigError("in_channels must be >= 1");
}

bool NetworkConfig::attention_in_stage(std::size_t stage) const {
  if (attention == AttentionKind::None) return false;
  return !attention_stages || attention_stages->count(stage) > 0;
}

std::size_t NetworkConfig::removed_skips(std::size_t stage) const {
  const double blocks = static_cast<double>(stages.at(stage).blocks);
  // Guard against 1/3 * 9 landing a hair below 3.
  return static_cast<std::size_t>(std::floor(skip_removal_fraction * blocks + 1e-9));
}

bool NetworkConfig::skip_removed(std::size_t stage, std::size_t block) const {
  return block + removed_skips(stage) >= stages.at(stage).blocks;
}

std::size_t NetworkConfig::resolved_stem_channels() const {
  if (stem_channels > 0) return stem_channels;
  const std::size_t first = stages.front().channels;
  return block == BlockKind::Basic ? first : std::max<std::size_t>(1, first / 4);
}

ConvBn ConvBn::create(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                      std::size_t stride, bool use_bn, const Rng& rng) {
  ConvBn layer;
  layer.weight = init::kaiming_normal({out_channels, in_channels, kernel, kernel}, rng.split("weight"));
  layer.weight.set_requires_grad();
  layer.stride = stride;
  layer.padding = kernel / 2;
  layer.use_bn = use_bn;
  if (use_bn) {
    layer.gamma = Tensor::full({out_channels}, 1.0).set_requires_grad();
    layer.beta = Tensor::zeros({out_channels}).set_requires_grad();
    layer.bn = BatchNormState::create(out_channels);
  }
  return layer;
}

Tensor ConvBn::forward(const Tensor& x, bool training) {
  Tensor y = conv2d(x, weight, stride, padding);
  if (use_bn) y = batch_norm(y, gamma, beta, bn, training);
  return y;
}

void ConvBn::collect(const std::string& prefix, std::vector<Parameter>& params,
                     std::vector<Buffer>& buffers) const {
  params.push_back({prefix + "weight", weight});
  if (use_bn) {
    params.push_back({prefix + "bn.gamma", gamma});
    params.push_back({prefix + "bn.beta", beta});
    buffers.push_back({prefix + "bn.running_mean", bn.running_mean});
    buffers.push_back({prefix + "bn.running_var", bn.running_var});
  }
}

Tensor ResidualBlock::residual(const Tensor& x, bool training) {
  Tensor y = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    y = layers[i].forward(y, training);
    if (i + 1 < layers.size()) y = relu(y);
  }
  return y;
}

Network::Network(NetworkConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const Rng root = Rng(seed).split("init");
  const bool bn = config_.use_batch_norm;

  std::size_t in = config_.resolved_stem_channels();
  stem_ = ConvBn::create(config_.in_channels, in, 3, 1, bn, root.split("stem.conv"));

  for (std::size_t s = 0; s < config_.stages.size(); ++s) {
    const StageSpec spec = config_.stages[s];
    Stage stage;
    stage.spec = spec;
    for (std::size_t b = 0; b < spec.blocks; ++b) {
      const std::string p = block_prefix(s, b);
      const std::size_t stride = b == 0 ? spec.stride : 1;
      ResidualBlock block;
      if (config_.block == BlockKind::Basic) {
        block.layers.push_back(ConvBn::create(in, spec.channels, 3, stride, bn, root.split(p + "conv0")));
        block.layers.push_back(ConvBn::create(spec.channels, spec.channels, 3, 1, bn, root.split(p + "conv1")));
      } else {
        const std::size_t inner = spec.channels / 4;
        block.layers.push_back(ConvBn::create(in, inner, 1, 1, bn, root.split(p + "conv0")));
        block.layers.push_back(ConvBn::create(inner, inner, 3, stride, bn, root.split(p + "conv1")));
        block.layers.push_back(ConvBn::create(inner, spec.channels, 1, 1, bn, root.split(p + "conv2")));
      }
      if (stride != 1 || in != spec.channels) {
        block.projection = ConvBn::create(in, spec.channels, 1, stride, bn, root.split(p + "proj"));
      }
      block.f_ext_bn = BatchNormState::create(spec.channels);
      block.skip_removed = config_.skip_removed(s, b);
      stage.blocks.push_back(std::move(block));
      in = spec.channels;
    }

    if (config_.attention_in_stage(s)) {
      auto& att = stage.attention;
      att.kind = config_.attention;
      const std::string p = stage_prefix(s) + "attention.";
      switch (config_.attention) {
        case AttentionKind::DiaLstm:
          for (std::size_t k = 0; k < config_.cells; ++k) {
            att.dia_cells.push_back(DiaLstmParams::create(spec.channels, config_.reduction_ratio,
                                                          config_.output_activation,
                                                          root.split(p + "cell" + std::to_string(k))));
          }
          break;
        case AttentionKind::StandardLstm:
          // The baseline keeps its tanh output; output_activation applies to DIA cells.
          att.lstm = StandardLstmParams::create(spec.channels, root.split(p + "lstm"));
          break;
        case AttentionKind::Se:
          for (std::size_t b = 0; b < spec.blocks; ++b) {
            att.se.push_back(SeParams::create(spec.channels, config_.reduction_ratio, b,
                                              root.split(block_prefix(s, b) + "se")));
          }
          break;
        case AttentionKind::None: break;
      }
    }
    stages_.push_back(std::move(stage));
  }

  classifier_weight_ = init::uniform_fan_in({config_.classes, in}, root.split("classifier.weight"));
  classifier_weight_.set_requires_grad();
  classifier_bias_ = Tensor::zeros({config_.classes}).set_requires_grad();
}

AttentionContext Network::fresh_context(std::size_t stage, std::size_t batch) const {
  const auto& st = stages_.at(stage);
  AttentionContext ctx;
  std::size_t n = 0;
  if (st.attention.kind == AttentionKind::DiaLstm) n = st.attention.dia_cells.size();
  if (st.attention.kind == AttentionKind::StandardLstm) n = 1;
  for (std::size_t k = 0; k < n; ++k) ctx.states.push_back(DiaState::zeros(batch, st.spec.channels));
  return ctx;
}

BlockOutputs Network::residual_block_forward(std::size_t s, std::size_t t, const Tensor& x,
                                             AttentionContext& context, const ForwardOptions& options) {
  auto& stage = stages_.at(s);
  auto& block = stage.blocks.at(t);
  const auto& att = stage.attention;
  BlockOutputs out;
  out.features = block.residual(x, options.training);
  if (!out.features.all_finite()) {
    out.non_finite = "features";
    return out;
  }

  const auto extract = [&](const Tensor& a) {
    if (config_.f_ext == FeatureExtractor::BnGap) {
      return global_average_pool(batch_norm(a, {}, {}, block.f_ext_bn, options.training));
    }
    return global_average_pool(a);
  };

  if (att.kind != AttentionKind::None) {
    if (options.force_unit_attention) {
      out.attention = Tensor::full({x.dim(0), stage.spec.channels}, 1.0);
    } else if (att.kind == AttentionKind::Se) {
      out.attention = se_forward(out.features, att.se.at(t));
    } else if (att.kind == AttentionKind::DiaLstm) {
      auto result = stack_cells(att.dia_cells, extract(out.features), context.states);
      context.states = std::move(result.states);
      out.attention = result.h_top;
    } else {
      context.states.at(0) = standard_lstm_step(extract(out.features), context.states.at(0), *att.lstm);
      out.attention = context.states[0].h;
    }
    if (!out.attention.all_finite()) {
      out.non_finite = "attention";
      return out;
    }
  }

  const Tensor branch = out.attention.defined() ? channelwise_mul(out.features, out.attention)
                                                : out.features;
  Tensor pre = branch;
  if (!block.skip_removed) {
    pre = add(block.projection ? block.projection->forward(x, options.training) : x, branch);
  }
  out.output = relu(pre);
  if (!out.output.all_finite()) out.non_finite = "output";
  out.activation_norm = rms(out.output);
  return out;
}

StageOutput Network::stage_forward(std::size_t s, const Tensor& x, const ForwardOptions& options) {
  const auto& stage = stages_.at(s);
  const std::size_t batch = x.dim(0);
  StageOutput result;
  AttentionContext context = fresh_context(s, batch);
  const bool capture = options.capture && stage.attention.kind != AttentionKind::None;
  if (capture) {
    result.trace.stage = s;
    result.trace.batch = batch;
    result.trace.channels = stage.spec.channels;
    result.trace.layers = stage.blocks.size();
    result.trace.values.assign(batch * stage.spec.channels * stage.blocks.size(), 0.0);
  }

  Tensor h = x;
  for (std::size_t t = 0; t < stage.blocks.size(); ++t) {
    BlockOutputs block = residual_block_forward(s, t, h, context, options);
    if (block.non_finite) {
      result.explosion = ExplosionSite{static_cast<int>(s), static_cast<int>(t), *block.non_finite};
      return result;
    }
    if (capture) {
      const auto att = block.attention.data();
      const std::size_t n = stage.spec.channels;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < n; ++c) result.trace.at(b, c, t) = att[b * n + c];
    }
    result.activation_norms.push_back(block.activation_norm);
    h = block.output;
  }
  result.features = h;
  return result;
}

NetworkOutput Network::forward(const Tensor& images, const ForwardOptions& options) {
  if (images.rank() != 4 || images.dim(1) != config_.in_channels) {
    throw ShapeError("network_forward: images " + shape_to_string(images.shape()) + " expected [B," +
                     std::to_string(config_.in_channels) + ",H,W]");
  }
  NetworkOutput out;
  const auto fail = [&](ExplosionSite site) {
    out.explosion = std::move(site);
    out.logits = Tensor::full({images.dim(0), config_.classes},
                              std::numeric_limits<double>::quiet_NaN());
    return out;
  };

  Tensor x = relu(stem_.forward(images, options.training));
  if (!x.all_finite()) return fail({-1, -1, "stem"});
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    StageOutput so = stage_forward(s, x, options);
    if (so.explosion) return fail(*so.explosion);
    out.activation_norms.push_back(std::move(so.activation_norms));
    if (options.capture && stages_[s].attention.kind != AttentionKind::None) {
      out.traces.push_back(std::move(so.trace));
    }
    x = so.features;
  }
  out.logits = linear(global_average_pool(x), classifier_weight_, classifier_bias_);
  if (!out.logits.all_finite()) return fail({-1, -1, "classifier"});
  return out;
}

std::vector<Parameter> Network::parameters() const {
  std::vector<Parameter> params;
  std::vector<Buffer> buffers;
  stem_.collect("stem.conv.", params, buffers);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const auto& stage = stages_[s];
    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
      const auto& block = stage.blocks[b];
      const std::string p = block_prefix(s, b);
      for (std::size_t i = 0; i < block.layers.size(); ++i) {
        block.layers[i].collect(p + "conv" + std::to_string(i) + ".", params, buffers);
      }
      if (block.projection) block.projection->collect(p + "proj.", params, buffers);
      if (stage.attention.kind == AttentionKind::Se) {
        for (auto& prm : stage.attention.se[b].parameters(p + "se.")) params.push_back(std::move(prm));
      }
    }
    const std::string ap = stage_prefix(s) + "attention.";
    for (std::size_t k = 0; k < stage.attention.dia_cells.size(); ++k) {
      for (auto& prm : stage.attention.dia_cells[k].parameters(ap + "cell" + std::to_string(k) + ".")) {
        params.push_back(std::move(prm));
      }
    }
    if (stage.attention.lstm) {
      for (auto& prm : stage.attention.lstm->parameters(ap + "lstm.")) params.push_back(std::move(prm));
    }
  }
  params.push_back({"classifier.weight", classifier_weight_});
  params.push_back({"classifier.bias", classifier_bias_});
  return params;
}

std::vector<Buffer> Network::buffers() const {
  std::vector<Parameter> params;
  std::vector<Buffer> buffers;
  stem_.collect("stem.conv.", params, buffers);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const auto& stage = stages_[s];
    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
      const auto& block = stage.blocks[b];
      const std::string p = block_prefix(s, b);
      for (std::size_t i = 0; i < block.layers.size(); ++i) {
        block.layers[i].collect(p + "conv" + std::to_string(i) + ".", params, buffers);
      }
      if (block.projection) block.projection->collect(p + "proj.", params, buffers);
      if (config_.f_ext == FeatureExtractor::BnGap && stage.attention.kind != AttentionKind::None &&
          stage.attention.kind != AttentionKind::Se) {
        buffers.push_back({p + "f_ext.running_mean", block.f_ext_bn.running_mean});
        buffers.push_back({p + "f_ext.running_var", block.f_ext_bn.running_var});
      }
    }
  }
  return buffers;
}

ParamBreakdown count_model_params(const NetworkConfig& config) {
  const Network net(config, 0);
  ParamBreakdown out;
  out.stages.resize(config.stages.size());
  for (const auto& p : net.parameters()) {
    const std::size_t n = p.value.numel();
    out.total += n;
    if (p.id.starts_with("stem.")) {
      out.stem += n;
    } else if (p.id.starts_with("classifier.")) {
      out.classifier += n;
    } else {
      const std::size_t s = std::stoul(p.id.substr(5, p.id.find('.') - 5));
      const bool attention = p.id.find(".attention.") != std::string::npos ||
                             p.id.find(".se.") != std::string::npos;
      if (!attention) {
        out.stages[s].backbone += n;
        continue;
      }
      out.stages[s].attention += n;
      out.attention_increment += n;
      if (p.id.find(".bias.") == std::string::npos) {
        out.stages[s].attention_weights_only += n;
        out.attention_weights_only += n;
      }
    }
  }
  return out;
}

}  // namespace dia
