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

#include <cmath>
#include <map>
#include <vector>

#include "dia/backbone.hpp"
#include "dia/errors.hpp"
#include "dia/rng.hpp"

namespace dia {
namespace {

NetworkConfig tiny(AttentionKind kind) {
  NetworkConfig c;
  c.stages = {{4, 2, 1}, {8, 2, 2}, {8, 2, 2}};
  c.attention = kind;
  c.reduction_ratio = 2;
  c.classes = 3;
  return c;
}

Tensor random_images(std::size_t batch, std::size_t size, Rng rng) {
  std::vector<double> v(batch * 3 * size * size);
  for (auto& x : v) x = rng.normal();
  return Tensor::from_data({batch, 3, size, size}, std::move(v));
}

std::map<std::string, Tensor> by_id(const Network& net) {
  std::map<std::string, Tensor> m;
  for (const auto& p : net.parameters()) m[p.id] = p.value;
  return m;
}

void expect_bitwise(const Tensor& a, const Tensor& b) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) ASSERT_EQ(a.data()[i], b.data()[i]) << "index " << i;
}

TEST(Backbone, BackboneWeightsIndependentOfAttention) {
  Network plain(tiny(AttentionKind::None), 11);
  Network dia(tiny(AttentionKind::DiaLstm), 11);
  const auto dia_params = by_id(dia);
  for (const auto& p : plain.parameters()) {
    ASSERT_TRUE(dia_params.count(p.id)) << p.id;
    expect_bitwise(p.value, dia_params.at(p.id));
  }
}

TEST(Backbone, UnitAttentionEqualsNoAttentionBitwise) {
  const Tensor x = random_images(4, 8, Rng(5));
  for (auto kind : {AttentionKind::DiaLstm, AttentionKind::StandardLstm, AttentionKind::Se}) {
    for (bool training : {false, true}) {
      Network plain(tiny(AttentionKind::None), 11);
      Network att(tiny(kind), 11);
      ForwardOptions forced;
      forced.training = training;
      forced.force_unit_attention = true;
      ForwardOptions normal;
      normal.training = training;
      const auto a = att.forward(x, forced);
      const auto b = plain.forward(x, normal);
      expect_bitwise(a.logits, b.logits);
    }
  }
}

TEST(Backbone, AttentionChangesOutput) {
  const Tensor x = random_images(2, 8, Rng(5));
  Network plain(tiny(AttentionKind::None), 11);
  Network dia(tiny(AttentionKind::DiaLstm), 11);
  const auto a = dia.forward(x);
  const auto b = plain.forward(x);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.logits.numel(); ++i) diff += std::abs(a.logits.data()[i] - b.logits.data()[i]);
  EXPECT_GT(diff, 0.0);
}

TEST(Backbone, IdenticalImagesGiveIdenticalRows) {
  const Tensor one = random_images(1, 8, Rng(3));
  std::vector<double> v;
  for (int k = 0; k < 3; ++k) v.insert(v.end(), one.data().begin(), one.data().end());
  const Tensor x = Tensor::from_data({3, 3, 8, 8}, v);
  Network net(tiny(AttentionKind::DiaLstm), 2);
  const auto out = net.forward(x);
  ASSERT_EQ(out.logits.shape(), (Shape{3, 3}));
  for (std::size_t r = 1; r < 3; ++r)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(out.logits.data()[r * 3 + k], out.logits.data()[k]);
}

TEST(Backbone, StateResetsEveryForward) {
  const Tensor x = random_images(2, 8, Rng(8));
  Network net(tiny(AttentionKind::DiaLstm), 2);
  const auto a = net.forward(x);
  const auto b = net.forward(x);
  expect_bitwise(a.logits, b.logits);
}

TEST(Backbone, SkipRemovalCounts) {
  NetworkConfig c = tiny(AttentionKind::DiaLstm);
  c.stages = {{4, 3, 1}, {8, 4, 2}};
  c.skip_removal_fraction = 0.5;
  EXPECT_EQ(c.removed_skips(0), 1u);
  EXPECT_EQ(c.removed_skips(1), 2u);
  EXPECT_FALSE(c.skip_removed(0, 1));
  EXPECT_TRUE(c.skip_removed(0, 2));
  EXPECT_FALSE(c.skip_removed(1, 1));
  EXPECT_TRUE(c.skip_removed(1, 2));
  EXPECT_TRUE(c.skip_removed(1, 3));
  c.skip_removal_fraction = 1.0;
  EXPECT_EQ(c.removed_skips(1), 4u);
  c.skip_removal_fraction = 0.0;
  EXPECT_EQ(c.removed_skips(1), 0u);
}

TEST(Backbone, SkipRemovalChangesForwardButNotParameters) {
  const Tensor x = random_images(2, 8, Rng(4));
  NetworkConfig c = tiny(AttentionKind::DiaLstm);
  Network full(c, 6);
  c.skip_removal_fraction = 0.5;
  Network removed(c, 6);
  EXPECT_EQ(count_model_params(tiny(AttentionKind::DiaLstm)).total, count_model_params(c).total);
  const auto a = full.forward(x);
  const auto b = removed.forward(x);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.logits.numel(); ++i) diff += std::abs(a.logits.data()[i] - b.logits.data()[i]);
  EXPECT_GT(diff, 0.0);
}

TEST(Backbone, ExcludedStagesMatchNoAttention) {
  const Tensor x = random_images(2, 8, Rng(1));
  NetworkConfig c = tiny(AttentionKind::DiaLstm);
  c.attention_stages = std::set<std::size_t>{};
  Network excluded(c, 13);
  Network plain(tiny(AttentionKind::None), 13);
  expect_bitwise(excluded.forward(x).logits, plain.forward(x).logits);

  c.attention_stages = std::set<std::size_t>{1};
  const auto counts = count_model_params(c);
  EXPECT_EQ(counts.stages[0].attention, 0u);
  EXPECT_GT(counts.stages[1].attention, 0u);
  EXPECT_EQ(counts.stages[2].attention, 0u);
}

TEST(Backbone, DiaIncrementConstantAcrossDepth) {
  std::vector<std::size_t> dia, se;
  for (std::size_t blocks : {3u, 9u, 18u}) {
    NetworkConfig c;
    c.stages = {{16, blocks, 1}, {32, blocks, 2}, {64, blocks, 2}};
    c.attention = AttentionKind::DiaLstm;
    dia.push_back(count_model_params(c).attention_increment);
    c.attention = AttentionKind::Se;
    se.push_back(count_model_params(c).attention_increment);
  }
  EXPECT_EQ(dia[0], dia[1]);
  EXPECT_EQ(dia[0], dia[2]);
  EXPECT_EQ(se[1], 3 * se[0]);
  EXPECT_EQ(se[2], 6 * se[0]);
  // r = 4 over widths 16, 32, 64 plus 4N biases per cell.
  EXPECT_EQ(dia[0], 10 * (16 * 16 + 32 * 32 + 64 * 64) / 4 + 4 * (16 + 32 + 64));
}

TEST(Backbone, ParamBreakdownSumsToEnumeration) {
  for (auto kind : {AttentionKind::None, AttentionKind::DiaLstm, AttentionKind::Se, AttentionKind::StandardLstm}) {
    NetworkConfig c = tiny(kind);
    Network net(c, 1);
    std::size_t total = 0;
    for (const auto& p : net.parameters()) total += p.value.numel();
    const auto counts = count_model_params(c);
    EXPECT_EQ(counts.total, total);
    std::size_t parts = counts.stem + counts.classifier;
    for (const auto& s : counts.stages) parts += s.backbone + s.attention;
    EXPECT_EQ(parts, total);
  }
}

TEST(Backbone, BottleneckShapes) {
  NetworkConfig c = tiny(AttentionKind::DiaLstm);
  c.block = BlockKind::Bottleneck;
  c.stages = {{8, 2, 1}, {16, 2, 2}};
  c.f_ext = FeatureExtractor::BnGap;
  Network net(c, 3);
  const auto out = net.forward(random_images(2, 8, Rng(2)));
  EXPECT_EQ(out.logits.shape(), (Shape{2, 3}));
  EXPECT_FALSE(out.explosion.has_value());
}

TEST(Backbone, CaptureRecordsAttentionTraces) {
  for (auto act : {OutputActivation::Sigmoid, OutputActivation::Tanh}) {
    NetworkConfig c = tiny(AttentionKind::DiaLstm);
    c.output_activation = act;
    Network net(c, 3);
    ForwardOptions opts;
    opts.capture = true;
    const auto out = net.forward(random_images(3, 8, Rng(2)), opts);
    ASSERT_EQ(out.traces.size(), 3u);
    const auto& t = out.traces[1];
    EXPECT_EQ(t.stage, 1u);
    EXPECT_EQ(t.batch, 3u);
    EXPECT_EQ(t.channels, 8u);
    EXPECT_EQ(t.layers, 2u);
    ASSERT_EQ(t.values.size(), 3u * 8u * 2u);
    for (double v : t.values) {
      EXPECT_LT(v, 1.0);
      EXPECT_GT(v, act == OutputActivation::Sigmoid ? 0.0 : -1.0);
    }
  }
}

TEST(Backbone, ExplosionWithoutBatchNormIsLocated) {
  NetworkConfig c = tiny(AttentionKind::DiaLstm);
  c.use_batch_norm = false;
  Network net(c, 3);
  // Without normalization every conv multiplies the scale, so later blocks overflow.
  for (auto& p : net.parameters())
    if (p.value.rank() == 4)
      for (auto& v : p.value.data()) v *= 1e50;
  const auto out = net.forward(random_images(2, 8, Rng(2)));
  ASSERT_TRUE(out.explosion.has_value());
  EXPECT_GE(out.explosion->stage, 0);
  EXPECT_FALSE(out.explosion->where.empty());
}

TEST(Backbone, ValidateRejectsBadConfigs) {
  NetworkConfig c = tiny(AttentionKind::DiaLstm);
  c.stages.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny(AttentionKind::DiaLstm);
  c.skip_removal_fraction = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny(AttentionKind::DiaLstm);
  c.reduction_ratio = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace dia
