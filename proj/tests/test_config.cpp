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

#include <filesystem>

#include "dia/checkpoint.hpp"
#include "dia/config.hpp"
#include "dia/errors.hpp"

namespace dia {
namespace {

TEST(Config, DefaultsParseFromEmptyText) {
  const auto c = ExperimentConfig::parse("# nothing\n\n");
  EXPECT_EQ(c.train.batch_size, 128u);
  EXPECT_EQ(c.train.lr, 0.1);
  EXPECT_EQ(c.network.attention, AttentionKind::DiaLstm);
  EXPECT_EQ(c.dataset.kind, DatasetKind::Synth);
  EXPECT_EQ(c.analysis.trees, 100u);
}

TEST(Config, ParsesEveryKind) {
  const auto c = ExperimentConfig::parse(
      "batch_size = 32\n"
      "lr = 0.05   # trailing comment\n"
      "stages = 8:2:1,16:3:2\n"
      "attention = se\n"
      "block = bottleneck\n"
      "output_activation = tanh\n"
      "use_bn = false\n"
      "dia_stages = 0,1\n"
      "skip_removal_fraction = 1/3\n"
      "inject_nan_step = 7\n"
      "difficulty = 6.5\n"
      "forest_feature_fraction = 0.5\n");
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_EQ(c.train.lr, 0.05);
  ASSERT_EQ(c.network.stages.size(), 2u);
  EXPECT_EQ(c.network.stages[1], (StageSpec{16, 3, 2}));
  EXPECT_EQ(c.network.attention, AttentionKind::Se);
  EXPECT_EQ(c.network.block, BlockKind::Bottleneck);
  EXPECT_EQ(c.network.output_activation, OutputActivation::Tanh);
  EXPECT_FALSE(c.network.use_batch_norm);
  EXPECT_EQ(c.network.attention_stages, (std::set<std::size_t>{0, 1}));
  EXPECT_DOUBLE_EQ(c.network.skip_removal_fraction, 1.0 / 3.0);
  EXPECT_EQ(c.train.inject_nan_step, 7u);
  EXPECT_EQ(c.dataset.difficulty, 6.5);
  EXPECT_EQ(c.analysis.feature_fraction, 0.5);
}

TEST(Config, RoundTripsThroughText) {
  const auto c = ExperimentConfig::parse(
      "stages = 8:2:1,16:2:2\nlr = 0.1\nschedule = 2,4\ndia_stages = 1\nseed = 17\n"
      "skip_removal_fraction = 1/3\ninject_nan_step = 3\nwd = 0.0005\n");
  const auto text = c.to_text();
  const auto back = ExperimentConfig::parse(text);
  EXPECT_EQ(back.to_text(), text);
  EXPECT_EQ(back.network.skip_removal_fraction, c.network.skip_removal_fraction);
  EXPECT_EQ(back.train.weight_decay, 0.0005);
  EXPECT_EQ(back.train.schedule, (std::vector<std::size_t>{2, 4}));
}

TEST(Config, RejectsUnknownDuplicateAndMalformed) {
  EXPECT_THROW(ExperimentConfig::parse("learning_rate = 0.1\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("lr = 0.1\nlr = 0.2\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("lr 0.1\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("batch_size = -4\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("batch_size = 4x\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("attention = cbam\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("stages = 8:2\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("use_bn = maybe\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("dataset = imagenet\n"), ConfigError);
  try {
    ExperimentConfig::parse("lr = 0.1\n\nbogus = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Config, ValidationRules) {
  EXPECT_THROW(ExperimentConfig::parse("dataset = cifar10\n"), ConfigError);  // data_path required
  EXPECT_THROW(ExperimentConfig::parse("dataset = cifar10\ndata_path = x\nclasses = 4\n"), ConfigError);
  const auto c = ExperimentConfig::parse("dataset = cifar100\ndata_path = x\nimage_size = 32\n");
  EXPECT_EQ(c.network.classes, 100u);
  EXPECT_THROW(ExperimentConfig::parse("subset = 10\nbatch_size = 32\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("difficulty = -1\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("forest_feature_fraction = 0\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("forest_trees = 0\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("analysis_samples = 3\nforest_min_leaf = 2\n"), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("reduction_ratio = 0\n"), ConfigError);
}

TEST(Config, DepthSetsBlocksPerStage) {
  const auto basic = ExperimentConfig::parse("depth = 20\n");
  for (const auto& s : basic.network.stages) EXPECT_EQ(s.blocks, 3u);
  const auto bottle = ExperimentConfig::parse("block = bottleneck\ndepth = 164\n");
  for (const auto& s : bottle.network.stages) EXPECT_EQ(s.blocks, 18u);
  EXPECT_THROW(ExperimentConfig::parse("depth = 21\n"), ConfigError);
}

TEST(Config, LearningRateSchedule) {
  const auto c = ExperimentConfig::parse("lr = 0.1\nschedule = 2,4\ngamma = 0.1\n");
  EXPECT_DOUBLE_EQ(c.train.lr_at_epoch(1), 0.1);
  EXPECT_DOUBLE_EQ(c.train.lr_at_epoch(2), 0.1);
  EXPECT_DOUBLE_EQ(c.train.lr_at_epoch(3), 0.01);
  EXPECT_DOUBLE_EQ(c.train.lr_at_epoch(4), 0.01);
  EXPECT_DOUBLE_EQ(c.train.lr_at_epoch(5), 0.001);
  const auto flat = ExperimentConfig::parse("schedule = none\n");
  EXPECT_DOUBLE_EQ(flat.train.lr_at_epoch(500), 0.1);
}

TEST(Checkpoint, SerializeRoundTrip) {
  Checkpoint c;
  c.add_values("a", {2, 2}, {1.0, -2.5, 3.25, 1e-300});
  c.add_values("f", {3}, {0.5, 0.25, -1.0}, DType::F32);
  c.add_text("meta", "hello\nworld");
  const auto bytes = c.serialize();
  EXPECT_EQ(bytes.substr(0, 4), "DIA1");
  const auto back = Checkpoint::deserialize(bytes);
  EXPECT_EQ(back.at("a").values, c.at("a").values);
  EXPECT_EQ(back.at("a").shape, (Shape{2, 2}));
  EXPECT_EQ(back.at("f").values, (std::vector<double>{0.5, 0.25, -1.0}));
  EXPECT_EQ(back.text("meta"), "hello\nworld");
  EXPECT_EQ(back.serialize(), bytes);
}

TEST(Checkpoint, RejectsCorruptInput) {
  Checkpoint c;
  c.add_values("a", {3}, {1, 2, 3});
  const auto bytes = c.serialize();
  EXPECT_THROW(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 1)), IoError);
  EXPECT_THROW(Checkpoint::deserialize(bytes + "x"), IoError);
  EXPECT_THROW(Checkpoint::deserialize("DIA0" + bytes.substr(4)), IoError);
  EXPECT_THROW(c.add_values("a", {1}, {1}), UsageError);
  EXPECT_THROW(c.at("missing"), IoError);
}

TEST(Checkpoint, ModelStateRoundTripsThroughFile) {
  NetworkConfig cfg;
  cfg.stages = {{4, 1, 1}, {8, 1, 2}};
  cfg.classes = 3;
  cfg.reduction_ratio = 2;
  Network a(cfg, 1);
  Network b(cfg, 2);
  Checkpoint ck;
  write_model_state(a, ck);
  const auto path = std::filesystem::temp_directory_path() / "dianet_test_ckpt.dia";
  ck.save(path);
  read_model_state(Checkpoint::load(path), b);
  std::filesystem::remove(path);
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].id, pb[i].id);
    for (std::size_t j = 0; j < pa[i].value.numel(); ++j) ASSERT_EQ(pa[i].value.data()[j], pb[i].value.data()[j]);
  }

  NetworkConfig wider = cfg;
  wider.stages[1].channels = 16;
  Network c(wider, 1);
  EXPECT_ANY_THROW(read_model_state(ck, c));
  EXPECT_THROW(Checkpoint::load("/nonexistent/dir/x.dia"), IoError);
}

}  // namespace
}  // namespace dia
