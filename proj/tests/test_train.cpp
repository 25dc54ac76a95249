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

#include "dia/errors.hpp"
#include "dia/train.hpp"

namespace dia {
namespace {

ExperimentConfig toy(const std::string& extra = "", std::size_t test_subset = 24) {
  return ExperimentConfig::parse(
      "stages = 4:1:1,8:1:2\nimage_size = 8\nclasses = 3\nreduction_ratio = 2\n"
      "subset = 48\nbatch_size = 16\nepoch = 3\nmax_steps = 7\n"
      "difficulty = 1\nschedule = 2\ntest_subset = " +
      std::to_string(test_subset) + "\n" + extra);
}

TEST(Top1, FirstMaximumWins) {
  const std::vector<double> logits{1, 3, 3, 0, 0, 0, -1, 2, 5};
  const std::vector<int> labels{1, 0, 2};
  EXPECT_DOUBLE_EQ(top1_accuracy(logits, 3, labels), 1.0);
  const std::vector<int> wrong{2, 1, 0};
  EXPECT_DOUBLE_EQ(top1_accuracy(logits, 3, wrong), 0.0);
}

TEST(RunRecord, CsvRoundTrip) {
  RunRecord r;
  r.add(0, 1, "train", "lr", 0.1);
  r.add(1, 1, "train", "loss", 1.0 / 3.0);
  r.add(1, 1, "test", "accuracy", 0.75);
  const auto csv = r.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,epoch,split,metric,value");
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  EXPECT_EQ(RunRecord::parse_csv(csv), r.rows());
  EXPECT_EQ(r.last("train", "loss"), 1.0 / 3.0);
  EXPECT_FALSE(r.last("test", "loss").has_value());
}

TEST(PrepareData, NormalizedWithTrainStatistics) {
  const auto data = prepare_data(toy());
  EXPECT_EQ(data.train.size(), 48u);
  EXPECT_EQ(data.test.size(), 24u);
  EXPECT_EQ(data.train.images.shape(), (Shape{48, 3, 8, 8}));
  const auto s = compute_channel_stats(data.train);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(s.mean[c], 0.0, 1e-12);
    EXPECT_NEAR(s.stddev[c], 1.0, 1e-12);
  }
}

TEST(Train, LogsStepsAndRespectsStepCap) {
  const auto cfg = toy();
  const auto result = train(cfg, prepare_data(cfg));
  EXPECT_FALSE(result.exploded());
  EXPECT_EQ(result.steps, 7u);
  std::size_t losses = 0;
  for (const auto& row : result.record.rows()) {
    if (row.metric == "loss") ++losses;
    EXPECT_TRUE(std::isfinite(row.value));
  }
  EXPECT_EQ(losses, 7u);
  EXPECT_TRUE(result.record.last("test", "accuracy").has_value());
  EXPECT_TRUE(result.record.last("train", "accuracy").has_value());
  // 48 samples at batch 16 is 3 steps per epoch, so step 7 is in epoch 3,
  // after the decay at the end of epoch 2.
  EXPECT_DOUBLE_EQ(*result.record.last("train", "lr"), 0.01);
}

TEST(Train, BitwiseDeterministic) {
  const auto cfg = toy("augment = true\n");
  const auto data = prepare_data(cfg);
  const auto a = train(cfg, data);
  const auto b = train(cfg, data);
  EXPECT_EQ(a.record.to_csv(), b.record.to_csv());
  EXPECT_EQ(build_checkpoint(*a.model, cfg, a.stats).serialize(),
            build_checkpoint(*b.model, cfg, b.stats).serialize());
  auto moved = cfg;
  moved.out_dir = "elsewhere";
  EXPECT_EQ(build_checkpoint(*a.model, moved, a.stats).serialize(),
            build_checkpoint(*a.model, cfg, a.stats).serialize());

  const auto other = toy("augment = true\nseed = 1\n");
  const auto c = train(other, prepare_data(other));
  EXPECT_NE(a.record.to_csv(), c.record.to_csv());
}

TEST(Train, InjectedNanIsReportedAsExplosion) {
  const auto cfg = toy("inject_nan_step = 3\n");
  const auto result = train(cfg, prepare_data(cfg));
  ASSERT_TRUE(result.exploded());
  EXPECT_EQ(result.record.explosion()->step, 3u);
  EXPECT_EQ(result.record.explosion()->where, "loss");
  EXPECT_EQ(result.steps, 3u);
  bool event = false;
  for (const auto& row : result.record.rows())
    if (row.split == "event") {
      event = true;
      EXPECT_EQ(row.value, 3.0);
      EXPECT_EQ(row.metric.rfind("explosion:loss", 0), 0u);
    }
  EXPECT_TRUE(event);
}

TEST(Train, CheckpointReloadReproducesAccuracy) {
  const auto cfg = toy();
  const auto data = prepare_data(cfg);
  auto result = train(cfg, data);
  const auto ckpt = Checkpoint::deserialize(build_checkpoint(*result.model, cfg, result.stats).serialize());
  auto loaded = load_model(ckpt);
  EXPECT_EQ(loaded.config.to_text(), cfg.to_text());
  EXPECT_EQ(loaded.stats.mean, result.stats.mean);
  EXPECT_EQ(evaluate(*loaded.model, data.test), evaluate(*result.model, data.test));
  EXPECT_EQ(evaluate(*result.model, data.test), *result.record.last("test", "accuracy"));
}

TEST(Evaluate, IndependentOfBatchSize) {
  const auto cfg = toy("", 300);
  const auto data = prepare_data(cfg);
  Network net(cfg.network, 5);
  const double acc = evaluate(net, data.test, 64);
  EXPECT_EQ(evaluate(net, data.test, 300), acc);
  EXPECT_EQ(evaluate(net, data.test, 7), acc);
}

}  // namespace
}  // namespace dia
