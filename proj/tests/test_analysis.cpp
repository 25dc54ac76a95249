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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dia/analysis.hpp"
#include "dia/errors.hpp"

namespace dia {
namespace {

HiddenStateTrace random_trace(std::size_t batch, std::size_t channels, std::size_t layers, Rng rng) {
  HiddenStateTrace t{0, batch, channels, layers, std::vector<double>(batch * channels * layers)};
  for (auto& v : t.values) v = rng.uniform();
  return t;
}

// h_3 is a fixed nonlinear function of h_1; h_2 is independent noise.
HiddenStateTrace planted_trace(std::size_t batch, std::size_t channels, Rng rng) {
  auto t = random_trace(batch, channels, 3, rng);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      const double a = t.at(b, c, 0), n = t.at(b, (c + 1) % channels, 0);
      t.at(b, c, 2) = 1.0 / (1.0 + std::exp(-(3.0 * a - 2.0 * n)));
    }
  return t;
}

AnalysisOptions fast_options(std::size_t trees = 30) {
  AnalysisOptions o;
  o.trees = trees;
  return o;
}

TEST(Integration, PlantedSourceGetsFullScore) {
  const auto t = planted_trace(512, 4, Rng(7));
  const auto m = integration_matrix(t, AnalysisOptions{}, 1);
  ASSERT_EQ(m.rows.size(), 2u);
  EXPECT_EQ(m.score(3, 1), 1.0);
  EXPECT_LT(m.score(3, 2), 0.2);
}

TEST(Integration, TwoLayersGiveSingleUnitRow) {
  const auto m = integration_matrix(random_trace(64, 3, 2, Rng(2)), fast_options(), 0);
  ASSERT_EQ(m.rows.size(), 1u);
  EXPECT_EQ(m.rows[0], (std::vector<double>{1.0}));
  EXPECT_FALSE(m.degenerate[0]);
}

TEST(Integration, RowsNormalizedToMaxOne) {
  const auto m = integration_matrix(random_trace(80, 3, 5, Rng(3)), fast_options(), 4);
  ASSERT_EQ(m.rows.size(), 4u);
  for (std::size_t j = 0; j < m.rows.size(); ++j) {
    ASSERT_EQ(m.rows[j].size(), j + 1);
    EXPECT_EQ(*std::max_element(m.rows[j].begin(), m.rows[j].end()), 1.0);
    for (double v : m.rows[j]) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Integration, ConstantTraceIsDegenerate) {
  HiddenStateTrace t{0, 20, 2, 3, std::vector<double>(20 * 2 * 3, 0.5)};
  const auto m = integration_matrix(t, fast_options(5), 0);
  for (std::size_t j = 0; j < m.rows.size(); ++j) {
    EXPECT_TRUE(m.degenerate[j]);
    for (double v : m.rows[j]) EXPECT_EQ(v, 0.0);
  }
}

TEST(Integration, DeterministicForSeed) {
  const auto t = random_trace(60, 3, 4, Rng(5));
  EXPECT_EQ(integration_matrix(t, fast_options(), 9), integration_matrix(t, fast_options(), 9));
}

TEST(Integration, PermutingSourceLayersPermutesColumns) {
  // Swap layers 1 and 2 (with their ids); the rows for targets 3 and 4 must
  // swap their first two columns and keep the rest.
  const auto t = random_trace(70, 3, 4, Rng(6));
  auto swapped = t;
  for (std::size_t b = 0; b < t.batch; ++b)
    for (std::size_t c = 0; c < t.channels; ++c) {
      swapped.at(b, c, 0) = t.at(b, c, 1);
      swapped.at(b, c, 1) = t.at(b, c, 0);
    }
  const std::vector<std::uint64_t> ids{0, 1, 2, 3}, swapped_ids{1, 0, 2, 3};
  const auto a = integration_matrix(t, fast_options(), 2, ids);
  const auto b = integration_matrix(swapped, fast_options(), 2, swapped_ids);
  for (std::size_t target = 3; target <= 4; ++target) {
    EXPECT_EQ(b.score(target, 1), a.score(target, 2));
    EXPECT_EQ(b.score(target, 2), a.score(target, 1));
    if (target == 4) {
      EXPECT_EQ(b.score(4, 3), a.score(4, 3));
    }
  }
}

TEST(Integration, RejectsSingleLayer) {
  EXPECT_ANY_THROW(integration_matrix(random_trace(10, 2, 1, Rng(1)), fast_options(), 0));
}

TEST(Heatmap, RowCountOrderAndRoundTrip) {
  auto m = integration_matrix(random_trace(50, 2, 3, Rng(8)), fast_options(), 0);
  m.stage = 2;
  const auto csv = heatmap_csv(m);
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "target_layer,source_layer,score");
  EXPECT_EQ(lines[1].substr(0, 4), "2,1,");
  EXPECT_EQ(lines[2].substr(0, 4), "3,1,");
  EXPECT_EQ(lines[3].substr(0, 4), "3,2,");
  EXPECT_EQ(parse_heatmap_csv(csv, 2), m);

  const auto path = std::filesystem::temp_directory_path() / "dianet_test_heatmap.csv";
  emit_heatmap_csv(m, path);
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  EXPECT_EQ(ss.str(), csv);
  std::filesystem::remove(path);

  EXPECT_ANY_THROW(parse_heatmap_csv("target_layer,source_layer,score\n3,1,0.5\n"));
}

TEST(Trace, ContainerRoundTrip) {
  auto t = random_trace(5, 3, 4, Rng(1));
  t.stage = 1;
  Checkpoint c;
  add_trace(c, t);
  const auto back = read_trace(Checkpoint::deserialize(c.serialize()), 1);
  EXPECT_EQ(back.values, t.values);
  EXPECT_EQ(back.batch, 5u);
  EXPECT_EQ(back.channels, 3u);
  EXPECT_EQ(back.layers, 4u);
  EXPECT_ANY_THROW(read_trace(c, 0));
}

NetworkConfig traced_net(AttentionKind kind) {
  NetworkConfig c;
  c.stages = {{4, 3, 1}, {8, 3, 2}};
  c.attention = kind;
  c.reduction_ratio = 2;
  c.classes = 3;
  return c;
}

TEST(Capture, ShapeDeterminismAndRange) {
  Network net(traced_net(AttentionKind::DiaLstm), 4);
  const auto sample = synth_task(1, 7, 3, 1.0, "test", 8);
  const auto a = capture_traces(net, sample, 1, 4);
  EXPECT_EQ(a.batch, 7u);
  EXPECT_EQ(a.channels, 8u);
  EXPECT_EQ(a.layers, 3u);
  EXPECT_EQ(a.stage, 1u);
  for (double v : a.values) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  // Batching does not change inference-mode traces.
  EXPECT_EQ(capture_traces(net, sample, 1, 250).values, a.values);
}

TEST(Capture, RejectsStagesWithoutRecurrentUnit) {
  const auto sample = synth_task(1, 4, 3, 1.0, "test", 8);
  Network plain(traced_net(AttentionKind::None), 4);
  EXPECT_THROW(capture_traces(plain, sample, 0), ConfigError);
  Network se(traced_net(AttentionKind::Se), 4);
  EXPECT_THROW(capture_traces(se, sample, 0), ConfigError);
  Network dia(traced_net(AttentionKind::DiaLstm), 4);
  EXPECT_THROW(capture_traces(dia, sample, 2), ConfigError);
  auto partial = traced_net(AttentionKind::DiaLstm);
  partial.attention_stages = std::set<std::size_t>{1};
  Network p(partial, 4);
  EXPECT_THROW(capture_traces(p, sample, 0), ConfigError);
  EXPECT_NO_THROW(capture_traces(p, sample, 1));
}

}  // namespace
}  // namespace dia
