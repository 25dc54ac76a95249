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

#include "dia/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

namespace dia {

namespace {

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double score = 0.0;  // sum_q SL^2/nl + SR^2/nr; larger is better
  std::uint64_t key = 0;
};

// Sum over outputs of squared deviations from the mean, two-pass.
double node_sse(const Matrix& y, std::span<const std::size_t> rows, std::vector<double>& mean) {
  const std::size_t q = y.cols;
  mean.assign(q, 0.0);
  for (auto r : rows)
    for (std::size_t j = 0; j < q; ++j) mean[j] += y.at(r, j);
  for (auto& m : mean) m /= static_cast<double>(rows.size());
  double sse = 0.0;
  for (auto r : rows) {
    for (std::size_t j = 0; j < q; ++j) {
      const double d = y.at(r, j) - mean[j];
      sse += d * d;
    }
  }
  return sse;
}

}  // namespace

void RegressionTree::fit(const Matrix& x, const Matrix& y, std::span<const std::size_t> rows,
                         std::span<const std::uint64_t> keys, const ForestOptions& options, const Rng& rng) {
  const std::size_t p = x.cols, q = y.cols;
  const double total_n = static_cast<double>(rows.size());
  const std::size_t wanted =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(options.feature_fraction * static_cast<double>(p))));
  nodes_.clear();
  raw_importance_.assign(p, 0.0);
  importance_.assign(p, 0.0);
  depth_ = 0;
  double importance_total = 0.0;

  struct Pending {
    std::size_t node;
    std::vector<std::size_t> rows;
    std::size_t depth;
  };
  std::vector<Pending> stack;
  nodes_.push_back({});
  stack.push_back({0, std::vector<std::size_t>(rows.begin(), rows.end()), 0});

  std::vector<double> mean, left_sum(q), total_sum(q);
  std::vector<std::pair<double, std::size_t>> sorted;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> order(p);  // (hash, key) per feature

  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    const std::size_t n = cur.rows.size();
    depth_ = std::max(depth_, cur.depth);
    const double sse = node_sse(y, cur.rows, mean);
    nodes_[cur.node].samples = n;
    nodes_[cur.node].value = mean;

    const bool can_split = n >= 2 * options.min_leaf && sse > 0.0 &&
                           (options.max_depth == 0 || cur.depth < options.max_depth);
    Split best;
    if (can_split) {
      const Rng node_rng = rng.split("node").split(cur.node);
      std::vector<std::size_t> feat(p);
      std::iota(feat.begin(), feat.end(), 0);
      for (std::size_t f = 0; f < p; ++f) order[f] = {node_rng.split(keys[f]).next_u64(), keys[f]};
      std::sort(feat.begin(), feat.end(), [&](std::size_t a, std::size_t b) { return order[a] < order[b]; });

      std::fill(total_sum.begin(), total_sum.end(), 0.0);
      for (auto r : cur.rows)
        for (std::size_t j = 0; j < q; ++j) total_sum[j] += y.at(r, j);

      std::size_t examined = 0;
      for (std::size_t f : feat) {
        if (examined >= wanted && best.found) break;
        sorted.clear();
        for (auto r : cur.rows) sorted.push_back({x.at(r, f), r});
        std::sort(sorted.begin(), sorted.end());
        if (sorted.front().first == sorted.back().first) continue;  // constant here; not counted
        ++examined;
        std::fill(left_sum.begin(), left_sum.end(), 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
          const std::size_t r = sorted[i].second;
          for (std::size_t j = 0; j < q; ++j) left_sum[j] += y.at(r, j);
          if (sorted[i].first == sorted[i + 1].first) continue;
          const std::size_t nl = i + 1, nr = n - nl;
          if (nl < options.min_leaf || nr < options.min_leaf) continue;
          double score = 0.0;
          for (std::size_t j = 0; j < q; ++j) {
            const double sr = total_sum[j] - left_sum[j];
            score += left_sum[j] * left_sum[j] / static_cast<double>(nl) + sr * sr / static_cast<double>(nr);
          }
          if (!best.found || score > best.score || (score == best.score && keys[f] < best.key)) {
            double thr = 0.5 * (sorted[i].first + sorted[i + 1].first);
            if (thr >= sorted[i + 1].first) thr = sorted[i].first;
            best = {true, f, thr, score, keys[f]};
          }
        }
      }
    }

    if (!best.found) continue;  // leaf

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : cur.rows) (x.at(r, best.feature) <= best.threshold ? left_rows : right_rows).push_back(r);
    const double gain = sse - node_sse(y, left_rows, mean) - node_sse(y, right_rows, mean);
    const double contribution = std::max(gain, 0.0) / total_n;
    raw_importance_[best.feature] += contribution;
    importance_total += contribution;

    auto& node = nodes_[cur.node];
    node.feature = static_cast<int>(best.feature);
    node.threshold = best.threshold;
    node.value.clear();
    node.left = static_cast<int>(nodes_.size());
    node.right = static_cast<int>(nodes_.size() + 1);
    const std::size_t left_id = nodes_.size(), right_id = nodes_.size() + 1;
    nodes_.push_back({});
    nodes_.push_back({});
    // Right is pushed first so the left subtree is expanded (and numbered) first.
    stack.push_back({right_id, std::move(right_rows), cur.depth + 1});
    stack.push_back({left_id, std::move(left_rows), cur.depth + 1});
  }

  if (importance_total > 0.0) {
    for (std::size_t f = 0; f < p; ++f) importance_[f] = raw_importance_[f] / importance_total;
  }
}

std::span<const double> RegressionTree::predict(std::span<const double> features) const {
  std::size_t i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& nd = nodes_[i];
    i = static_cast<std::size_t>(features[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right);
  }
  return nodes_[i].value;
}

RegressionForest RegressionForest::fit(const Matrix& x, const Matrix& y, const ForestOptions& options,
                                       std::span<const std::uint64_t> keys) {
  if (x.rows != y.rows) {
    throw std::invalid_argument("forest: " + std::to_string(x.rows) + " feature rows vs " +
                                std::to_string(y.rows) + " target rows");
  }
  if (x.cols == 0 || y.cols == 0) throw std::invalid_argument("forest: empty feature or target matrix");
  if (options.trees == 0 || options.min_leaf == 0) throw std::invalid_argument("forest: trees and min_leaf must be >= 1");
  if (x.rows < 2 * options.min_leaf) {
    throw std::invalid_argument("forest: " + std::to_string(x.rows) + " samples < 2 * min_leaf");
  }
  std::vector<std::uint64_t> key_store(keys.begin(), keys.end());
  if (key_store.empty()) {
    key_store.resize(x.cols);
    std::iota(key_store.begin(), key_store.end(), 0);
  }
  if (key_store.size() != x.cols) throw std::invalid_argument("forest: one key per feature column required");
  {
    auto sorted = key_store;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw std::invalid_argument("forest: column keys must be unique");
    }
  }

  RegressionForest forest;
  forest.trees_.resize(options.trees);
  const Rng root(options.seed);
  const long count = static_cast<long>(options.trees);
#pragma omp parallel for schedule(dynamic) if (options.parallel)
  for (long t = 0; t < count; ++t) {
    const Rng tree_rng = root.split(static_cast<std::uint64_t>(t));
    std::vector<std::size_t> rows(x.rows);
    if (options.bootstrap) {
      Rng draw = tree_rng.split("bootstrap");
      for (auto& r : rows) r = static_cast<std::size_t>(draw.below(x.rows));
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    forest.trees_[static_cast<std::size_t>(t)].fit(x, y, rows, key_store, options, tree_rng);
  }

  const std::size_t p = x.cols;
  std::vector<double> acc(p, 0.0);
  std::size_t splitting = 0;
  for (const auto& tree : forest.trees_) {
    if (!tree.has_split()) continue;
    ++splitting;
    for (std::size_t f = 0; f < p; ++f) acc[f] += tree.importances()[f];
  }
  forest.importance_.assign(p, 0.0);
  forest.degenerate_ = splitting == 0;
  if (!forest.degenerate_) {
    // Sum in key order so that column permutations reproduce the exact total.
    std::vector<std::size_t> by_key(p);
    std::iota(by_key.begin(), by_key.end(), 0);
    std::sort(by_key.begin(), by_key.end(), [&](std::size_t a, std::size_t b) { return key_store[a] < key_store[b]; });
    double total = 0.0;
    for (auto f : by_key) total += acc[f] / static_cast<double>(splitting);
    for (std::size_t f = 0; f < p; ++f) forest.importance_[f] = acc[f] / static_cast<double>(splitting) / total;
  }
  return forest;
}

std::vector<double> RegressionForest::predict(std::span<const double> features) const {
  std::vector<double> out;
  for (const auto& tree : trees_) {
    const auto v = tree.predict(features);
    if (out.empty()) out.assign(v.size(), 0.0);
    for (std::size_t j = 0; j < v.size(); ++j) out[j] += v[j];
  }
  for (auto& v : out) v /= static_cast<double>(trees_.size());
  return out;
}

}  // namespace dia
