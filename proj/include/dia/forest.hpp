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

// Multi-output CART regression forest with impurity-based importances.
//
// Impurity of a node is the sum over outputs of the within-node sum of squared
// deviations. A split on feature v adds (SSE_parent - SSE_left - SSE_right) / N
// to importance[v], N being the tree's (bootstrap) sample count; that is the
// node's sample fraction times its weighted variance decrease. Each tree's
// importances are normalized to sum 1, then averaged over the trees that split.
//
// Every feature carries a column key. Candidate features at a node are chosen
// by hashing (tree stream, node number, key), and ties are broken by key, so
// relabelling or reordering columns while keeping their keys leaves every fitted
// tree, and hence every importance, unchanged.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dia/rng.hpp"

namespace dia {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

struct ForestOptions {
  std::size_t trees = 100;
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_leaf = 2;
  /// Candidate features per node: max(1, floor(fraction * p)).
  double feature_fraction = 1.0 / 3.0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  /// Fit trees with OpenMP; the result is identical either way.
  bool parallel = true;
};

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 for leaves
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::size_t samples = 0;
    std::vector<double> value;  // leaf mean of every output
  };

  /// Fits on the listed rows (repeats allowed). `keys` has one entry per column.
  void fit(const Matrix& x, const Matrix& y, std::span<const std::size_t> rows,
           std::span<const std::uint64_t> keys, const ForestOptions& options, const Rng& rng);

  std::span<const double> predict(std::span<const double> features) const;
  /// Raw (unnormalized) importance per feature.
  const std::vector<double>& raw_importances() const { return raw_importance_; }
  /// Normalized to sum 1; all zero when the tree never split.
  const std::vector<double>& importances() const { return importance_; }
  bool has_split() const { return nodes_.size() > 1; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t depth() const { return depth_; }

 private:
  std::vector<Node> nodes_;
  std::vector<double> raw_importance_;
  std::vector<double> importance_;
  std::size_t depth_ = 0;
};

class RegressionForest {
 public:
  /// Throws std::invalid_argument on mismatched shapes or too few samples
  /// (rows < 2 * min_leaf). Default keys are the column indices.
  static RegressionForest fit(const Matrix& x, const Matrix& y, const ForestOptions& options,
                              std::span<const std::uint64_t> keys = {});

  std::vector<double> predict(std::span<const double> features) const;
  /// Mean of per-tree normalized importances over trees that split,
  /// renormalized to sum 1. All zero when degenerate().
  const std::vector<double>& importances() const { return importance_; }
  /// No tree found a valid split (e.g. constant features).
  bool degenerate() const { return degenerate_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

 private:
  std::vector<RegressionTree> trees_;
  std::vector<double> importance_;
  bool degenerate_ = false;
};

}  // namespace dia
