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

#include <cstddef>
#include <span>
#include <vector>

#include "dia/tensor.hpp"

namespace dia {

// Elementwise arithmetic on equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// Sum of all entries as a [1] tensor.
Tensor sum(const Tensor& a);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);

/// input [B,n], weight [m,n], optional bias [m] -> [B,m].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias = {});

/// Cross-correlation. input [B,C,H,W], kernel [K,C,kh,kw] -> [B,K,H',W'] with
/// H' = (H + 2*padding - kh) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride = 1,
              std::size_t padding = 0);

/// [B,N,H,W] -> [B,N] per-channel spatial mean.
Tensor global_average_pool(const Tensor& input);

/// out[b,n,h,w] = features[b,n,h,w] * scale[b,n].
Tensor channelwise_mul(const Tensor& features, const Tensor& scale);

/// Running statistics for one normalized layer.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  static BatchNormState create(std::size_t channels);
};

/// Per-channel standardization over (batch, spatial) for [B,N,H,W] or [B,N].
/// Training mode normalizes with batch statistics (biased variance) and updates
/// the running estimates with the unbiased variance; inference mode uses the
/// running estimates. gamma/beta may be undefined to disable the affine part.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training);

/// Mean negative log-likelihood of softmax(logits) at the given labels.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace dia
