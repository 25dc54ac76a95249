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

// Raw convolution kernels on flat (batch, channel, height, width) buffers.
//
// Two implementations share one signature set:
//   serial::   direct nested loops, the reference used by tests and benchmarks;
//   parallel:: im2col + row-major GEMM, OpenMP-parallel over the batch.
//
// The parallel path is bitwise independent of the thread count: every image
// is computed by one thread, and the weight gradient is reduced over the batch
// in a fixed order.

#include <cstddef>
#include <span>

namespace dia::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_h() const { return (height + 2 * padding - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (width + 2 * padding - kernel_w) / stride + 1; }
  std::size_t input_size() const { return batch * in_channels * height * width; }
  std::size_t weight_size() const { return out_channels * in_channels * kernel_h * kernel_w; }
  std::size_t output_size() const { return batch * out_channels * out_h() * out_w(); }
};

namespace serial {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<double> output);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input);
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight);

}  // namespace serial

namespace parallel {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<double> output);
void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input);
void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight);

}  // namespace parallel

/// Thread count used by the parallel kernels; 0 means the OpenMP default.
void set_num_threads(int threads);
int num_threads();

}  // namespace dia::kernels
