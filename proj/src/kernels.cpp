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

#include "dia/kernels.hpp"

#include <algorithm>
#include <vector>

#include <omp.h>

namespace dia::kernels {

namespace {

int g_threads = 0;

int resolved_threads() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

}  // namespace

void set_num_threads(int threads) { g_threads = threads < 0 ? 0 : threads; }
int num_threads() { return resolved_threads(); }

namespace serial {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<double> output) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t k = 0; k < g.out_channels; ++k) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double acc = 0.0;
          for (std::size_t c = 0; c < g.in_channels; ++c) {
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
              const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
              if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
                acc += input[((b * g.in_channels + c) * g.height + iy) * g.width + ix] *
                       weight[((k * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx];
              }
            }
          }
          output[((b * g.out_channels + k) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  std::fill(grad_input.begin(), grad_input.end(), 0.0);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t k = 0; k < g.out_channels; ++k) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double go = grad_output[((b * g.out_channels + k) * oh + oy) * ow + ox];
          for (std::size_t c = 0; c < g.in_channels; ++c) {
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
              const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
              if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
                grad_input[((b * g.in_channels + c) * g.height + iy) * g.width + ix] +=
                    go * weight[((k * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t k = 0; k < g.out_channels; ++k) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double go = grad_output[((b * g.out_channels + k) * oh + oy) * ow + ox];
          for (std::size_t c = 0; c < g.in_channels; ++c) {
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
              const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
              if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
                if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
                grad_weight[((k * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx] +=
                    go * input[((b * g.in_channels + c) * g.height + iy) * g.width + ix];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace serial

namespace parallel {

namespace {

// col is [in_channels*kh*kw, oh*ow] for one image.
void im2col(const ConvGeometry& g, const double* image, double* col) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const double* plane = image + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++row) {
        double* dst = col + row * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
          const bool row_ok = iy >= 0 && iy < static_cast<long>(g.height);
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
            dst[oy * ow + ox] = (row_ok && ix >= 0 && ix < static_cast<long>(g.width))
                                    ? plane[iy * g.width + ix]
                                    : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* image) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    double* plane = image + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++row) {
        const double* src = col + row * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.padding);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.padding);
            if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
            plane[iy * g.width + ix] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1 && g.padding == 0;
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<double> output) {
  const std::size_t pix = g.out_h() * g.out_w();
  const std::size_t rows = g.in_channels * g.kernel_h * g.kernel_w;
  const long batch = static_cast<long>(g.batch);
  const bool pointwise = is_pointwise(g);

#pragma omp parallel num_threads(resolved_threads())
  {
    std::vector<double> col(pointwise ? 0 : rows * pix);
#pragma omp for schedule(static)
    for (long b = 0; b < batch; ++b) {
      const double* image = input.data() + b * g.in_channels * g.height * g.width;
      const double* cols = image;
      if (!pointwise) {
        im2col(g, image, col.data());
        cols = col.data();
      }
      double* out = output.data() + b * g.out_channels * pix;
      std::fill(out, out + g.out_channels * pix, 0.0);
      for (std::size_t k = 0; k < g.out_channels; ++k) {
        double* out_row = out + k * pix;
        const double* w_row = weight.data() + k * rows;
        for (std::size_t r = 0; r < rows; ++r) {
          const double w = w_row[r];
          const double* src = cols + r * pix;
          for (std::size_t p = 0; p < pix; ++p) out_row[p] += w * src[p];
        }
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> grad_output,
                           std::span<const double> weight, std::span<double> grad_input) {
  const std::size_t pix = g.out_h() * g.out_w();
  const std::size_t rows = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t image_size = g.in_channels * g.height * g.width;
  const long batch = static_cast<long>(g.batch);
  const bool pointwise = is_pointwise(g);

#pragma omp parallel num_threads(resolved_threads())
  {
    std::vector<double> dcol(pointwise ? 0 : rows * pix);
#pragma omp for schedule(static)
    for (long b = 0; b < batch; ++b) {
      const double* go = grad_output.data() + b * g.out_channels * pix;
      double* gi = grad_input.data() + b * image_size;
      double* target = pointwise ? gi : dcol.data();
      std::fill(target, target + rows * pix, 0.0);
      for (std::size_t k = 0; k < g.out_channels; ++k) {
        const double* go_row = go + k * pix;
        const double* w_row = weight.data() + k * rows;
        for (std::size_t r = 0; r < rows; ++r) {
          const double w = w_row[r];
          double* dst = target + r * pix;
          for (std::size_t p = 0; p < pix; ++p) dst[p] += w * go_row[p];
        }
      }
      if (!pointwise) {
        std::fill(gi, gi + image_size, 0.0);
        col2im_add(g, dcol.data(), gi);
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, std::span<const double> input,
                            std::span<const double> grad_output, std::span<double> grad_weight) {
  const std::size_t pix = g.out_h() * g.out_w();
  const std::size_t rows = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t wsize = g.out_channels * rows;
  const long batch = static_cast<long>(g.batch);
  const bool pointwise = is_pointwise(g);
  std::vector<double> partial(g.batch * wsize);

#pragma omp parallel num_threads(resolved_threads())
  {
    std::vector<double> col(pointwise ? 0 : rows * pix);
#pragma omp for schedule(static)
    for (long b = 0; b < batch; ++b) {
      const double* image = input.data() + b * g.in_channels * g.height * g.width;
      const double* cols = image;
      if (!pointwise) {
        im2col(g, image, col.data());
        cols = col.data();
      }
      const double* go = grad_output.data() + b * g.out_channels * pix;
      double* dst = partial.data() + b * wsize;
      for (std::size_t k = 0; k < g.out_channels; ++k) {
        const double* go_row = go + k * pix;
        for (std::size_t r = 0; r < rows; ++r) {
          const double* src = cols + r * pix;
          double acc = 0.0;
          for (std::size_t p = 0; p < pix; ++p) acc += go_row[p] * src[p];
          dst[k * rows + r] = acc;
        }
      }
    }

    // Batch reduction in image order; each element owned by one thread.
#pragma omp for schedule(static)
    for (long i = 0; i < static_cast<long>(wsize); ++i) {
      double acc = 0.0;
      for (std::size_t b = 0; b < g.batch; ++b) acc += partial[b * wsize + i];
      grad_weight[i] = acc;
    }
  }
}

}  // namespace parallel

}  // namespace dia::kernels
