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

#include "dia/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dia/kernels.hpp"

namespace dia {

namespace {

// Grad buffer of input i, or nullptr when that input does not need one.
double* grad_of(detail::Node& self, std::size_t i) {
  auto& in = *self.inputs[i];
  if (!in.requires_grad) return nullptr;
  in.ensure_grad();
  return in.grad.data();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got " + shape_to_string(t.shape()));
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv_from_output) {
  std::vector<double> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [deriv_from_output](detail::Node& self) {
    double* gx = grad_of(self, 0);
    if (!gx) return;
    const auto& xin = self.inputs[0]->data;
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      gx[i] += self.grad[i] * deriv_from_output(xin[i], self.data[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (double* g = grad_of(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    const auto& va = self.inputs[0]->data;
    const auto& vb = self.inputs[1]->data;
    if (double* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * vb[i];
    }
    if (double* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += self.grad[i] * va[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  auto da = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * factor;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [factor](detail::Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
    }
  });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return Tensor::make_result({1}, {acc}, {a}, [](detail::Node& self) {
    if (double* g = grad_of(self, 0)) {
      const double go = self.grad[0];
      for (std::size_t i = 0; i < self.inputs[0]->data.size(); ++i) g[i] += go;
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  require_rank(input, 2, "linear", "input");
  require_rank(weight, 2, "linear", "weight");
  const std::size_t batch = input.dim(0), n = input.dim(1), m = weight.dim(0);
  if (weight.dim(1) != n) {
    throw ShapeError("linear: input " + shape_to_string(input.shape()) + " incompatible with weight " +
                     shape_to_string(weight.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{m}) {
    throw ShapeError("linear: bias " + shape_to_string(bias.shape()) + " expected [" +
                     std::to_string(m) + "]");
  }
  std::vector<double> out(batch * m);
  auto x = input.data(), w = weight.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = bias.defined() ? bias.data()[i] : 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += w[i * n + j] * x[b * n + j];
      out[b * m + i] = acc;
    }
  }
  std::vector<Tensor> inputs{input, weight};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor::make_result({batch, m}, std::move(out), std::move(inputs),
                             [batch, n, m](detail::Node& self) {
    const auto& xv = self.inputs[0]->data;
    const auto& wv = self.inputs[1]->data;
    const auto& go = self.grad;
    if (double* gx = grad_of(self, 0)) {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < m; ++i) {
          const double g = go[b * m + i];
          for (std::size_t j = 0; j < n; ++j) gx[b * n + j] += g * wv[i * n + j];
        }
    }
    if (double* gw = grad_of(self, 1)) {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t i = 0; i < m; ++i) {
          const double g = go[b * m + i];
          for (std::size_t j = 0; j < n; ++j) gw[i * n + j] += g * xv[b * n + j];
        }
    }
    if (self.inputs.size() > 2) {
      if (double* gb = grad_of(self, 2)) {
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t i = 0; i < m; ++i) gb[i] += go[b * m + i];
      }
    }
  });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t stride, std::size_t padding) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(kernel, 4, "conv2d", "kernel");
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  kernels::ConvGeometry g;
  g.batch = input.dim(0);
  g.in_channels = input.dim(1);
  g.height = input.dim(2);
  g.width = input.dim(3);
  g.out_channels = kernel.dim(0);
  g.kernel_h = kernel.dim(2);
  g.kernel_w = kernel.dim(3);
  g.stride = stride;
  g.padding = padding;
  if (kernel.dim(1) != g.in_channels) {
    throw ShapeError("conv2d: input channels " + std::to_string(g.in_channels) +
                     " do not match kernel " + shape_to_string(kernel.shape()));
  }
  if (g.kernel_h > g.height + 2 * padding || g.kernel_w > g.width + 2 * padding) {
    throw ShapeError("conv2d: kernel " + shape_to_string(kernel.shape()) +
                     " larger than padded input " + shape_to_string(input.shape()));
  }
  std::vector<double> out(g.output_size());
  kernels::parallel::conv2d_forward(g, input.data(), kernel.data(), out);
  return Tensor::make_result({g.batch, g.out_channels, g.out_h(), g.out_w()}, std::move(out),
                             {input, kernel}, [g](detail::Node& self) {
    const auto& xv = self.inputs[0]->data;
    const auto& wv = self.inputs[1]->data;
    if (double* gx = grad_of(self, 0)) {
      std::vector<double> tmp(g.input_size());
      kernels::parallel::conv2d_backward_input(g, self.grad, wv, tmp);
      for (std::size_t i = 0; i < tmp.size(); ++i) gx[i] += tmp[i];
    }
    if (double* gw = grad_of(self, 1)) {
      std::vector<double> tmp(g.weight_size());
      kernels::parallel::conv2d_backward_weight(g, xv, self.grad, tmp);
      for (std::size_t i = 0; i < tmp.size(); ++i) gw[i] += tmp[i];
    }
  });
}

Tensor global_average_pool(const Tensor& input) {
  require_rank(input, 4, "global_average_pool", "input");
  const std::size_t bn = input.dim(0) * input.dim(1);
  const std::size_t hw = input.dim(2) * input.dim(3);
  std::vector<double> out(bn);
  auto x = input.data();
  for (std::size_t i = 0; i < bn; ++i) {
    double acc = 0.0;
    for (std::size_t p = 0; p < hw; ++p) acc += x[i * hw + p];
    out[i] = acc / static_cast<double>(hw);
  }
  return Tensor::make_result({input.dim(0), input.dim(1)}, std::move(out), {input},
                             [bn, hw](detail::Node& self) {
    if (double* gx = grad_of(self, 0)) {
      const double inv = 1.0 / static_cast<double>(hw);
      for (std::size_t i = 0; i < bn; ++i) {
        const double g = self.grad[i] * inv;
        for (std::size_t p = 0; p < hw; ++p) gx[i * hw + p] += g;
      }
    }
  });
}

Tensor channelwise_mul(const Tensor& features, const Tensor& scale_vec) {
  require_rank(features, 4, "channelwise_mul", "features");
  require_rank(scale_vec, 2, "channelwise_mul", "scale");
  if (scale_vec.dim(0) != features.dim(0) || scale_vec.dim(1) != features.dim(1)) {
    throw ShapeError("channelwise_mul: scale " + shape_to_string(scale_vec.shape()) +
                     " does not match features " + shape_to_string(features.shape()));
  }
  const std::size_t bn = features.dim(0) * features.dim(1);
  const std::size_t hw = features.dim(2) * features.dim(3);
  std::vector<double> out(features.numel());
  auto f = features.data(), s = scale_vec.data();
  for (std::size_t i = 0; i < bn; ++i)
    for (std::size_t p = 0; p < hw; ++p) out[i * hw + p] = f[i * hw + p] * s[i];
  return Tensor::make_result(features.shape(), std::move(out), {features, scale_vec},
                             [bn, hw](detail::Node& self) {
    const auto& fv = self.inputs[0]->data;
    const auto& sv = self.inputs[1]->data;
    if (double* gf = grad_of(self, 0)) {
      for (std::size_t i = 0; i < bn; ++i)
        for (std::size_t p = 0; p < hw; ++p) gf[i * hw + p] += self.grad[i * hw + p] * sv[i];
    }
    if (double* gs = grad_of(self, 1)) {
      for (std::size_t i = 0; i < bn; ++i) {
        double acc = 0.0;
        for (std::size_t p = 0; p < hw; ++p) acc += self.grad[i * hw + p] * fv[i * hw + p];
        gs[i] += acc;
      }
    }
  });
}

BatchNormState BatchNormState::create(std::size_t channels) {
  BatchNormState s;
  s.running_mean = Tensor::zeros({channels});
  s.running_var = Tensor::full({channels}, 1.0);
  return s;
}

Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, bool training) {
  if (input.rank() != 4 && input.rank() != 2) {
    throw ShapeError("batch_norm: input must be [B,N,H,W] or [B,N], got " +
                     shape_to_string(input.shape()));
  }
  const std::size_t batch = input.dim(0), channels = input.dim(1);
  const std::size_t hw = input.rank() == 4 ? input.dim(2) * input.dim(3) : 1;
  const std::size_t count = batch * hw;
  const bool affine = gamma.defined();
  if (affine && (gamma.shape() != Shape{channels} || !beta.defined() || beta.shape() != Shape{channels})) {
    throw ShapeError("batch_norm: gamma/beta must be [" + std::to_string(channels) + "]");
  }
  if (state.running_mean.shape() != Shape{channels}) {
    throw ShapeError("batch_norm: running statistics sized " +
                     shape_to_string(state.running_mean.shape()) + " for " +
                     std::to_string(channels) + " channels");
  }
  if (training && count < 2) {
    throw ShapeError("batch_norm: training mode needs at least 2 values per channel, got " +
                     shape_to_string(input.shape()));
  }

  auto x = input.data();
  std::vector<double> mean(channels), invstd(channels);
  if (training) {
    auto rm = state.running_mean.data(), rv = state.running_var.data();
    for (std::size_t c = 0; c < channels; ++c) {
      double acc = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t p = 0; p < hw; ++p) acc += x[(b * channels + c) * hw + p];
      const double mu = acc / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t p = 0; p < hw; ++p) {
          const double d = x[(b * channels + c) * hw + p] - mu;
          sq += d * d;
        }
      const double var = sq / static_cast<double>(count);
      mean[c] = mu;
      invstd[c] = 1.0 / std::sqrt(var + state.eps);
      const double unbiased = sq / static_cast<double>(count - 1);
      rm[c] = (1.0 - state.momentum) * rm[c] + state.momentum * mu;
      rv[c] = (1.0 - state.momentum) * rv[c] + state.momentum * unbiased;
    }
  } else {
    auto rm = state.running_mean.data(), rv = state.running_var.data();
    for (std::size_t c = 0; c < channels; ++c) {
      mean[c] = rm[c];
      invstd[c] = 1.0 / std::sqrt(rv[c] + state.eps);
    }
  }

  std::vector<double> xhat(input.numel()), out(input.numel());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      const double g = affine ? gamma.data()[c] : 1.0;
      const double sh = affine ? beta.data()[c] : 0.0;
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t i = (b * channels + c) * hw + p;
        xhat[i] = (x[i] - mean[c]) * invstd[c];
        out[i] = g * xhat[i] + sh;
      }
    }

  std::vector<Tensor> inputs{input};
  if (affine) {
    inputs.push_back(gamma);
    inputs.push_back(beta);
  }
  return Tensor::make_result(
      input.shape(), std::move(out), std::move(inputs),
      [xhat = std::move(xhat), invstd = std::move(invstd), batch, channels, hw, count, training,
       affine](detail::Node& self) {
        const auto& go = self.grad;
        std::vector<double> sum_dy(channels, 0.0), sum_dy_xhat(channels, 0.0);
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t p = 0; p < hw; ++p) {
              const std::size_t i = (b * channels + c) * hw + p;
              sum_dy[c] += go[i];
              sum_dy_xhat[c] += go[i] * xhat[i];
            }
        if (affine) {
          if (double* gg = grad_of(self, 1))
            for (std::size_t c = 0; c < channels; ++c) gg[c] += sum_dy_xhat[c];
          if (double* gb = grad_of(self, 2))
            for (std::size_t c = 0; c < channels; ++c) gb[c] += sum_dy[c];
        }
        double* gx = grad_of(self, 0);
        if (!gx) return;
        const double n = static_cast<double>(count);
        for (std::size_t c = 0; c < channels; ++c) {
          const double g = affine ? self.inputs[1]->data[c] : 1.0;
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t p = 0; p < hw; ++p) {
              const std::size_t i = (b * channels + c) * hw + p;
              if (training) {
                gx[i] += g * invstd[c] / n * (n * go[i] - sum_dy[c] - xhat[i] * sum_dy_xhat[c]);
              } else {
                gx[i] += g * invstd[c] * go[i];
              }
            }
        }
      });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy", "logits");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                     std::to_string(batch));
  }
  auto z = logits.data();
  std::vector<double> prob(batch * classes);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ShapeError("softmax_cross_entropy: label " + std::to_string(label) + " outside [0," +
                       std::to_string(classes) + ")");
    }
    const double* row = z.data() + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t k = 0; k < classes; ++k) denom += std::exp(row[k] - mx);
    const double log_denom = std::log(denom);
    for (std::size_t k = 0; k < classes; ++k) prob[b * classes + k] = std::exp(row[k] - mx - log_denom);
    loss -= row[label] - mx - log_denom;
  }
  loss /= static_cast<double>(batch);
  std::vector<int> label_copy(labels.begin(), labels.end());
  return Tensor::make_result({1}, {loss}, {logits},
                             [prob = std::move(prob), label_copy = std::move(label_copy), batch,
                              classes](detail::Node& self) {
    double* g = grad_of(self, 0);
    if (!g) return;
    const double go = self.grad[0] / static_cast<double>(batch);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < classes; ++k) {
        const double target = static_cast<int>(k) == label_copy[b] ? 1.0 : 0.0;
        g[b * classes + k] += go * (prob[b * classes + k] - target);
      }
  });
}

}  // namespace dia
