// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include "cldg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cldg/error.hpp"

namespace cldg {

namespace {

void require_rank2(const Tensor& x, const char* op) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected channels x length input, got " +
                         shape_to_string(x.shape()));
  }
}

void require_shape(const Tensor& t, const Shape& expected, const char* op, const char* what) {
  if (t.shape() != expected) {
    throw DimensionError(std::string(op) + ": " + what + " has shape " +
                         shape_to_string(t.shape()) + ", expected " +
                         shape_to_string(expected));
  }
}

}  // namespace

ConvParams ConvParams::zeros(std::size_t out, std::size_t in, std::size_t kernel_len,
                             std::size_t stride) {
  ConvParams p;
  p.out_channels = out;
  p.in_channels = in;
  p.kernel_len = kernel_len;
  p.stride = stride;
  p.weights = Tensor({out, in, kernel_len});
  p.bias = Tensor({out});
  p.validate();
  return p;
}

void ConvParams::validate() const {
  if (out_channels == 0 || in_channels == 0 || kernel_len == 0 || stride == 0) {
    throw DimensionError("conv1d: channels, kernel_len and stride must be positive");
  }
  require_shape(weights, {out_channels, in_channels, kernel_len}, "conv1d", "weights");
  require_shape(bias, {out_channels}, "conv1d", "bias");
}

std::size_t ConvParams::output_length(std::size_t input_length) const {
  if (input_length < kernel_len) {
    throw DimensionError("conv1d: input length " + std::to_string(input_length) +
                         " is shorter than kernel_len " + std::to_string(kernel_len));
  }
  return (input_length - kernel_len) / stride + 1;
}

FcParams FcParams::zeros(std::size_t n_in, std::size_t n_out) {
  FcParams p;
  p.n_in = n_in;
  p.n_out = n_out;
  p.weights = Tensor({n_out, n_in});
  p.bias = Tensor({n_out});
  p.validate();
  return p;
}

void FcParams::validate() const {
  if (n_in == 0 || n_out == 0) throw DimensionError("fc: n_in and n_out must be positive");
  require_shape(weights, {n_out, n_in}, "fc", "weights");
  require_shape(bias, {n_out}, "fc", "bias");
}

Tensor conv1d_forward(const Tensor& x, const ConvParams& p, MacCounter* macs) {
  require_rank2(x, "conv1d_forward");
  if (x.dim(0) != p.in_channels) {
    throw DimensionError("conv1d_forward: input axis 0 (channels) is " +
                         std::to_string(x.dim(0)) + ", layer expects " +
                         std::to_string(p.in_channels));
  }
  const std::size_t in_len = x.dim(1);
  const std::size_t out_len = p.output_length(in_len);
  const std::size_t s = p.stride;
  Tensor y({p.out_channels, out_len});
  std::uint64_t count = 0;
  // Loop nest is (o, k, i, t); every y[o, t] sees its terms in (k, i) order.
  for (std::size_t o = 0; o < p.out_channels; ++o) {
    double* yo = y.raw() + o * out_len;
    for (std::size_t k = 0; k < p.kernel_len; ++k) {
      for (std::size_t i = 0; i < p.in_channels; ++i) {
        const double w = p.weight(o, i, k);
        const double* xi = x.raw() + i * in_len + k;
        for (std::size_t t = 0; t < out_len; ++t) yo[t] += w * xi[t * s];
        count += out_len;
      }
    }
    const double b = p.bias[o];
    for (std::size_t t = 0; t < out_len; ++t) yo[t] += b;
  }
  if (macs) macs->forward += count;
  return y;
}

ConvGrads conv1d_backward(const Tensor& x, const ConvParams& p, const Tensor& dy,
                          GradRequest want, MacCounter* macs) {
  require_rank2(x, "conv1d_backward");
  if (x.dim(0) != p.in_channels) {
    throw DimensionError("conv1d_backward: input axis 0 (channels) is " +
                         std::to_string(x.dim(0)) + ", layer expects " +
                         std::to_string(p.in_channels));
  }
  const std::size_t in_len = x.dim(1);
  const std::size_t out_len = p.output_length(in_len);
  require_shape(dy, {p.out_channels, out_len}, "conv1d_backward", "dL_dy");
  const std::size_t s = p.stride;

  ConvGrads g;
  if (want.data) {
    g.dx = Tensor(x.shape());
    std::uint64_t count = 0;
    for (std::size_t o = 0; o < p.out_channels; ++o) {
      const double* dyo = dy.raw() + o * out_len;
      for (std::size_t i = 0; i < p.in_channels; ++i) {
        double* dxi = g.dx.raw() + i * in_len;
        for (std::size_t k = 0; k < p.kernel_len; ++k) {
          const double w = p.weight(o, i, k);
          for (std::size_t t = 0; t < out_len; ++t) dxi[t * s + k] += w * dyo[t];
          count += out_len;
        }
      }
    }
    if (macs) macs->backward_data += count;
  }
  if (want.weight) {
    g.dw = Tensor(p.weights.shape());
    g.db = Tensor(p.bias.shape());
    std::uint64_t count = 0;
    for (std::size_t o = 0; o < p.out_channels; ++o) {
      const double* dyo = dy.raw() + o * out_len;
      double bsum = 0.0;
      for (std::size_t t = 0; t < out_len; ++t) bsum += dyo[t];
      g.db[o] = bsum;
      for (std::size_t i = 0; i < p.in_channels; ++i) {
        const double* xi = x.raw() + i * in_len;
        for (std::size_t k = 0; k < p.kernel_len; ++k) {
          double acc = 0.0;
          for (std::size_t t = 0; t < out_len; ++t) acc += dyo[t] * xi[t * s + k];
          g.dw[(o * p.in_channels + i) * p.kernel_len + k] = acc;
          count += out_len;
        }
      }
    }
    if (macs) macs->backward_weight += count;
  }
  return g;
}

Tensor fc_forward(const Tensor& x, const FcParams& p, MacCounter* macs) {
  if (x.numel() != p.n_in) {
    throw DimensionError("fc_forward: input " + shape_to_string(x.shape()) + " has " +
                         std::to_string(x.numel()) + " elements, layer expects n_in=" +
                         std::to_string(p.n_in));
  }
  Tensor y({p.n_out, 1});
  for (std::size_t o = 0; o < p.n_out; ++o) {
    const double* w = p.weights.raw() + o * p.n_in;
    double acc = 0.0;
    for (std::size_t j = 0; j < p.n_in; ++j) acc += w[j] * x[j];
    y[o] = acc + p.bias[o];
  }
  if (macs) macs->forward += static_cast<std::uint64_t>(p.n_in) * p.n_out;
  return y;
}

FcGrads fc_backward(const Tensor& x, const FcParams& p, const Tensor& dy, GradRequest want,
                    MacCounter* macs) {
  if (x.numel() != p.n_in) {
    throw DimensionError("fc_backward: input has " + std::to_string(x.numel()) +
                         " elements, layer expects n_in=" + std::to_string(p.n_in));
  }
  if (dy.numel() != p.n_out) {
    throw DimensionError("fc_backward: dL_dy has " + std::to_string(dy.numel()) +
                         " elements, layer has n_out=" + std::to_string(p.n_out));
  }
  FcGrads g;
  const auto pairs = static_cast<std::uint64_t>(p.n_in) * p.n_out;
  if (want.data) {
    g.dx = Tensor(x.shape());
    for (std::size_t o = 0; o < p.n_out; ++o) {
      const double* w = p.weights.raw() + o * p.n_in;
      const double d = dy[o];
      for (std::size_t j = 0; j < p.n_in; ++j) g.dx[j] += w[j] * d;
    }
    if (macs) macs->backward_data += pairs;
  }
  if (want.weight) {
    g.dw = Tensor(p.weights.shape());
    g.db = Tensor(p.bias.shape());
    for (std::size_t o = 0; o < p.n_out; ++o) {
      double* dw = g.dw.raw() + o * p.n_in;
      const double d = dy[o];
      for (std::size_t j = 0; j < p.n_in; ++j) dw[j] = d * x[j];
      g.db[o] = d;
    }
    if (macs) macs->backward_weight += pairs;
  }
  return g;
}

Tensor relu_forward(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  require_shape(dy, x.shape(), "relu_backward", "dL_dy");
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

MaxPoolResult maxpool1d_forward(const Tensor& x, std::size_t window) {
  require_rank2(x, "maxpool1d_forward");
  if (window == 0) throw DimensionError("maxpool1d_forward: window must be positive");
  const std::size_t channels = x.dim(0);
  const std::size_t len = x.dim(1);
  if (window > len) {
    throw DimensionError("maxpool1d_forward: window " + std::to_string(window) +
                         " exceeds input axis 1 (length) " + std::to_string(len));
  }
  const std::size_t out_len = len / window;
  MaxPoolResult r{Tensor({channels, out_len}), std::vector<std::size_t>(channels * out_len)};
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t best = c * len + t * window;
      for (std::size_t j = 1; j < window; ++j) {
        const std::size_t idx = c * len + t * window + j;
        if (x[idx] > x[best]) best = idx;
      }
      r.out[c * out_len + t] = x[best];
      r.argmax[c * out_len + t] = best;
    }
  }
  return r;
}

Tensor maxpool1d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                          const Tensor& dy) {
  if (dy.numel() != argmax.size()) {
    throw DimensionError("maxpool1d_backward: dL_dy has " + std::to_string(dy.numel()) +
                         " elements, forward produced " + std::to_string(argmax.size()));
  }
  Tensor dx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += dy[i];
  return dx;
}

Tensor global_avg_pool_forward(const Tensor& x) {
  require_rank2(x, "global_avg_pool_forward");
  const std::size_t channels = x.dim(0);
  const std::size_t len = x.dim(1);
  Tensor y({channels, 1});
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t t = 0; t < len; ++t) acc += x[c * len + t];
    y[c] = acc / static_cast<double>(len);
  }
  return y;
}

Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& dy) {
  if (input_shape.size() != 2 || dy.numel() != input_shape[0]) {
    throw DimensionError("global_avg_pool_backward: dL_dy has " + std::to_string(dy.numel()) +
                         " elements for input " + shape_to_string(input_shape));
  }
  const std::size_t len = input_shape[1];
  Tensor dx(input_shape);
  for (std::size_t c = 0; c < input_shape[0]; ++c) {
    const double g = dy[c] / static_cast<double>(len);
    for (std::size_t t = 0; t < len; ++t) dx[c * len + t] = g;
  }
  return dx;
}

std::vector<double> softmax(const Tensor& logits) {
  const auto z = logits.data();
  const double shift = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - shift);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  if (label >= logits.numel()) {
    throw ArgumentError("softmax_cross_entropy: label " + std::to_string(label) +
                        " out of range for " + std::to_string(logits.numel()) + " classes");
  }
  const auto z = logits.data();
  const double shift = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - shift);
  const double log_sum = shift + std::log(total);

  LossResult r{log_sum - z[label], Tensor(logits.shape())};
  for (std::size_t i = 0; i < z.size(); ++i) r.dlogits[i] = std::exp(z[i] - log_sum);
  r.dlogits[label] -= 1.0;
  // Rounding in log_sum can make a saturated loss come out as -0 or -eps.
  r.loss = std::max(r.loss, 0.0);
  return r;
}

std::size_t argmax(const Tensor& logits) {
  const auto z = logits.data();
  return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

}  // namespace cldg
