// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "cldg/tensor.hpp"

namespace cldg {

/// Multiply-accumulate tallies. Kernels add the number of multiply-accumulate
/// steps they actually execute; bias additions, comparisons and
/// elementwise activations add nothing.
struct MacCounter {
  std::uint64_t forward = 0;
  std::uint64_t backward_data = 0;
  std::uint64_t backward_weight = 0;

  std::uint64_t total() const noexcept { return forward + backward_data + backward_weight; }
  MacCounter& operator+=(const MacCounter& other) noexcept {
    forward += other.forward;
    backward_data += other.backward_data;
    backward_weight += other.backward_weight;
    return *this;
  }
  friend bool operator==(const MacCounter&, const MacCounter&) = default;
};

/// Which gradients a backward kernel should produce. Skipped outputs are
/// returned empty and cost no MACs.
struct GradRequest {
  bool data = true;
  bool weight = true;
};

/// Valid (unpadded) 1D convolution. weights: out x in x kernel_len, bias: out.
struct ConvParams {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_len = 0;
  std::size_t stride = 1;
  Tensor weights;
  Tensor bias;

  /// Zero weights and bias of the declared dimensions.
  static ConvParams zeros(std::size_t out, std::size_t in, std::size_t kernel_len,
                          std::size_t stride = 1);
  void validate() const;
  std::size_t output_length(std::size_t input_length) const;
  double weight(std::size_t o, std::size_t i, std::size_t k) const {
    return weights[(o * in_channels + i) * kernel_len + k];
  }
};

/// Dense layer over the row-major flattening of its input. weights: n_out x n_in.
struct FcParams {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  Tensor weights;
  Tensor bias;

  static FcParams zeros(std::size_t n_in, std::size_t n_out);
  void validate() const;
};

struct ConvGrads {
  Tensor dx;
  Tensor dw;
  Tensor db;
};

struct FcGrads {
  Tensor dx;
  Tensor dw;
  Tensor db;
};

struct MaxPoolResult {
  Tensor out;
  /// Flat input index of the selected element for every output element.
  std::vector<std::size_t> argmax;
};

// Convolution. Each output is accumulated kernel-position-major, then over
// input channels, starting from 0.0; the bias is added last.
Tensor conv1d_forward(const Tensor& x, const ConvParams& p, MacCounter* macs = nullptr);
ConvGrads conv1d_backward(const Tensor& x, const ConvParams& p, const Tensor& dy,
                          GradRequest want = {}, MacCounter* macs = nullptr);

// Fully connected. Accepts any input whose element count equals n_in and
// returns an n_out x 1 tensor.
Tensor fc_forward(const Tensor& x, const FcParams& p, MacCounter* macs = nullptr);
FcGrads fc_backward(const Tensor& x, const FcParams& p, const Tensor& dy,
                    GradRequest want = {}, MacCounter* macs = nullptr);

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& dy);

/// Non-overlapping max pooling along the length axis (stride = window).
/// Ties go to the first maximum.
MaxPoolResult maxpool1d_forward(const Tensor& x, std::size_t window);
Tensor maxpool1d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                          const Tensor& dy);

/// Mean over the length axis: C x L -> C x 1.
Tensor global_avg_pool_forward(const Tensor& x);
Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& dy);

struct LossResult {
  double loss = 0.0;
  Tensor dlogits;
};

/// Cross-entropy of softmax(logits) against a class index, computed with a
/// shifted log-sum-exp. dlogits = softmax(logits) - onehot(label).
LossResult softmax_cross_entropy(const Tensor& logits, std::size_t label);

std::vector<double> softmax(const Tensor& logits);
std::size_t argmax(const Tensor& logits);

}  // namespace cldg
