// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cldg/kernels.hpp"
#include "cldg/tensor.hpp"

namespace cldg {

enum class CorrectionKind { channel_wise, inter_channel };

std::string_view to_string(CorrectionKind kind);
/// Accepts "cw"/"channel_wise" and "ic"/"inter_channel".
CorrectionKind parse_correction_kind(std::string_view text);

/// A single linear correction transform stored in residual form:
/// channel-wise   y[c,t] = (w[c] + 1) * x[c,t]
/// inter-channel  y[:,t] = (W + I) * x[:,t]
/// Zero parameters give the identity map.
struct CorrectionLayer {
  CorrectionKind kind = CorrectionKind::inter_channel;
  /// The layer sits between the output of base layer `position` and the
  /// input of base layer `position + 1`.
  std::size_t position = 0;
  std::size_t channels = 0;
  /// Length C for channel-wise, C x C for inter-channel.
  Tensor params;

  static CorrectionLayer identity(CorrectionKind kind, std::size_t position,
                                  std::size_t channels);
  std::size_t parameter_count() const { return params.numel(); }
  /// The full C x C transform (diag(w + 1) or W + I).
  Tensor effective_matrix() const;
  void validate() const;
};

Tensor apply_cw(const Tensor& x, const Tensor& w, MacCounter* macs = nullptr);
Tensor apply_ic(const Tensor& x, const Tensor& W, MacCounter* macs = nullptr);
Tensor apply_correction(const Tensor& x, const CorrectionLayer& cl, MacCounter* macs = nullptr);

struct CorrectionGrads {
  Tensor dx;
  Tensor dparams;
};

CorrectionGrads correction_backward(const Tensor& x, const CorrectionLayer& cl, const Tensor& dy,
                                    GradRequest want = {}, MacCounter* macs = nullptr);

/// Execution of (W + I) * v as a single-output-sample convolution: v is cut
/// into tiles of `tile` elements that become input channels, the tile index
/// becomes the kernel position, and each matrix row becomes an output
/// channel. The final tile is zero padded.
struct MatvecConvPlan {
  std::size_t channels = 0;
  std::size_t tile = 0;
  std::size_t tiles_per_row = 0;
  /// Shape of the packed input (tile x tiles_per_row) and of each tile.
  Shape packed_input_shape;
  Shape tile_shape;
  ConvParams conv;

  Tensor pack(std::span<const double> column) const;
  /// Runs the plan on every time column of a C x L input.
  Tensor execute(const Tensor& x, MacCounter* macs = nullptr) const;
};

MatvecConvPlan matvec_as_conv_mapping(const Tensor& W, std::int64_t tile);

}  // namespace cldg
