// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include "cldg/correction.hpp"

#include "cldg/error.hpp"

namespace cldg {

std::string_view to_string(CorrectionKind kind) {
  return kind == CorrectionKind::channel_wise ? "channel_wise" : "inter_channel";
}

CorrectionKind parse_correction_kind(std::string_view text) {
  if (text == "cw" || text == "channel_wise") return CorrectionKind::channel_wise;
  if (text == "ic" || text == "inter_channel") return CorrectionKind::inter_channel;
  throw ArgumentError("unknown correction kind '" + std::string(text) +
                      "' (expected cw|channel_wise|ic|inter_channel)");
}

CorrectionLayer CorrectionLayer::identity(CorrectionKind kind, std::size_t position,
                                          std::size_t channels) {
  CorrectionLayer cl;
  cl.kind = kind;
  cl.position = position;
  cl.channels = channels;
  cl.params = kind == CorrectionKind::channel_wise ? Tensor({channels})
                                                   : Tensor({channels, channels});
  return cl;
}

void CorrectionLayer::validate() const {
  const Shape expected = kind == CorrectionKind::channel_wise ? Shape{channels}
                                                              : Shape{channels, channels};
  if (channels == 0 || params.shape() != expected) {
    throw DimensionError("correction layer (" + std::string(to_string(kind)) +
                         ") params have shape " + shape_to_string(params.shape()) +
                         ", expected " + shape_to_string(expected));
  }
}

Tensor CorrectionLayer::effective_matrix() const {
  validate();
  Tensor m({channels, channels});
  for (std::size_t a = 0; a < channels; ++a) {
    if (kind == CorrectionKind::channel_wise) {
      m.at(a, a) = params[a] + 1.0;
    } else {
      for (std::size_t b = 0; b < channels; ++b) {
        m.at(a, b) = params.at(a, b) + (a == b ? 1.0 : 0.0);
      }
    }
  }
  return m;
}

namespace {

void require_channels(const Tensor& x, std::size_t channels, const char* op) {
  if (x.rank() != 2 || x.dim(0) != channels) {
    throw DimensionError(std::string(op) + ": input " + shape_to_string(x.shape()) +
                         " does not have " + std::to_string(channels) + " channels");
  }
}

}  // namespace

Tensor apply_cw(const Tensor& x, const Tensor& w, MacCounter* macs) {
  if (w.rank() != 1) throw DimensionError("apply_cw: w must be a vector");
  const std::size_t channels = w.numel();
  require_channels(x, channels, "apply_cw");
  const std::size_t len = x.dim(1);
  Tensor y(x.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const double scale = w[c] + 1.0;
    for (std::size_t t = 0; t < len; ++t) y[c * len + t] = scale * x[c * len + t];
  }
  if (macs) macs->forward += channels * len;
  return y;
}

Tensor apply_ic(const Tensor& x, const Tensor& W, MacCounter* macs) {
  if (W.rank() != 2 || W.dim(0) != W.dim(1)) {
    throw DimensionError("apply_ic: W must be square, got " + shape_to_string(W.shape()));
  }
  const std::size_t channels = W.dim(0);
  require_channels(x, channels, "apply_ic");
  const std::size_t len = x.dim(1);
  Tensor y(x.shape());
  // y[a, :] accumulates (W + I)[a, b] * x[b, :] in increasing b.
  for (std::size_t a = 0; a < channels; ++a) {
    double* ya = y.raw() + a * len;
    for (std::size_t b = 0; b < channels; ++b) {
      const double m = W.at(a, b) + (a == b ? 1.0 : 0.0);
      const double* xb = x.raw() + b * len;
      for (std::size_t t = 0; t < len; ++t) ya[t] += m * xb[t];
    }
  }
  if (macs) macs->forward += static_cast<std::uint64_t>(channels) * channels * len;
  return y;
}

Tensor apply_correction(const Tensor& x, const CorrectionLayer& cl, MacCounter* macs) {
  return cl.kind == CorrectionKind::channel_wise ? apply_cw(x, cl.params, macs)
                                                 : apply_ic(x, cl.params, macs);
}

CorrectionGrads correction_backward(const Tensor& x, const CorrectionLayer& cl, const Tensor& dy,
                                    GradRequest want, MacCounter* macs) {
  cl.validate();
  const std::size_t channels = cl.channels;
  require_channels(x, channels, "correction_backward");
  if (dy.shape() != x.shape()) {
    throw DimensionError("correction_backward: dL_dy has shape " + shape_to_string(dy.shape()) +
                         ", expected " + shape_to_string(x.shape()));
  }
  const std::size_t len = x.dim(1);
  CorrectionGrads g;
  if (cl.kind == CorrectionKind::channel_wise) {
    const auto count = static_cast<std::uint64_t>(channels) * len;
    if (want.data) {
      g.dx = Tensor(x.shape());
      for (std::size_t c = 0; c < channels; ++c) {
        const double scale = cl.params[c] + 1.0;
        for (std::size_t t = 0; t < len; ++t) g.dx[c * len + t] = scale * dy[c * len + t];
      }
      if (macs) macs->backward_data += count;
    }
    if (want.weight) {
      g.dparams = Tensor({channels});
      for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (std::size_t t = 0; t < len; ++t) acc += dy[c * len + t] * x[c * len + t];
        g.dparams[c] = acc;
      }
      if (macs) macs->backward_weight += count;
    }
    return g;
  }

  const auto count = static_cast<std::uint64_t>(channels) * channels * len;
  if (want.data) {
    // dx = (W + I)^T dy
    g.dx = Tensor(x.shape());
    for (std::size_t a = 0; a < channels; ++a) {
      const double* dya = dy.raw() + a * len;
      for (std::size_t b = 0; b < channels; ++b) {
        const double m = cl.params.at(a, b) + (a == b ? 1.0 : 0.0);
        double* dxb = g.dx.raw() + b * len;
        for (std::size_t t = 0; t < len; ++t) dxb[t] += m * dya[t];
      }
    }
    if (macs) macs->backward_data += count;
  }
  if (want.weight) {
    g.dparams = Tensor({channels, channels});
    for (std::size_t a = 0; a < channels; ++a) {
      const double* dya = dy.raw() + a * len;
      for (std::size_t b = 0; b < channels; ++b) {
        const double* xb = x.raw() + b * len;
        double acc = 0.0;
        for (std::size_t t = 0; t < len; ++t) acc += dya[t] * xb[t];
        g.dparams.at(a, b) = acc;
      }
    }
    if (macs) macs->backward_weight += count;
  }
  return g;
}

MatvecConvPlan matvec_as_conv_mapping(const Tensor& W, std::int64_t tile) {
  if (tile <= 0) {
    throw ArgumentError("matvec_as_conv_mapping: tile must be positive, got " +
                        std::to_string(tile));
  }
  if (W.rank() != 2 || W.dim(0) != W.dim(1)) {
    throw DimensionError("matvec_as_conv_mapping: W must be square, got " +
                         shape_to_string(W.shape()));
  }
  const std::size_t channels = W.dim(0);
  const auto t = static_cast<std::size_t>(tile);
  MatvecConvPlan plan;
  plan.channels = channels;
  plan.tile = t;
  plan.tiles_per_row = (channels + t - 1) / t;
  plan.packed_input_shape = {t, plan.tiles_per_row};
  plan.tile_shape = {t, 1};
  plan.conv = ConvParams::zeros(channels, t, plan.tiles_per_row, 1);
  for (std::size_t row = 0; row < channels; ++row) {
    for (std::size_t k = 0; k < plan.tiles_per_row; ++k) {
      for (std::size_t i = 0; i < t; ++i) {
        const std::size_t col = k * t + i;
        if (col >= channels) continue;
        plan.conv.weights[(row * t + i) * plan.tiles_per_row + k] =
            W.at(row, col) + (row == col ? 1.0 : 0.0);
      }
    }
  }
  return plan;
}

Tensor MatvecConvPlan::pack(std::span<const double> column) const {
  if (column.size() != channels) {
    throw DimensionError("MatvecConvPlan::pack: column has " + std::to_string(column.size()) +
                         " elements, plan expects " + std::to_string(channels));
  }
  Tensor packed(packed_input_shape);
  for (std::size_t j = 0; j < channels; ++j) {
    packed[(j % tile) * tiles_per_row + j / tile] = column[j];
  }
  return packed;
}

Tensor MatvecConvPlan::execute(const Tensor& x, MacCounter* macs) const {
  if (x.rank() != 2 || x.dim(0) != channels) {
    throw DimensionError("MatvecConvPlan::execute: input " + shape_to_string(x.shape()) +
                         " does not have " + std::to_string(channels) + " channels");
  }
  const std::size_t len = x.dim(1);
  Tensor y(x.shape());
  std::vector<double> column(channels);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t c = 0; c < channels; ++c) column[c] = x[c * len + t];
    const Tensor out = conv1d_forward(pack(column), conv, macs);
    for (std::size_t c = 0; c < channels; ++c) y[c * len + t] = out[c];
  }
  return y;
}

}  // namespace cldg
