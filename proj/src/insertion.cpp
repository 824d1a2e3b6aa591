// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include "cldg/insertion.hpp"

#include <string>

#include "cldg/error.hpp"

namespace cldg {

std::vector<std::size_t> insertion_positions(const ModelGraph& m) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p + 1 < m.size(); ++p) out.push_back(p);
  return out;
}

std::vector<std::size_t> block_boundaries(const ModelGraph& m) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p + 1 < m.size(); ++p) {
    const auto next = m.layer(p + 1).kind();
    if (next == LayerKind::conv1d || next == LayerKind::fc || next == LayerKind::gap) {
      out.push_back(p);
    }
  }
  return out;
}

ModelGraph insert_correction(const ModelGraph& m, CorrectionKind kind, std::size_t position) {
  if (m.correction_index()) {
    throw ArgumentError("insert_correction: model already has a correction layer at position " +
                        std::to_string(m.correction()->position));
  }
  if (position + 1 >= m.size()) {
    throw ArgumentError("insert_correction: position " + std::to_string(position) +
                        " out of range; valid positions are 0.." +
                        (m.size() >= 2 ? std::to_string(m.size() - 2) : std::string("(none)")));
  }
  std::vector<LayerSpec> layers;
  layers.reserve(m.size() + 1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    LayerSpec l = m.layer(i);
    l.frozen = true;
    layers.push_back(std::move(l));
    if (i == position) {
      LayerSpec cl;
      cl.params = CorrectionLayer::identity(kind, position, m.output_shape_of(i).channels);
      cl.frozen = false;
      layers.push_back(std::move(cl));
    }
  }
  ModelGraph out(m.input_shape(), std::move(layers), m.class_names());
  out.set_provenance(m.provenance());
  return out;
}

ModelGraph fold_correction(const ModelGraph& m) {
  const auto idx = m.correction_index();
  if (!idx) throw ArgumentError("fold_correction: model has no correction layer");
  const std::size_t g = *idx;
  if (g + 1 >= m.size()) {
    throw UnsupportedFoldError("fold_correction: correction layer is last; nothing to merge into");
  }
  const LayerSpec& target = m.layer(g + 1);
  if (!target.is_linear_merge_target()) {
    throw UnsupportedFoldError("fold_correction: layer after the correction layer is " +
                               std::string(to_string(target.kind())) +
                               ", only conv1d or fc can absorb it");
  }
  const CorrectionLayer& cl = *m.correction();
  const Tensor M = cl.effective_matrix();
  const std::size_t C = cl.channels;

  LayerSpec merged = target;
  if (auto* conv = std::get_if<ConvParams>(&merged.params)) {
    const auto& src = std::get<ConvParams>(target.params);
    const std::size_t K = conv->kernel_len;
    for (std::size_t o = 0; o < conv->out_channels; ++o) {
      for (std::size_t j = 0; j < C; ++j) {
        for (std::size_t k = 0; k < K; ++k) {
          double acc = 0.0;
          for (std::size_t i = 0; i < C; ++i) acc += src.weight(o, i, k) * M.at(i, j);
          conv->weights[(o * C + j) * K + k] = acc;
        }
      }
    }
  } else {
    auto& fc = std::get<FcParams>(merged.params);
    const auto& src = std::get<FcParams>(target.params);
    const std::size_t L = m.input_shape_of(g).length;
    for (std::size_t o = 0; o < fc.n_out; ++o) {
      const double* w = src.weights.raw() + o * src.n_in;
      for (std::size_t j = 0; j < C; ++j) {
        for (std::size_t t = 0; t < L; ++t) {
          double acc = 0.0;
          for (std::size_t i = 0; i < C; ++i) acc += w[i * L + t] * M.at(i, j);
          fc.weights[o * fc.n_in + j * L + t] = acc;
        }
      }
    }
  }

  std::vector<LayerSpec> layers;
  layers.reserve(m.size() - 1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i == g) continue;
    layers.push_back(i == g + 1 ? merged : m.layer(i));
  }
  ModelGraph out(m.input_shape(), std::move(layers), m.class_names());
  out.set_provenance(m.provenance());
  return out;
}

}  // namespace cldg
