// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cldg/correction.hpp"
#include "cldg/model.hpp"

namespace cldg {

/// Either fine-tune every parametric layer, or train only a correction layer
/// inserted after base layer `position`.
struct CostPlan {
  bool full = true;
  std::size_t position = 0;
  CorrectionKind kind = CorrectionKind::inter_channel;

  static CostPlan full_finetune() { return {}; }
  static CostPlan cl_at(std::size_t position, CorrectionKind kind = CorrectionKind::inter_channel) {
    return {false, position, kind};
  }
};

/// MAC counts for one training sample (batch size 1).
struct TrainingMacs {
  std::uint64_t forward = 0;
  std::uint64_t backward_data = 0;
  std::uint64_t backward_weight = 0;
  std::uint64_t total() const { return forward + backward_data + backward_weight; }
  friend bool operator==(const TrainingMacs&, const TrainingMacs&) = default;
};

/// Persistent training buffers in bytes.
struct MemoryEstimate {
  std::uint64_t activations = 0;
  std::uint64_t weight_grads = 0;
  std::uint64_t cl_params = 0;
  /// One scratch buffer for the dL/dx chain.
  std::uint64_t transient = 0;
  std::uint64_t total() const { return activations + weight_grads + cl_params + transient; }
  friend bool operator==(const MemoryEstimate&, const MemoryEstimate&) = default;
};

/// MACs of one training step under `plan`:
///  - forward over every layer (including the correction layer),
///  - backward-data for layers above the lowest trainable layer only,
///  - backward-weight for trainable layers only.
/// conv: out*in*k*L_out; fc: in*out; inter-channel CL: C*C*L; channel-wise
/// CL: C*L; relu, maxpool and gap count 0.
TrainingMacs macs_training(const ModelGraph& arch, const CostPlan& plan);

/// Full plan: every layer's input activation plus every weight-gradient
/// buffer. CL plan: the CL input activation, its gradient buffer, its
/// parameters, and one transient buffer as large as the largest activation
/// above the CL.
MemoryEstimate memory_training(const ModelGraph& arch, const CostPlan& plan,
                               std::size_t element_bytes = 8);

/// Builds the architecture from a config first; unknown layer kinds raise
/// ConfigError.
TrainingMacs macs_training(const nlohmann::json& arch_cfg, const CostPlan& plan);

struct CostRecord {
  /// Empty for the full fine-tune reference.
  std::optional<std::size_t> position;
  TrainingMacs macs;
  MemoryEstimate memory;
  double macs_norm = 1.0;
  double mem_norm = 1.0;
};

struct CostReport {
  std::string arch_name;
  CorrectionKind kind = CorrectionKind::inter_channel;
  std::size_t element_bytes = 8;
  CostRecord reference;
  std::vector<CostRecord> positions;

  const CostRecord& at_position(std::size_t position) const;
  /// Header: position,macs_norm,mem_norm,... ; the reference row comes first
  /// with position "full".
  std::string to_csv() const;
  nlohmann::json to_json() const;
  /// Whitespace separated columns for gnuplot: position macs_norm mem_norm.
  std::string to_gnuplot() const;
};

/// One record per insertion position (after every layer but the last) plus
/// the reference.
CostReport sweep(const ModelGraph& arch, CorrectionKind kind = CorrectionKind::inter_channel,
                 std::size_t element_bytes = 8, std::string arch_name = {});

}  // namespace cldg
