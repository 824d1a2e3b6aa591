// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cldg/data.hpp"
#include "cldg/kernels.hpp"
#include "cldg/model.hpp"

namespace cldg {

enum class TrainMode { full_finetune, cl_only };

std::string_view to_string(TrainMode mode);
TrainMode parse_train_mode(std::string_view text);

/// Plain SGD (no momentum) on softmax cross-entropy, gradients averaged
/// over each mini-batch.
struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::full_finetune;
  std::optional<std::size_t> samples_per_class_cap;
  /// cl_only: run the frozen layers below the correction layer once per
  /// sample and reuse their output in every epoch. Results are identical;
  /// only the forward MAC tally shrinks.
  bool reuse_frozen_prefix = false;

  static TrainConfig cl_defaults() {
    TrainConfig c;
    c.learning_rate = 1e-2;
    c.mode = TrainMode::cl_only;
    return c;
  }
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig defaults);
};

struct TrainStats {
  /// Mean loss of every epoch.
  std::vector<double> loss_curve;
  MacCounter macs;
  std::uint64_t peak_stored_activations = 0;
  std::uint64_t updated_parameters = 0;
  std::uint64_t steps = 0;
  std::uint64_t training_samples = 0;
  /// A per-class cap asked for more segments than some patient had.
  bool cap_exceeded_available = false;

  nlohmann::json to_json() const;
};

struct TrainResult {
  ModelGraph model;
  TrainStats stats;
};

/// Everything the chain rule needs from one forward pass. inputs[l] is the
/// input of layer l; layers below `first_kept` store nothing.
struct ForwardTrace {
  std::size_t first_kept = 0;
  std::vector<Tensor> inputs;
  std::vector<std::vector<std::size_t>> argmax;
  Tensor logits;

  std::uint64_t stored_activation_count() const;
};

/// Forward pass keeping the activations of layers >= keep_from. When
/// `start_input` is given it is taken as the input of layer `start_from` and
/// the layers below are skipped.
ForwardTrace forward_for_training(const ModelGraph& m, const Tensor& x, std::size_t keep_from,
                                  MacCounter* macs = nullptr, std::size_t start_from = 0);

/// Lowest layer that has parameters and is not frozen.
std::optional<std::size_t> lowest_trainable_layer(const ModelGraph& m);

struct BackwardResult {
  /// Gradients per layer, matching LayerSpec::parameter_tensors(); empty
  /// for layers that were not differentiated.
  std::vector<std::vector<Tensor>> param_grads;
};

/// Reverse pass from dL/dlogits down to layer `stop`. Weight gradients are
/// produced for trainable layers in [stop, n); data gradients only for
/// layers above `stop`, so the recursion ends at the lowest trainable layer.
/// Each transient dL/dx buffer is dropped once the next one exists.
BackwardResult backward_pass(const ModelGraph& m, const ForwardTrace& trace,
                             const Tensor& dlogits, std::size_t stop, MacCounter* macs = nullptr);

struct SubsampleResult {
  SegmentDataset dataset;
  bool cap_exceeded_available = false;
};

/// Keeps at most `cap` segments per (patient, class), drawn uniformly
/// without replacement; original order is preserved. No cap returns the
/// input unchanged.
SubsampleResult subsample_training_set(const SegmentDataset& ds, std::optional<std::size_t> cap,
                                       std::uint64_t seed);

TrainResult train(ModelGraph m, const SegmentDataset& ds, const TrainConfig& cfg);

}  // namespace cldg
