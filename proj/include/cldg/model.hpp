// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cldg/correction.hpp"
#include "cldg/kernels.hpp"
#include "cldg/tensor.hpp"

namespace cldg {

enum class LayerKind { conv1d, fc, relu, maxpool, gap, correction };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view text);

struct ReluLayer {};
struct MaxPoolLayer {
  std::size_t window = 2;
};
struct GapLayer {};

using LayerParams =
    std::variant<ConvParams, FcParams, ReluLayer, MaxPoolLayer, GapLayer, CorrectionLayer>;

struct LayerSpec {
  LayerParams params;
  bool frozen = false;

  LayerKind kind() const { return static_cast<LayerKind>(params.index()); }
  bool has_parameters() const;
  bool is_linear_merge_target() const {
    return kind() == LayerKind::conv1d || kind() == LayerKind::fc;
  }
  std::size_t parameter_count() const;
  /// Parameter tensors in checkpoint order (weights, then bias).
  std::vector<Tensor*> parameter_tensors();
  std::vector<const Tensor*> parameter_tensors() const;
};

/// channels x length of an activation.
struct ActShape {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::size_t numel() const { return channels * length; }
  Shape shape() const { return {channels, length}; }
  friend bool operator==(const ActShape&, const ActShape&) = default;
};

/// Output shape of one layer for a given input shape; throws DimensionError
/// if the layer cannot consume it.
ActShape layer_output_shape(const LayerSpec& layer, ActShape in);

/// Sequential network. Shapes are checked on construction, so forward never
/// fails on an input of input_shape().
class ModelGraph {
 public:
  ModelGraph(ActShape input, std::vector<LayerSpec> layers, std::vector<std::string> classes);

  const ActShape& input_shape() const noexcept { return input_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t size() const noexcept { return layers_.size(); }
  const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }
  /// Mutable access for parameter updates. Changing a layer's structure
  /// through this reference is not supported.
  LayerSpec& layer(std::size_t i) { return layers_.at(i); }
  const std::vector<std::string>& class_names() const noexcept { return classes_; }

  /// Input shape of layer i; i == size() gives the logits shape.
  ActShape input_shape_of(std::size_t i) const { return shapes_.at(i); }
  ActShape output_shape_of(std::size_t i) const { return shapes_.at(i + 1); }

  /// Index of the correction layer in layers(), if one is present.
  std::optional<std::size_t> correction_index() const;
  const CorrectionLayer* correction() const;

  std::size_t parameter_count() const;
  std::size_t trainable_parameter_count() const;
  void freeze_all(bool frozen = true);

  /// Free-form provenance string (manifest hash) carried through checkpoints.
  const std::string& provenance() const noexcept { return provenance_; }
  void set_provenance(std::string p) { provenance_ = std::move(p); }

 private:
  ActShape input_;
  std::vector<LayerSpec> layers_;
  std::vector<std::string> classes_;
  std::vector<ActShape> shapes_;
  std::string provenance_;
};

/// Builds and He-uniform initializes a graph from an architecture
/// description: {"input":{"channels","length"}, "layers":[{"kind",...}],
/// "classes":[...]}. Dimension keys per kind: conv1d {out_channels,
/// kernel_len, stride?}, fc {out}, maxpool {window}; input sizes are
/// inferred and checked if given.
ModelGraph build_from_config(const nlohmann::json& cfg, std::uint64_t seed = 0);

/// Architecture description of an existing graph (no parameters).
nlohmann::json describe_architecture(const ModelGraph& m);

/// Applies one layer. `argmax` receives maxpool routing indices when given.
Tensor apply_layer(const LayerSpec& layer, const Tensor& x, MacCounter* macs = nullptr,
                   std::vector<std::size_t>* argmax = nullptr);

struct ForwardResult {
  Tensor logits;
  /// Post-layer outputs keyed by layer index.
  std::map<std::size_t, Tensor> captured;
};

ForwardResult forward(const ModelGraph& m, const Tensor& x,
                      const std::set<std::size_t>& capture = {}, MacCounter* macs = nullptr);

/// Runs layers [from, to) on x, which must be the input of layer `from`.
Tensor forward_range(const ModelGraph& m, const Tensor& x, std::size_t from, std::size_t to,
                     MacCounter* macs = nullptr);

}  // namespace cldg
