// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include "cldg/model.hpp"

#include <cmath>

#include "cldg/error.hpp"
#include "cldg/rng.hpp"

namespace cldg {

namespace {
constexpr std::string_view kKindNames[] = {"conv1d", "fc", "relu", "maxpool", "gap",
                                           "correction"};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string layer_label(std::size_t index, const LayerSpec& layer) {
  return "layer " + std::to_string(index) + " (" + std::string(to_string(layer.kind())) + ")";
}

}  // namespace

std::string_view to_string(LayerKind kind) { return kKindNames[static_cast<int>(kind)]; }

LayerKind parse_layer_kind(std::string_view text) {
  for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
    if (kKindNames[i] == text) return static_cast<LayerKind>(i);
  }
  throw ConfigError("unknown layer kind '" + std::string(text) + "'");
}

bool LayerSpec::has_parameters() const {
  const auto k = kind();
  return k == LayerKind::conv1d || k == LayerKind::fc || k == LayerKind::correction;
}

std::size_t LayerSpec::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor* t : parameter_tensors()) n += t->numel();
  return n;
}

std::vector<Tensor*> LayerSpec::parameter_tensors() {
  return std::visit(overloaded{
                        [](ConvParams& p) -> std::vector<Tensor*> { return {&p.weights, &p.bias}; },
                        [](FcParams& p) -> std::vector<Tensor*> { return {&p.weights, &p.bias}; },
                        [](CorrectionLayer& p) -> std::vector<Tensor*> { return {&p.params}; },
                        [](auto&) -> std::vector<Tensor*> { return {}; },
                    },
                    params);
}

std::vector<const Tensor*> LayerSpec::parameter_tensors() const {
  auto mut = const_cast<LayerSpec*>(this)->parameter_tensors();
  return {mut.begin(), mut.end()};
}

ActShape layer_output_shape(const LayerSpec& layer, ActShape in) {
  return std::visit(
      overloaded{
          [&](const ConvParams& p) {
            p.validate();
            if (in.channels != p.in_channels) {
              throw DimensionError("expects " + std::to_string(p.in_channels) +
                                   " input channels, got " + std::to_string(in.channels));
            }
            return ActShape{p.out_channels, p.output_length(in.length)};
          },
          [&](const FcParams& p) {
            p.validate();
            if (in.numel() != p.n_in) {
              throw DimensionError("expects n_in=" + std::to_string(p.n_in) + ", input " +
                                   std::to_string(in.channels) + "x" +
                                   std::to_string(in.length) + " has " +
                                   std::to_string(in.numel()) + " elements");
            }
            return ActShape{p.n_out, 1};
          },
          [&](const ReluLayer&) { return in; },
          [&](const MaxPoolLayer& p) {
            if (p.window == 0 || p.window > in.length) {
              throw DimensionError("window " + std::to_string(p.window) +
                                   " does not fit input length " + std::to_string(in.length));
            }
            return ActShape{in.channels, in.length / p.window};
          },
          [&](const GapLayer&) { return ActShape{in.channels, 1}; },
          [&](const CorrectionLayer& p) {
            p.validate();
            if (in.channels != p.channels) {
              throw DimensionError("correction layer has " + std::to_string(p.channels) +
                                   " channels, input has " + std::to_string(in.channels));
            }
            return in;
          },
      },
      layer.params);
}

ModelGraph::ModelGraph(ActShape input, std::vector<LayerSpec> layers,
                       std::vector<std::string> classes)
    : input_(input), layers_(std::move(layers)), classes_(std::move(classes)) {
  if (input_.channels == 0 || input_.length == 0) {
    throw ConfigError("input shape must be positive");
  }
  if (layers_.empty()) throw ConfigError("architecture has an empty layer list");
  if (classes_.empty()) throw ConfigError("architecture declares no classes");

  shapes_.reserve(layers_.size() + 1);
  shapes_.push_back(input_);
  bool seen_correction = false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& layer = layers_[i];
    if (layer.kind() == LayerKind::correction) {
      if (seen_correction) throw ConfigError(layer_label(i, layer) + ": second correction layer");
      seen_correction = true;
      const auto& cl = std::get<CorrectionLayer>(layer.params);
      if (i == 0 || cl.position + 1 != i) {
        throw ConfigError(layer_label(i, layer) + ": recorded position " +
                          std::to_string(cl.position) + " does not match its place in the graph");
      }
    }
    try {
      shapes_.push_back(layer_output_shape(layer, shapes_.back()));
    } catch (const DimensionError& e) {
      throw ConfigError(layer_label(i, layer) + ": " + e.what());
    }
  }
  if (shapes_.back().numel() != classes_.size()) {
    throw ConfigError("final layer produces " + std::to_string(shapes_.back().numel()) +
                      " outputs for " + std::to_string(classes_.size()) + " classes");
  }
}

std::optional<std::size_t> ModelGraph::correction_index() const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].kind() == LayerKind::correction) return i;
  }
  return std::nullopt;
}

const CorrectionLayer* ModelGraph::correction() const {
  const auto idx = correction_index();
  return idx ? &std::get<CorrectionLayer>(layers_[*idx].params) : nullptr;
}

std::size_t ModelGraph::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.parameter_count();
  return n;
}

std::size_t ModelGraph::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    if (!l.frozen) n += l.parameter_count();
  }
  return n;
}

void ModelGraph::freeze_all(bool frozen) {
  for (auto& l : layers_) l.frozen = frozen;
}

namespace {

std::size_t get_dim(const nlohmann::json& j, const char* key, std::size_t index,
                    std::string_view kind) {
  if (!j.contains(key)) {
    throw ConfigError("layer " + std::to_string(index) + " (" + std::string(kind) +
                      "): missing '" + key + "'");
  }
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() <= 0) {
    throw ConfigError("layer " + std::to_string(index) + " (" + std::string(kind) + "): '" +
                      key + "' must be a positive integer");
  }
  return v.get<std::size_t>();
}

void check_declared(const nlohmann::json& j, const char* key, std::size_t actual,
                    std::size_t index, std::string_view kind) {
  if (j.contains(key) && j.at(key).get<std::size_t>() != actual) {
    throw ConfigError("layer " + std::to_string(index) + " (" + std::string(kind) + "): declared " +
                      key + "=" + std::to_string(j.at(key).get<std::size_t>()) +
                      " but incoming activation gives " + std::to_string(actual));
  }
}

void he_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng.uniform(-bound, bound);
}

}  // namespace

ModelGraph build_from_config(const nlohmann::json& cfg, std::uint64_t seed) {
  if (!cfg.is_object() || !cfg.contains("input") || !cfg.contains("layers")) {
    throw ConfigError("architecture config needs 'input' and 'layers'");
  }
  const auto& in = cfg.at("input");
  ActShape input{in.value("channels", std::size_t{0}), in.value("length", std::size_t{0})};
  if (input.channels == 0 || input.length == 0) {
    throw ConfigError("input.channels and input.length must be positive integers");
  }
  std::vector<std::string> classes = cfg.value("classes", std::vector<std::string>{"N", "AF"});
  const auto& jl = cfg.at("layers");
  if (!jl.is_array() || jl.empty()) throw ConfigError("architecture has an empty layer list");

  Rng rng = Rng::derive(seed, 0x1417);
  std::vector<LayerSpec> layers;
  ActShape cur = input;
  for (std::size_t i = 0; i < jl.size(); ++i) {
    const auto& j = jl[i];
    const std::string kind_name = j.value("kind", std::string{});
    LayerKind kind;
    try {
      kind = parse_layer_kind(kind_name);
    } catch (const ConfigError&) {
      throw ConfigError("layer " + std::to_string(i) + ": unknown layer kind '" + kind_name + "'");
    }
    LayerSpec spec;
    spec.frozen = j.value("frozen", false);
    switch (kind) {
      case LayerKind::conv1d: {
        check_declared(j, "in_channels", cur.channels, i, kind_name);
        auto p = ConvParams::zeros(get_dim(j, "out_channels", i, kind_name), cur.channels,
                                   get_dim(j, "kernel_len", i, kind_name),
                                   j.contains("stride") ? get_dim(j, "stride", i, kind_name) : 1);
        he_uniform(p.weights, p.in_channels * p.kernel_len, rng);
        spec.params = std::move(p);
        break;
      }
      case LayerKind::fc: {
        check_declared(j, "in", cur.numel(), i, kind_name);
        auto p = FcParams::zeros(cur.numel(), get_dim(j, "out", i, kind_name));
        he_uniform(p.weights, p.n_in, rng);
        spec.params = std::move(p);
        break;
      }
      case LayerKind::relu:
        spec.params = ReluLayer{};
        break;
      case LayerKind::maxpool:
        spec.params = MaxPoolLayer{get_dim(j, "window", i, kind_name)};
        break;
      case LayerKind::gap:
        spec.params = GapLayer{};
        break;
      case LayerKind::correction: {
        const auto ck = parse_correction_kind(j.value("correction_kind", std::string{"ic"}));
        if (i == 0) throw ConfigError("layer 0 (correction): a correction layer cannot come first");
        spec.params = CorrectionLayer::identity(ck, i - 1, cur.channels);
        break;
      }
    }
    try {
      cur = layer_output_shape(spec, cur);
    } catch (const DimensionError& e) {
      throw ConfigError("layer " + std::to_string(i) + " (" + kind_name + "): " + e.what());
    }
    layers.push_back(std::move(spec));
  }
  return ModelGraph(input, std::move(layers), std::move(classes));
}

nlohmann::json describe_architecture(const ModelGraph& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : m.layers()) {
    nlohmann::json j{{"kind", to_string(layer.kind())}, {"frozen", layer.frozen}};
    std::visit(overloaded{
                   [&](const ConvParams& p) {
                     j["in_channels"] = p.in_channels;
                     j["out_channels"] = p.out_channels;
                     j["kernel_len"] = p.kernel_len;
                     j["stride"] = p.stride;
                   },
                   [&](const FcParams& p) {
                     j["in"] = p.n_in;
                     j["out"] = p.n_out;
                   },
                   [&](const MaxPoolLayer& p) { j["window"] = p.window; },
                   [&](const CorrectionLayer& p) {
                     j["correction_kind"] = to_string(p.kind);
                     j["channels"] = p.channels;
                     j["position"] = p.position;
                   },
                   [](const auto&) {},
               },
               layer.params);
    layers.push_back(std::move(j));
  }
  return {{"input", {{"channels", m.input_shape().channels}, {"length", m.input_shape().length}}},
          {"layers", std::move(layers)},
          {"classes", m.class_names()}};
}

Tensor apply_layer(const LayerSpec& layer, const Tensor& x, MacCounter* macs,
                   std::vector<std::size_t>* argmax) {
  return std::visit(overloaded{
                        [&](const ConvParams& p) { return conv1d_forward(x, p, macs); },
                        [&](const FcParams& p) { return fc_forward(x, p, macs); },
                        [&](const ReluLayer&) { return relu_forward(x); },
                        [&](const MaxPoolLayer& p) {
                          auto r = maxpool1d_forward(x, p.window);
                          if (argmax) *argmax = std::move(r.argmax);
                          return std::move(r.out);
                        },
                        [&](const GapLayer&) { return global_avg_pool_forward(x); },
                        [&](const CorrectionLayer& p) { return apply_correction(x, p, macs); },
                    },
                    layer.params);
}

Tensor forward_range(const ModelGraph& m, const Tensor& x, std::size_t from, std::size_t to,
                     MacCounter* macs) {
  if (from > to || to > m.size()) throw ArgumentError("forward_range: bad layer range");
  if (x.shape() != m.input_shape_of(from).shape()) {
    throw DimensionError("forward_range: input " + shape_to_string(x.shape()) +
                         " does not match layer " + std::to_string(from) + " input " +
                         shape_to_string(m.input_shape_of(from).shape()));
  }
  Tensor cur = x;
  for (std::size_t i = from; i < to; ++i) cur = apply_layer(m.layer(i), cur, macs);
  return cur;
}

ForwardResult forward(const ModelGraph& m, const Tensor& x, const std::set<std::size_t>& capture,
                      MacCounter* macs) {
  if (x.shape() != m.input_shape().shape()) {
    throw DimensionError("forward: input " + shape_to_string(x.shape()) +
                         " does not match model input " +
                         shape_to_string(m.input_shape().shape()));
  }
  for (std::size_t idx : capture) {
    if (idx >= m.size()) {
      throw ArgumentError("forward: capture index " + std::to_string(idx) + " out of range");
    }
  }
  ForwardResult r;
  Tensor cur = x;
  for (std::size_t i = 0; i < m.size(); ++i) {
    cur = apply_layer(m.layer(i), cur, macs);
    if (capture.contains(i)) r.captured.emplace(i, cur);
  }
  r.logits = std::move(cur);
  return r;
}

}  // namespace cldg
