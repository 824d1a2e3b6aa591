// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include "cldg/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cldg/error.hpp"
#include "cldg/rng.hpp"

namespace cldg {

std::string_view to_string(TrainMode mode) {
  return mode == TrainMode::cl_only ? "cl_only" : "full_finetune";
}

TrainMode parse_train_mode(std::string_view text) {
  if (text == "cl_only") return TrainMode::cl_only;
  if (text == "full_finetune") return TrainMode::full_finetune;
  throw ConfigError("unknown training mode '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (samples_per_class_cap && *samples_per_class_cap == 0) {
    throw ConfigError("samples_per_class_cap must be at least 1");
  }
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j{{"learning_rate", learning_rate},
                   {"epochs", epochs},
                   {"batch_size", batch_size},
                   {"seed", seed},
                   {"mode", to_string(mode)},
                   {"reuse_frozen_prefix", reuse_frozen_prefix}};
  j["samples_per_class_cap"] =
      samples_per_class_cap ? nlohmann::json(*samples_per_class_cap) : nlohmann::json(nullptr);
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig defaults) {
  TrainConfig c = defaults;
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  if (j.contains("mode")) c.mode = parse_train_mode(j.at("mode").get<std::string>());
  if (j.contains("samples_per_class_cap") && !j.at("samples_per_class_cap").is_null()) {
    c.samples_per_class_cap = j.at("samples_per_class_cap").get<std::size_t>();
  }
  c.reuse_frozen_prefix = j.value("reuse_frozen_prefix", c.reuse_frozen_prefix);
  c.validate();
  return c;
}

nlohmann::json TrainStats::to_json() const {
  return {{"loss_curve", loss_curve},
          {"macs",
           {{"forward", macs.forward},
            {"backward_data", macs.backward_data},
            {"backward_weight", macs.backward_weight}}},
          {"peak_stored_activations", peak_stored_activations},
          {"updated_parameters", updated_parameters},
          {"steps", steps},
          {"training_samples", training_samples},
          {"cap_exceeded_available", cap_exceeded_available}};
}

std::uint64_t ForwardTrace::stored_activation_count() const {
  std::uint64_t n = 0;
  for (std::size_t l = first_kept; l < inputs.size(); ++l) n += inputs[l].numel();
  return n;
}

ForwardTrace forward_for_training(const ModelGraph& m, const Tensor& x, std::size_t keep_from,
                                  MacCounter* macs, std::size_t start_from) {
  if (start_from > keep_from) throw ArgumentError("forward_for_training: start_from > keep_from");
  ForwardTrace trace;
  trace.first_kept = keep_from;
  trace.inputs.resize(m.size());
  trace.argmax.resize(m.size());
  Tensor cur = x;
  if (cur.shape() != m.input_shape_of(start_from).shape()) {
    throw DimensionError("forward_for_training: input " + shape_to_string(cur.shape()) +
                         " does not match layer " + std::to_string(start_from) + " input " +
                         shape_to_string(m.input_shape_of(start_from).shape()));
  }
  for (std::size_t l = start_from; l < m.size(); ++l) {
    std::vector<std::size_t>* routing = l >= keep_from ? &trace.argmax[l] : nullptr;
    Tensor next = apply_layer(m.layer(l), cur, macs, routing);
    if (l >= keep_from) trace.inputs[l] = std::move(cur);
    cur = std::move(next);
  }
  trace.logits = std::move(cur);
  return trace;
}

std::optional<std::size_t> lowest_trainable_layer(const ModelGraph& m) {
  for (std::size_t l = 0; l < m.size(); ++l) {
    if (m.layer(l).has_parameters() && !m.layer(l).frozen) return l;
  }
  return std::nullopt;
}

BackwardResult backward_pass(const ModelGraph& m, const ForwardTrace& trace,
                             const Tensor& dlogits, std::size_t stop, MacCounter* macs) {
  if (stop >= m.size()) throw ArgumentError("backward_pass: stop layer out of range");
  if (stop < trace.first_kept) {
    throw ArgumentError("backward_pass: activations below layer " +
                        std::to_string(trace.first_kept) + " were not stored");
  }
  BackwardResult r;
  r.param_grads.resize(m.size());
  Tensor dy = dlogits.reshaped(m.output_shape_of(m.size() - 1).shape());
  for (std::size_t l = m.size(); l-- > stop;) {
    const LayerSpec& layer = m.layer(l);
    const Tensor& x = trace.inputs[l];
    const GradRequest want{l > stop, layer.has_parameters() && !layer.frozen};
    Tensor dx;
    switch (layer.kind()) {
      case LayerKind::conv1d: {
        auto g = conv1d_backward(x, std::get<ConvParams>(layer.params), dy, want, macs);
        if (want.weight) r.param_grads[l] = {std::move(g.dw), std::move(g.db)};
        dx = std::move(g.dx);
        break;
      }
      case LayerKind::fc: {
        auto g = fc_backward(x, std::get<FcParams>(layer.params), dy, want, macs);
        if (want.weight) r.param_grads[l] = {std::move(g.dw), std::move(g.db)};
        dx = std::move(g.dx);
        break;
      }
      case LayerKind::correction: {
        auto g = correction_backward(x, std::get<CorrectionLayer>(layer.params), dy, want, macs);
        if (want.weight) r.param_grads[l] = {std::move(g.dparams)};
        dx = std::move(g.dx);
        break;
      }
      case LayerKind::relu:
        if (want.data) dx = relu_backward(x, dy);
        break;
      case LayerKind::maxpool:
        if (want.data) dx = maxpool1d_backward(x.shape(), trace.argmax[l], dy);
        break;
      case LayerKind::gap:
        if (want.data) dx = global_avg_pool_backward(x.shape(), dy);
        break;
    }
    dy = std::move(dx);
  }
  return r;
}

namespace {
std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}
}  // namespace

SubsampleResult subsample_training_set(const SegmentDataset& ds, std::optional<std::size_t> cap,
                                       std::uint64_t seed) {
  if (!cap) return {ds, false};
  if (*cap == 0) throw ArgumentError("subsample_training_set: cap must be at least 1");
  SubsampleResult r;
  std::vector<std::size_t> keep;
  for (const auto& pid : ds.patients()) {
    for (Label label : {Label::N, Label::AF}) {
      std::vector<std::size_t> members;
      for (std::size_t i : ds.indices_of_patient(pid)) {
        if (ds[i].label == label) members.push_back(i);
      }
      if (members.empty()) continue;
      if (members.size() < *cap) r.cap_exceeded_available = true;
      // Stream per (patient, class) so one group's draw never shifts another's.
      Rng rng = Rng::derive(seed, fnv1a(pid) * 2 + static_cast<std::uint64_t>(label));
      rng.shuffle(std::span<std::size_t>(members));
      members.resize(std::min(members.size(), *cap));
      keep.insert(keep.end(), members.begin(), members.end());
    }
  }
  std::sort(keep.begin(), keep.end());
  r.dataset = ds.subset(keep);
  return r;
}

namespace {

void check_trainable(const ModelGraph& m, const SegmentDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.empty()) throw ConfigError("train: dataset is empty");
  if (m.input_shape().channels != 1 || m.input_shape().length != ds.length()) {
    throw DimensionError("train: model input " + shape_to_string(m.input_shape().shape()) +
                         " does not match segments of length " + std::to_string(ds.length()));
  }
  if (m.class_names().size() != kNumClasses) {
    throw ConfigError("train: model must have exactly 2 classes (N, AF)");
  }
  if (cfg.mode == TrainMode::cl_only) {
    const auto cl = m.correction_index();
    if (!cl) throw ConfigError("train: cl_only mode needs a correction layer");
    for (std::size_t l = 0; l < m.size(); ++l) {
      if (l != *cl && !m.layer(l).frozen) {
        throw ConfigError("train: cl_only mode needs every non-correction layer frozen; layer " +
                          std::to_string(l) + " (" + std::string(to_string(m.layer(l).kind())) +
                          ") is trainable");
      }
    }
    if (m.layer(*cl).frozen) throw ConfigError("train: correction layer is frozen");
  }
}

}  // namespace

TrainResult train(ModelGraph m, const SegmentDataset& full_ds, const TrainConfig& cfg) {
  check_trainable(m, full_ds, cfg);
  const auto stop_opt = lowest_trainable_layer(m);
  if (!stop_opt) throw ConfigError("train: model has no trainable layer");
  const std::size_t stop = *stop_opt;

  TrainStats stats;
  auto sub = subsample_training_set(full_ds, cfg.samples_per_class_cap, cfg.seed);
  const SegmentDataset& ds = sub.dataset;
  if (ds.empty()) throw ConfigError("train: dataset is empty after subsampling");
  stats.cap_exceeded_available = sub.cap_exceeded_available;
  stats.training_samples = ds.size();

  const bool use_prefix = cfg.mode == TrainMode::cl_only && cfg.reuse_frozen_prefix && stop > 0;
  std::vector<Tensor> prefix;
  if (use_prefix) {
    prefix.reserve(ds.size());
    for (const auto& s : ds.segments()) {
      prefix.push_back(forward_range(m, s.signal, 0, stop, &stats.macs));
    }
  }

  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng::derive(cfg.seed, 0x5348);
  const double lr = cfg.learning_rate;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      std::vector<std::vector<Tensor>> sum(m.size());
      for (std::size_t b = begin; b < end; ++b) {
        const Segment& s = ds[order[b]];
        const ForwardTrace trace =
            use_prefix ? forward_for_training(m, prefix[order[b]], stop, &stats.macs, stop)
                       : forward_for_training(m, s.signal, stop, &stats.macs);
        stats.peak_stored_activations =
            std::max(stats.peak_stored_activations, trace.stored_activation_count());
        const LossResult loss =
            softmax_cross_entropy(trace.logits, static_cast<std::size_t>(s.label));
        if (!std::isfinite(loss.loss)) {
          throw NumericError("train: loss became non-finite in epoch " + std::to_string(epoch) +
                             "; the learning rate is probably too large");
        }
        epoch_loss += loss.loss;
        BackwardResult grads = backward_pass(m, trace, loss.dlogits, stop, &stats.macs);
        for (std::size_t l = stop; l < m.size(); ++l) {
          auto& g = grads.param_grads[l];
          if (g.empty()) continue;
          if (sum[l].empty()) {
            sum[l] = std::move(g);
          } else {
            for (std::size_t t = 0; t < g.size(); ++t) {
              for (std::size_t i = 0; i < g[t].numel(); ++i) sum[l][t][i] += g[t][i];
            }
          }
        }
      }
      const double scale = lr / static_cast<double>(end - begin);
      for (std::size_t l = stop; l < m.size(); ++l) {
        if (sum[l].empty()) continue;
        auto params = m.layer(l).parameter_tensors();
        for (std::size_t t = 0; t < params.size(); ++t) {
          Tensor& p = *params[t];
          for (std::size_t i = 0; i < p.numel(); ++i) p[i] -= scale * sum[l][t][i];
        }
      }
      ++stats.steps;
    }
    stats.loss_curve.push_back(epoch_loss / static_cast<double>(ds.size()));
  }
  stats.updated_parameters = m.trainable_parameter_count();
  return {std::move(m), std::move(stats)};
}

}  // namespace cldg
