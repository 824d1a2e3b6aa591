// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include "cldg/costmodel.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "cldg/error.hpp"
#include "cldg/insertion.hpp"

namespace cldg {

namespace {

struct LayerMacs {
  std::uint64_t forward = 0;
  std::uint64_t backward_data = 0;
  std::uint64_t backward_weight = 0;
};

LayerMacs layer_macs(const LayerSpec& layer, ActShape in, ActShape out) {
  std::uint64_t n = 0;
  switch (layer.kind()) {
    case LayerKind::conv1d: {
      const auto& p = std::get<ConvParams>(layer.params);
      n = static_cast<std::uint64_t>(p.out_channels) * p.in_channels * p.kernel_len * out.length;
      break;
    }
    case LayerKind::fc: {
      const auto& p = std::get<FcParams>(layer.params);
      n = static_cast<std::uint64_t>(p.n_in) * p.n_out;
      break;
    }
    case LayerKind::correction: {
      const auto& p = std::get<CorrectionLayer>(layer.params);
      n = p.kind == CorrectionKind::channel_wise
              ? static_cast<std::uint64_t>(in.channels) * in.length
              : static_cast<std::uint64_t>(in.channels) * in.channels * in.length;
      break;
    }
    case LayerKind::relu:
    case LayerKind::maxpool:
    case LayerKind::gap:
      return {};
  }
  return {n, n, n};
}

struct PlannedGraph {
  ModelGraph graph;
  std::vector<bool> trainable;
  std::optional<std::size_t> correction;
};

PlannedGraph plan_graph(const ModelGraph& arch, const CostPlan& plan) {
  if (plan.full) {
    std::vector<bool> trainable(arch.size());
    for (std::size_t l = 0; l < arch.size(); ++l) trainable[l] = arch.layer(l).has_parameters();
    return {arch, std::move(trainable), std::nullopt};
  }
  if (arch.correction_index()) {
    throw ConfigError("cost model: a CL plan needs an architecture without a correction layer");
  }
  ModelGraph g = insert_correction(arch, plan.kind, plan.position);
  const std::size_t cl = *g.correction_index();
  std::vector<bool> trainable(g.size(), false);
  trainable[cl] = true;
  return {std::move(g), std::move(trainable), cl};
}

}  // namespace

TrainingMacs macs_training(const ModelGraph& arch, const CostPlan& plan) {
  const PlannedGraph pg = plan_graph(arch, plan);
  const ModelGraph& g = pg.graph;
  const auto lowest = std::find(pg.trainable.begin(), pg.trainable.end(), true);
  const std::size_t stop = static_cast<std::size_t>(lowest - pg.trainable.begin());

  TrainingMacs r;
  for (std::size_t l = 0; l < g.size(); ++l) {
    const LayerMacs m = layer_macs(g.layer(l), g.input_shape_of(l), g.output_shape_of(l));
    r.forward += m.forward;
    if (l > stop && l < g.size()) r.backward_data += m.backward_data;
    if (pg.trainable[l]) r.backward_weight += m.backward_weight;
  }
  return r;
}

TrainingMacs macs_training(const nlohmann::json& arch_cfg, const CostPlan& plan) {
  return macs_training(build_from_config(arch_cfg), plan);
}

MemoryEstimate memory_training(const ModelGraph& arch, const CostPlan& plan,
                               std::size_t element_bytes) {
  if (element_bytes == 0) throw ArgumentError("memory_training: element size must be positive");
  const PlannedGraph pg = plan_graph(arch, plan);
  const ModelGraph& g = pg.graph;
  const std::uint64_t eb = element_bytes;
  MemoryEstimate r;
  if (plan.full) {
    for (std::size_t l = 0; l < g.size(); ++l) {
      r.activations += g.input_shape_of(l).numel() * eb;
      if (pg.trainable[l]) r.weight_grads += g.layer(l).parameter_count() * eb;
    }
    return r;
  }
  const std::size_t cl = *pg.correction;
  const std::uint64_t cl_params = g.layer(cl).parameter_count();
  r.activations = g.input_shape_of(cl).numel() * eb;
  r.weight_grads = cl_params * eb;
  r.cl_params = cl_params * eb;
  std::uint64_t largest = 0;
  for (std::size_t l = cl + 1; l < g.size(); ++l) {
    largest = std::max<std::uint64_t>(largest, g.input_shape_of(l).numel());
  }
  r.transient = largest * eb;
  return r;
}

const CostRecord& CostReport::at_position(std::size_t position) const {
  for (const auto& rec : positions) {
    if (rec.position == position) return rec;
  }
  throw ArgumentError("cost report has no record for position " + std::to_string(position));
}

CostReport sweep(const ModelGraph& arch, CorrectionKind kind, std::size_t element_bytes,
                 std::string arch_name) {
  CostReport report;
  report.arch_name = std::move(arch_name);
  report.kind = kind;
  report.element_bytes = element_bytes;
  report.reference.macs = macs_training(arch, CostPlan::full_finetune());
  report.reference.memory = memory_training(arch, CostPlan::full_finetune(), element_bytes);
  report.reference.macs_norm = 1.0;
  report.reference.mem_norm = 1.0;
  const double ref_macs = static_cast<double>(report.reference.macs.total());
  const double ref_mem = static_cast<double>(report.reference.memory.total());
  for (std::size_t p : insertion_positions(arch)) {
    CostRecord rec;
    rec.position = p;
    rec.macs = macs_training(arch, CostPlan::cl_at(p, kind));
    rec.memory = memory_training(arch, CostPlan::cl_at(p, kind), element_bytes);
    rec.macs_norm = static_cast<double>(rec.macs.total()) / ref_macs;
    rec.mem_norm = static_cast<double>(rec.memory.total()) / ref_mem;
    report.positions.push_back(rec);
  }
  return report;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

void csv_row(std::ostringstream& out, const std::string& position, const CostRecord& r) {
  out << position << ',' << fmt_double(r.macs_norm) << ',' << fmt_double(r.mem_norm) << ','
      << r.macs.forward << ',' << r.macs.backward_data << ',' << r.macs.backward_weight << ','
      << r.macs.total() << ',' << r.memory.activations << ',' << r.memory.weight_grads << ','
      << r.memory.cl_params << ',' << r.memory.transient << ',' << r.memory.total() << '\n';
}

nlohmann::json record_json(const CostRecord& r) {
  nlohmann::json j{
      {"macs_forward", r.macs.forward},
      {"macs_backward_data", r.macs.backward_data},
      {"macs_backward_weight", r.macs.backward_weight},
      {"macs_total", r.macs.total()},
      {"mem_activations", r.memory.activations},
      {"mem_weight_grads", r.memory.weight_grads},
      {"mem_cl_params", r.memory.cl_params},
      {"mem_transient", r.memory.transient},
      {"mem_total", r.memory.total()},
      {"macs_norm", r.macs_norm},
      {"mem_norm", r.mem_norm},
  };
  j["position"] = r.position ? nlohmann::json(*r.position) : nlohmann::json("full");
  return j;
}

}  // namespace

std::string CostReport::to_csv() const {
  std::ostringstream out;
  out << "position,macs_norm,mem_norm,macs_forward,macs_backward_data,macs_backward_weight,"
         "macs_total,mem_activations,mem_weight_grads,mem_cl_params,mem_transient,mem_total\n";
  csv_row(out, "full", reference);
  for (const auto& r : positions) csv_row(out, std::to_string(*r.position), r);
  return out.str();
}

nlohmann::json CostReport::to_json() const {
  nlohmann::json pos = nlohmann::json::array();
  for (const auto& r : positions) pos.push_back(record_json(r));
  return {{"arch", arch_name},
          {"correction_kind", to_string(kind)},
          {"element_bytes", element_bytes},
          {"reference", record_json(reference)},
          {"positions", std::move(pos)}};
}

std::string CostReport::to_gnuplot() const {
  std::ostringstream out;
  out << "# arch=" << arch_name << " kind=" << to_string(kind)
      << "\n# position macs_norm mem_norm\n";
  for (const auto& r : positions) {
    out << *r.position << ' ' << fmt_double(r.macs_norm) << ' ' << fmt_double(r.mem_norm) << '\n';
  }
  return out.str();
}

}  // namespace cldg
