// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include <gtest/gtest.h>

#include <fstream>

#include "cldg/architectures.hpp"
#include "cldg/costmodel.hpp"
#include "cldg/error.hpp"
#include "cldg/insertion.hpp"
#include "oracles.hpp"

namespace cldg {
namespace {

nlohmann::json fc_chain(std::size_t in, std::vector<std::size_t> outs, bool relu = false) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t i = 0; i < outs.size(); ++i) {
    if (relu && i > 0) layers.push_back({{"kind", "relu"}});
    layers.push_back({{"kind", "fc"}, {"out", outs[i]}});
  }
  return {{"input", {{"channels", 1}, {"length", in}}}, {"layers", layers}, {"classes", {"N", "AF"}}};
}

void expect_equal(const TrainingMacs& analytic, const MacCounter& counted, const std::string& what) {
  EXPECT_EQ(analytic.forward, counted.forward) << what;
  EXPECT_EQ(analytic.backward_data, counted.backward_data) << what;
  EXPECT_EQ(analytic.backward_weight, counted.backward_weight) << what;
}

TEST(MacsTraining, SingleFcFull) {
  nlohmann::json cfg = fc_chain(3, {2});
  const auto m = macs_training(cfg, CostPlan::full_finetune());
  EXPECT_EQ(m.forward, 6u);
  EXPECT_EQ(m.backward_data, 0u);
  EXPECT_EQ(m.backward_weight, 6u);
}

TEST(MacsTraining, UnknownLayerKindIsConfigError) {
  nlohmann::json cfg = fc_chain(3, {2});
  cfg["layers"][0]["kind"] = "attention";
  EXPECT_THROW(macs_training(cfg, CostPlan::full_finetune()), ConfigError);
}

TEST(MacsTraining, ThreeLayerToyEqualsInstrumentedCounter) {
  const ModelGraph m = build_from_config(fc_chain(5, {4, 3, 2}, true), 1);
  expect_equal(macs_training(m, CostPlan::full_finetune()),
               oracle::instrumented_step_macs(m, TrainMode::full_finetune), "full");
  for (std::size_t p : insertion_positions(m)) {
    for (auto kind : {CorrectionKind::channel_wise, CorrectionKind::inter_channel}) {
      expect_equal(macs_training(m, CostPlan::cl_at(p, kind)),
                   oracle::instrumented_step_macs(insert_correction(m, kind, p), TrainMode::cl_only),
                   "position " + std::to_string(p));
    }
  }
}

TEST(MacsTraining, RandomArchitecturesEqualInstrumentedCounter) {
  Rng rng(40);
  for (int n = 0; n < 15; ++n) {
    const ModelGraph m = build_from_config(oracle::random_small_arch(rng), rng.next_u64());
    expect_equal(macs_training(m, CostPlan::full_finetune()),
                 oracle::instrumented_step_macs(m, TrainMode::full_finetune), "full");
    for (std::size_t p : insertion_positions(m)) {
      const auto kind = rng.bernoulli(0.5) ? CorrectionKind::channel_wise : CorrectionKind::inter_channel;
      expect_equal(macs_training(m, CostPlan::cl_at(p, kind)),
                   oracle::instrumented_step_macs(insert_correction(m, kind, p), TrainMode::cl_only),
                   "position " + std::to_string(p));
    }
  }
}

TEST(MacsTraining, ParmarHandValues) {
  const ModelGraph m = build_from_config(shipped_architecture("parmar_standin"));
  // fc 128->96, fc 96->128, fc 128->2.
  const auto full = macs_training(m, CostPlan::full_finetune());
  EXPECT_EQ(full.forward, 12288u + 12288u + 256u);
  EXPECT_EQ(full.backward_data, 12288u + 256u);
  EXPECT_EQ(full.backward_weight, full.forward);
  EXPECT_EQ(full.total(), 62208u);
  const auto cl = macs_training(m, CostPlan::cl_at(0));
  EXPECT_EQ(cl.forward, full.forward + 96u * 96u);
  EXPECT_EQ(cl.backward_data, 12288u + 256u);
  EXPECT_EQ(cl.backward_weight, 96u * 96u);
}

TEST(MacsTraining, BackwardDataShrinksTowardsOutput) {
  for (const auto& name : shipped_architecture_names()) {
    const ModelGraph m = build_from_config(shipped_architecture(name));
    const auto ps = insertion_positions(m);
    for (auto kind : {CorrectionKind::channel_wise, CorrectionKind::inter_channel}) {
      std::uint64_t prev = UINT64_MAX;
      for (std::size_t p : ps) {
        const auto bd = macs_training(m, CostPlan::cl_at(p, kind)).backward_data;
        EXPECT_LE(bd, prev) << name << " position " << p;
        prev = bd;
      }
    }
    if (name == "loh2022_standin") {
      EXPECT_LT(macs_training(m, CostPlan::cl_at(ps.back())).backward_data,
                macs_training(m, CostPlan::cl_at(ps.front())).backward_data);
    }
  }
}

TEST(MemoryTraining, TwoLayerHandEnumeration) {
  const ModelGraph m = build_from_config(fc_chain(3, {4, 2}, true), 1);
  // Layers: fc 3->4, relu, fc 4->2. Inputs 3, 4, 4; params 16 + 10.
  const auto full = memory_training(m, CostPlan::full_finetune(), 4);
  EXPECT_EQ(full.activations, (3u + 4u + 4u) * 4u);
  EXPECT_EQ(full.weight_grads, (16u + 10u) * 4u);
  EXPECT_EQ(full.cl_params, 0u);
  EXPECT_EQ(full.transient, 0u);
  // IC after the relu: input 4 elements, 16 params, largest input above is 4.
  const auto cl = memory_training(m, CostPlan::cl_at(1), 4);
  EXPECT_EQ(cl.activations, 4u * 4u);
  EXPECT_EQ(cl.weight_grads, 16u * 4u);
  EXPECT_EQ(cl.cl_params, 16u * 4u);
  EXPECT_EQ(cl.transient, 4u * 4u);
  EXPECT_THROW(memory_training(m, CostPlan::full_finetune(), 0), ArgumentError);
  const ModelGraph with_cl = insert_correction(m, CorrectionKind::channel_wise, 0);
  EXPECT_THROW(memory_training(with_cl, CostPlan::cl_at(1)), ConfigError);
}

TEST(Sweep, ReferenceIsOneAndClPlansNeverCostMoreMacs) {
  for (const auto& name : shipped_architecture_names()) {
    const ModelGraph m = build_from_config(shipped_architecture(name));
    for (auto kind : {CorrectionKind::channel_wise, CorrectionKind::inter_channel}) {
      const CostReport r = sweep(m, kind, 8, name);
      EXPECT_EQ(r.reference.macs_norm, 1.0);
      EXPECT_EQ(r.reference.mem_norm, 1.0);
      EXPECT_EQ(r.positions.size(), insertion_positions(m).size());
      for (const auto& rec : r.positions) {
        EXPECT_LE(rec.macs_norm, 1.0) << name << " position " << *rec.position;
        EXPECT_GT(rec.mem_norm, 0.0);
      }
    }
  }
}

TEST(Sweep, MlpHasAPositionAboveReferenceMemory) {
  const ModelGraph m = build_from_config(shipped_architecture("parmar_standin"));
  const CostReport r = sweep(m);
  bool above = false;
  for (const auto& rec : r.positions) above = above || rec.mem_norm > 1.0;
  EXPECT_TRUE(above);
}

TEST(Sweep, ConstantWidthStackDipsAfterPooling) {
  const ModelGraph m = build_from_config(shipped_architecture("lu2021_standin"));
  const CostReport r = sweep(m);
  std::size_t dips = 0, pools = 0;
  for (std::size_t i = 1; i < r.positions.size(); ++i) {
    const std::size_t p = *r.positions[i].position;
    if (m.layer(p).kind() != LayerKind::maxpool) continue;
    ++pools;
    dips += r.positions[i].mem_norm < r.positions[i - 1].mem_norm;
  }
  EXPECT_GT(pools, 1u);
  EXPECT_EQ(dips, pools);
}

TEST(Sweep, SingleLayerHasNoPositions) {
  const ModelGraph m = build_from_config(fc_chain(3, {2}));
  const CostReport r = sweep(m);
  EXPECT_TRUE(r.positions.empty());
  EXPECT_EQ(r.reference.macs.total(), 12u);
}

TEST(Sweep, LohMidPositionMatchesGoldenFile) {
  std::ifstream in(std::string(CLDG_SOURCE_DIR) + "/tests/golden/loh2022_standin_ic_mid.json");
  ASSERT_TRUE(in);
  const auto g = nlohmann::json::parse(in);
  const ModelGraph m = build_from_config(shipped_architecture(g["arch"].get<std::string>()));
  const CostReport r = sweep(m, CorrectionKind::inter_channel, g["element_bytes"]);
  const auto& rec = r.at_position(g["position"]);
  EXPECT_EQ(r.reference.macs.total(), g["reference_macs_total"]);
  EXPECT_EQ(r.reference.memory.total(), g["reference_mem_total"]);
  EXPECT_EQ(rec.macs.forward, g["macs_forward"]);
  EXPECT_EQ(rec.macs.backward_data, g["macs_backward_data"]);
  EXPECT_EQ(rec.macs.backward_weight, g["macs_backward_weight"]);
  EXPECT_EQ(rec.memory.total(), g["mem_total"]);
  EXPECT_DOUBLE_EQ(rec.macs_norm, g["macs_norm"].get<double>());
  EXPECT_DOUBLE_EQ(rec.mem_norm, g["mem_norm"].get<double>());
  EXPECT_THROW(r.at_position(999), ArgumentError);
}

TEST(CostReport, CsvAndJsonLayout) {
  const ModelGraph m = build_from_config(shipped_architecture("parmar_standin"));
  const CostReport r = sweep(m, CorrectionKind::inter_channel, 8, "parmar_standin");
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.rfind("position,macs_norm,mem_norm,", 0), 0u);
  EXPECT_NE(csv.find("\nfull,1,1,"), std::string::npos);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), r.positions.size() + 2);
  const auto j = r.to_json();
  EXPECT_EQ(j["reference"]["position"], "full");
  EXPECT_EQ(j["positions"].size(), r.positions.size());
  EXPECT_EQ(j["reference"]["macs_total"], 62208);
  EXPECT_EQ(r.to_gnuplot().rfind("# arch=parmar_standin", 0), 0u);
}

}  // namespace
}  // namespace cldg
