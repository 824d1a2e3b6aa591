// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>

#include "cldg/error.hpp"
#include "cldg/experiment.hpp"
#include "cldg/hashing.hpp"
#include "cldg/insertion.hpp"

namespace cldg {
namespace {

namespace fs = std::filesystem;

nlohmann::json tiny_arch() {
  return {{"input", {{"channels", 1}, {"length", 64}}},
          {"layers",
           {{{"kind", "conv1d"}, {"out_channels", 4}, {"kernel_len", 5}},
            {{"kind", "relu"}},
            {{"kind", "maxpool"}, {"window", 2}},
            {{"kind", "conv1d"}, {"out_channels", 4}, {"kernel_len", 3}},
            {{"kind", "relu"}},
            {{"kind", "gap"}},
            {{"kind", "fc"}, {"out", 2}}}},
          {"classes", {"N", "AF"}}};
}

DomainShiftConfig tiny_data(std::uint64_t seed) {
  DomainShiftConfig d;
  d.fs_hz = 64.0;
  d.length = 64;
  d.balanced_patient_fraction = 1.0;
  d.seed = seed;
  return d;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.architecture_name = "tiny";
  c.architecture = tiny_arch();
  c.kinds = {CorrectionKind::inter_channel, CorrectionKind::channel_wise};
  c.stage1.epochs = 2;
  c.stage1.batch_size = 8;
  c.stage1.learning_rate = 0.05;
  c.stage2.epochs = 2;
  c.stage2.batch_size = 8;
  c.max_splits = 2;
  c.seed = 7;
  return c;
}

const SegmentDataset& tiny_dataset() {
  static const SegmentDataset ds = generate_synthetic(tiny_data(1), 4, 20);
  return ds;
}

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(ParallelFor, RunsEveryIndexOnceAndRethrowsLowestFailure) {
  for (std::size_t jobs : {1u, 4u}) {
    std::vector<std::atomic<int>> hits(50);
    try {
      parallel_for(50, jobs, [&](std::size_t i) {
        ++hits[i];
        if (i == 31 || i == 17) throw ArgumentError("fail " + std::to_string(i));
      });
      FAIL() << "expected an exception";
    } catch (const ArgumentError& e) {
      EXPECT_STREQ(e.what(), "fail 17");
    }
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  parallel_for(0, 3, [](std::size_t) { FAIL(); });
}

TEST(ReductionCap, RoundsLargestPerPatientClassCount) {
  const auto& ds = tiny_dataset();
  EXPECT_FALSE(reduction_cap(ds, 1.0).has_value());
  std::size_t largest = 0;
  for (const auto& p : ds.patients()) {
    const auto c = ds.patient_label_counts(p);
    largest = std::max({largest, c.n, c.af});
  }
  EXPECT_EQ(*reduction_cap(ds, 3.0), static_cast<std::size_t>(std::llround(largest / 3.0)));
  EXPECT_EQ(*reduction_cap(ds, 1000.0), 1u);
}

TEST(ExperimentConfig, JsonRoundTripAndValidation) {
  ExperimentConfig c = tiny_config();
  c.positions = std::vector<std::size_t>{2, 5};
  c.sample_reductions = {1.0, 3.0};
  const auto r = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(r.to_json(), c.to_json());
  EXPECT_FALSE(c.to_json().contains("jobs"));

  ExperimentConfig bad = tiny_config();
  bad.stage2.mode = TrainMode::full_finetune;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = tiny_config();
  bad.sample_reductions = {0.5};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = tiny_config();
  bad.kinds.clear();
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = tiny_config();
  bad.positions = std::vector<std::size_t>{6};
  EXPECT_THROW(run_experiment(bad, tiny_dataset()), ConfigError);

  const auto named = ExperimentConfig::from_json({{"architecture", "parmar_standin"}});
  EXPECT_EQ(named.architecture["input"]["length"], 128);
}

TEST(Experiment, EmptyPositionListGivesBaselinesOnly) {
  ExperimentConfig c = tiny_config();
  c.positions = std::vector<std::size_t>{};
  const auto r = run_experiment(c, tiny_dataset());
  EXPECT_EQ(r.splits.size(), 2u);
  EXPECT_EQ(r.sd_baseline.per_split.size(), 2u);
  EXPECT_EQ(r.td_baseline.per_split.size(), 2u);
  EXPECT_EQ(r.td_baseline.per_fold[0].size(), 5u);
  ASSERT_EQ(r.arms.size(), 2u);
  for (const auto& a : r.arms) {
    EXPECT_TRUE(a.positions.empty());
    EXPECT_FALSE(a.best_position.has_value());
  }
}

TEST(Experiment, ReportIsConsistentAndDeterministic) {
  const ExperimentConfig c = tiny_config();
  const auto a = run_experiment(c, tiny_dataset());
  const auto b = run_experiment(c, tiny_dataset());
  EXPECT_EQ(a.hash(), b.hash());

  const auto ms = block_boundaries(build_from_config(tiny_arch()));
  for (const auto& arm : a.arms) {
    ASSERT_EQ(arm.positions.size(), ms.size());
    double best = -1e300;
    std::size_t best_pos = 0;
    for (std::size_t i = 0; i < arm.positions.size(); ++i) {
      const auto& pr = arm.positions[i];
      EXPECT_EQ(pr.position, ms[i]);
      EXPECT_DOUBLE_EQ(pr.qos.delta_f1, pr.qos.summary.mean - a.td_baseline.summary.mean);
      EXPECT_GT(pr.macs_norm, 0.0);
      EXPECT_LE(pr.macs_norm, 1.0);
      EXPECT_EQ(pr.qos.per_fold.size(), 2u);
      if (pr.qos.delta_f1 > best) best = pr.qos.delta_f1, best_pos = pr.position;
    }
    EXPECT_EQ(*arm.best_position, best_pos);
    EXPECT_EQ(arm.best_delta_f1, best);
  }
  EXPECT_NO_THROW(a.arm(CorrectionKind::channel_wise));
  EXPECT_THROW(a.arm(CorrectionKind::channel_wise, 3.0), ArgumentError);
  EXPECT_NE(a.to_markdown().find("inter_channel"), std::string::npos);
}

TEST(Experiment, ThreadCountDoesNotChangeTheReport) {
  ExperimentConfig c = tiny_config();
  c.kinds = {CorrectionKind::inter_channel};
  c.sample_reductions = {1.0, 2.0};
  const auto serial = run_experiment(c, tiny_dataset());
  c.jobs = 3;
  const auto threaded = run_experiment(c, tiny_dataset());
  EXPECT_EQ(serial.to_json().dump(), threaded.to_json().dump());
}

TEST(Experiment, WritesArtifacts) {
  TempDir dir("cldg_exp_artifacts");
  ExperimentConfig c = tiny_config();
  c.kinds = {CorrectionKind::channel_wise};
  std::atomic<std::size_t> calls{0};
  std::size_t total = 0;
  const auto r = run_experiment(c, tiny_dataset(), dir.path(), "prov",
                                [&](std::size_t, std::size_t t) {
                                  ++calls;
                                  total = t;
                                });
  EXPECT_EQ(calls.load(), total);
  EXPECT_EQ(r.backbone_checkpoints.size(), 2u);
  for (const auto& f : r.backbone_checkpoints) EXPECT_TRUE(fs::exists(dir.path() / f));
  EXPECT_EQ(r.cost_reports, std::vector<std::string>{"cost_channel_wise.csv"});
  EXPECT_TRUE(fs::exists(dir.path() / "report.md"));
  const auto j = nlohmann::json::parse(read_text_file(dir.path() / "report.json"));
  EXPECT_EQ(j, r.to_json());
  EXPECT_EQ(j["provenance"], "prov");
  EXPECT_FALSE(fs::exists(dir.path() / "partial_results.json"));
}

TEST(Experiment, FailureLeavesPartialResults) {
  TempDir dir("cldg_exp_partial");
  ExperimentConfig c = tiny_config();
  c.kinds = {CorrectionKind::inter_channel};
  EXPECT_THROW(run_experiment(c, tiny_dataset(), dir.path(), "prov",
                              [](std::size_t finished, std::size_t) {
                                if (finished > 2) throw IoError("disk full");
                              }),
               IoError);
  const auto j = nlohmann::json::parse(read_text_file(dir.path() / "partial_results.json"));
  EXPECT_EQ(j["completed"].size(), 2u);
  EXPECT_EQ(j["provenance"], "prov");
  EXPECT_FALSE(fs::exists(dir.path() / "report.json"));
}

TEST(Manifest, PathsHashAndSummary) {
  TempDir dir("cldg_manifest");
  fs::create_directories(dir.path());
  write_text_file(dir.path() / "arch.json", tiny_arch().dump());
  write_text_file(dir.path() / "data.json", tiny_data(0).to_json().dump());
  nlohmann::json exp = tiny_config().to_json();
  exp["architecture"] = "arch.json";
  exp["positions"] = {5};
  const nlohmann::json mj{{"experiment", exp},
                          {"data", "data.json"},
                          {"n_patients", 4},
                          {"segments_per_patient", 20},
                          {"seeds", {0, 1}},
                          {"jobs", 2}};
  write_text_file(dir.path() / "manifest.json", mj.dump());
  const auto m = ExperimentManifest::load(dir.path() / "manifest.json");
  EXPECT_EQ(m.experiment.architecture, tiny_arch());
  EXPECT_EQ(m.experiment.jobs, 2u);
  EXPECT_EQ(m.seeds, (std::vector<std::uint64_t>{0, 1}));

  ExperimentManifest serial = m;
  serial.experiment.jobs = 1;
  EXPECT_EQ(serial.hash(), m.hash());

  const auto out = dir.path() / "out";
  const auto s = run_manifest(m, out);
  ASSERT_EQ(s.reports.size(), 2u);
  EXPECT_EQ(s.manifest_hash, m.hash());
  for (std::size_t a = 0; a < s.mean_best_delta_f1.size(); ++a) {
    const double mean =
        (s.reports[0].arms[a].best_delta_f1 + s.reports[1].arms[a].best_delta_f1) / 2.0;
    EXPECT_DOUBLE_EQ(s.mean_best_delta_f1[a], mean);
  }
  EXPECT_TRUE(fs::exists(out / "seed_0" / "report.json"));
  EXPECT_TRUE(fs::exists(out / "seed_1" / "report.json"));
  EXPECT_TRUE(fs::exists(out / "summary.json"));
  EXPECT_EQ(run_manifest(serial, dir.path() / "out2").hash(), s.hash());
}

}  // namespace
}  // namespace cldg
