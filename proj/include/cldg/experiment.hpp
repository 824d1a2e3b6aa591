// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cldg/correction.hpp"
#include "cldg/data.hpp"
#include "cldg/eval.hpp"
#include "cldg/training.hpp"

namespace cldg {

/// Two-stage domain-generalization experiment. Stage 1 trains a backbone on
/// the source domain of each (SD, TD) split; stage 2 inserts a correction
/// layer at every requested position, trains it on the TD training folds and
/// scores the TD validation folds.
struct ExperimentConfig {
  std::string architecture_name;
  nlohmann::json architecture;
  std::vector<CorrectionKind> kinds{CorrectionKind::inter_channel};
  /// Empty: every block boundary of the architecture.
  std::optional<std::vector<std::size_t>> positions;
  /// 1 trains on every TD training segment; f > 1 keeps about 1/f of them.
  std::vector<double> sample_reductions{1.0};
  /// Scale epochs by the reduction factor so the SGD step count stays equal.
  bool reduced_equal_steps = false;
  TrainConfig stage1;
  TrainConfig stage2 = TrainConfig::cl_defaults();
  std::size_t folds = 5;
  std::size_t td_group_size = 1;
  /// Random subset of the balanced splits; empty keeps all.
  std::optional<std::size_t> max_splits;
  /// Stage 1 holds out one of this many stratified SD folds for the SD baseline.
  std::size_t sd_holdout_folds = 5;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const;
  nlohmann::json to_json() const;
  /// "architecture" may be inline, a shipped name, or a path relative to
  /// base_dir.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir = {});
};

/// Per-(patient, class) cap that keeps about 1/factor of a training set:
/// round(largest per-(patient, class) count / factor), at least 1. No cap
/// for factor 1.
std::optional<std::size_t> reduction_cap(const SegmentDataset& train_set, double factor);

struct PositionResult {
  std::size_t position = 0;
  std::string after_layer;
  double macs_norm = 0.0;
  double mem_norm = 0.0;
  QosResult qos;
};

struct ArmResult {
  CorrectionKind kind = CorrectionKind::inter_channel;
  double sample_reduction = 1.0;
  std::vector<PositionResult> positions;
  /// Position with the highest mean F1; lowest index wins ties.
  std::optional<std::size_t> best_position;
  double best_delta_f1 = 0.0;
};

struct ExperimentReport {
  nlohmann::json config;
  std::string provenance;
  std::vector<DomainSplit> splits;
  QosResult sd_baseline;
  QosResult td_baseline;
  std::vector<ArmResult> arms;
  /// Paths written next to the report, relative to the output directory.
  std::vector<std::string> backbone_checkpoints;
  std::vector<std::string> cost_reports;

  const ArmResult& arm(CorrectionKind kind, double reduction = 1.0) const;
  nlohmann::json to_json() const;
  std::string to_markdown() const;
  /// SHA-256 of to_json().dump().
  std::string hash() const;
};

/// (finished, total) stage-2 jobs. Called from worker threads; an exception
/// thrown here fails the job that reported it.
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

/// When `out_dir` is set, backbones and cost reports are written there, and
/// finished stage-2 jobs are saved to partial_results.json if any job
/// throws. Every job still runs; the error of the lowest failing job is
/// rethrown afterwards.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const SegmentDataset& ds,
                                const std::optional<std::filesystem::path>& out_dir = {},
                                std::string provenance = {}, const ProgressFn& progress = {});

/// Runs fn(0..n-1) on up to `jobs` threads. Every index runs exactly once;
/// the exception of the lowest failing index is rethrown after all threads
/// finish.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

/// A set of seeds run against one pinned experiment. Each seed regenerates
/// the synthetic data (data.seed = seed) and reseeds the experiment.
struct ExperimentManifest {
  ExperimentConfig experiment;
  DomainShiftConfig data;
  std::size_t n_patients = 12;
  std::size_t segments_per_patient = 40;
  std::vector<std::uint64_t> seeds{0};

  nlohmann::json to_json() const;
  /// "data" may be inline or a path to a data config relative to base_dir.
  static ExperimentManifest from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = {});
  static ExperimentManifest load(const std::filesystem::path& path);
  /// SHA-256 of the canonical JSON form.
  std::string hash() const;
};

struct ManifestSummary {
  std::string manifest_hash;
  std::vector<ExperimentReport> reports;
  /// Mean over seeds of each arm's best ΔF1, ordered like the arms.
  std::vector<double> mean_best_delta_f1;
  std::vector<double> mean_best_f1;
  double mean_sd_baseline = 0.0;
  double mean_td_baseline = 0.0;

  nlohmann::json to_json() const;
  std::string to_markdown() const;
  std::string hash() const;
};

ManifestSummary run_manifest(const ExperimentManifest& manifest,
                             const std::optional<std::filesystem::path>& out_dir = {});

}  // namespace cldg
