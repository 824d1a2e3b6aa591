// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "cldg/data.hpp"
#include "cldg/model.hpp"

namespace cldg {

struct Confusion {
  /// counts[truth][pred]
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};
  std::size_t tp(Label c) const;
  std::size_t fp(Label c) const;
  std::size_t fn(Label c) const;
};

Confusion confusion_matrix(std::span<const Label> preds, std::span<const Label> labels);

struct F1Scores {
  std::array<double, kNumClasses> per_class{};
  /// Class absent from both predictions and labels; its F1 is reported as 0.
  std::array<bool, kNumClasses> undefined{};
  /// Unweighted mean over classes.
  double macro() const;
};

/// F1 = 2PR/(P+R) per class. Throws ArgumentError on a length mismatch.
F1Scores f1_per_class(std::span<const Label> preds, std::span<const Label> labels);

struct MeanStd {
  double mean = 0.0;
  /// Sample standard deviation (n-1); 0 for fewer than two values.
  double std = 0.0;
  std::size_t n = 0;
};

/// Summation in the given order; callers sort when order independence is
/// needed.
MeanStd mean_std(std::span<const double> values);

/// Scores of one configuration across splits and folds.
struct QosResult {
  /// per_fold[split][fold], macro F1.
  std::vector<std::vector<double>> per_fold;
  /// Mean per-class F1 over all folds.
  std::array<double, kNumClasses> per_class{};
  /// Fold mean of every split.
  std::vector<double> per_split;
  /// Mean and spread of per_split: folds are averaged first, then splits.
  MeanStd summary;
  /// summary.mean minus the frozen target-domain baseline mean.
  double delta_f1 = 0.0;

  nlohmann::json to_json() const;
};

/// Builds a QosResult from folds[split][fold]. Means are summed in sorted
/// order, so reordering splits or folds leaves every aggregate unchanged.
QosResult aggregate_qos(const std::vector<std::vector<F1Scores>>& folds, double baseline_mean);

std::vector<Label> predict(const ModelGraph& m, const SegmentDataset& ds,
                           std::span<const std::size_t> indices);
F1Scores evaluate_f1(const ModelGraph& m, const SegmentDataset& ds,
                     std::span<const std::size_t> indices);

struct PcaResult {
  /// n x dims projected points.
  std::vector<std::vector<double>> points;
  /// Share of the total variance carried by each kept axis.
  std::vector<double> explained_variance_ratio;
  bool zero_variance = false;
};

/// Mean-centred projection onto the top `dims` eigenvectors of the sample
/// covariance. Needs at least two samples of equal length.
PcaResult pca_project(const std::vector<std::vector<double>>& features, std::size_t dims = 2);

/// Output of layer `layer` for every listed segment, averaged over time.
std::vector<std::vector<double>> pooled_features(const ModelGraph& m, const SegmentDataset& ds,
                                                 std::span<const std::size_t> indices,
                                                 std::size_t layer);

}  // namespace cldg
