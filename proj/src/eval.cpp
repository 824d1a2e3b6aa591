// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include "cldg/eval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "cldg/error.hpp"

namespace cldg {

std::size_t Confusion::tp(Label c) const {
  const auto i = static_cast<std::size_t>(c);
  return counts[i][i];
}

std::size_t Confusion::fp(Label c) const {
  const auto i = static_cast<std::size_t>(c);
  std::size_t n = 0;
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    if (t != i) n += counts[t][i];
  }
  return n;
}

std::size_t Confusion::fn(Label c) const {
  const auto i = static_cast<std::size_t>(c);
  std::size_t n = 0;
  for (std::size_t p = 0; p < kNumClasses; ++p) {
    if (p != i) n += counts[i][p];
  }
  return n;
}

Confusion confusion_matrix(std::span<const Label> preds, std::span<const Label> labels) {
  if (preds.size() != labels.size()) {
    throw ArgumentError("confusion_matrix: " + std::to_string(preds.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  }
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ++c.counts[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(preds[i])];
  }
  return c;
}

double F1Scores::macro() const {
  double s = 0.0;
  for (double v : per_class) s += v;
  return s / static_cast<double>(kNumClasses);
}

F1Scores f1_per_class(std::span<const Label> preds, std::span<const Label> labels) {
  const Confusion c = confusion_matrix(preds, labels);
  F1Scores r;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const auto label = static_cast<Label>(k);
    const double tp = static_cast<double>(c.tp(label));
    const double fp = static_cast<double>(c.fp(label));
    const double fn = static_cast<double>(c.fn(label));
    if (tp + fp + fn == 0.0) {
      r.undefined[k] = true;
      r.per_class[k] = 0.0;
      continue;
    }
    // 2PR/(P+R) reduces to 2TP/(2TP+FP+FN) and stays defined when P or R is 0/0.
    r.per_class[k] = 2.0 * tp / (2.0 * tp + fp + fn);
  }
  return r;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  r.n = values.size();
  if (values.empty()) return r;
  double s = 0.0;
  for (double v : values) s += v;
  r.mean = s / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return r;
}

nlohmann::json QosResult::to_json() const {
  return {{"per_fold_f1", per_fold},
          {"per_split_f1", per_split},
          {"per_class_f1", {{"N", per_class[0]}, {"AF", per_class[1]}}},
          {"mean_f1", summary.mean},
          {"std_f1", summary.std},
          {"delta_f1", delta_f1}};
}

namespace {

/// Sums a sorted copy so the result does not depend on input order.
MeanStd sorted_mean_std(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return mean_std(values);
}

}  // namespace

QosResult aggregate_qos(const std::vector<std::vector<F1Scores>>& folds, double baseline_mean) {
  QosResult q;
  std::array<std::vector<double>, kNumClasses> class_values;
  for (const auto& split : folds) {
    std::vector<double> macro;
    for (const auto& f : split) {
      macro.push_back(f.macro());
      for (std::size_t k = 0; k < kNumClasses; ++k) class_values[k].push_back(f.per_class[k]);
    }
    q.per_split.push_back(sorted_mean_std(macro).mean);
    q.per_fold.push_back(std::move(macro));
  }
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    q.per_class[k] = sorted_mean_std(class_values[k]).mean;
  }
  q.summary = sorted_mean_std(q.per_split);
  q.delta_f1 = q.summary.mean - baseline_mean;
  return q;
}

std::vector<Label> predict(const ModelGraph& m, const SegmentDataset& ds,
                           std::span<const std::size_t> indices) {
  std::vector<Label> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const Tensor logits = forward(m, ds.segments().at(i).signal).logits;
    out.push_back(static_cast<Label>(argmax(logits)));
  }
  return out;
}

F1Scores evaluate_f1(const ModelGraph& m, const SegmentDataset& ds,
                     std::span<const std::size_t> indices) {
  std::vector<Label> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) labels.push_back(ds.segments().at(i).label);
  return f1_per_class(predict(m, ds, indices), labels);
}

PcaResult pca_project(const std::vector<std::vector<double>>& features, std::size_t dims) {
  if (features.size() < 2) throw ArgumentError("pca_project: needs at least two samples");
  const std::size_t d = features.front().size();
  if (d == 0) throw ArgumentError("pca_project: empty feature vectors");
  for (const auto& f : features) {
    if (f.size() != d) throw DimensionError("pca_project: feature vectors differ in length");
  }
  if (dims == 0 || dims > d) throw ArgumentError("pca_project: dims must be in [1, feature size]");

  const auto n = static_cast<Eigen::Index>(features.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
      x(i, j) = features[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);

  PcaResult r;
  r.points.assign(features.size(), std::vector<double>(dims, 0.0));
  r.explained_variance_ratio.assign(dims, 0.0);
  const double total = cov.trace();
  if (!(total > 0.0)) {
    r.zero_variance = true;
    return r;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("pca_project: eigensolver failed");
  // Eigenvalues come in ascending order.
  const Eigen::Index top = static_cast<Eigen::Index>(d) - 1;
  for (std::size_t k = 0; k < dims; ++k) {
    const Eigen::Index col = top - static_cast<Eigen::Index>(k);
    Eigen::VectorXd axis = eig.eigenvectors().col(col);
    // Sign convention: largest-magnitude component positive.
    Eigen::Index arg = 0;
    axis.cwiseAbs().maxCoeff(&arg);
    if (axis(arg) < 0) axis = -axis;
    r.explained_variance_ratio[k] = std::max(0.0, eig.eigenvalues()(col)) / total;
    const Eigen::VectorXd proj = x * axis;
    for (Eigen::Index i = 0; i < n; ++i) r.points[static_cast<std::size_t>(i)][k] = proj(i);
  }
  return r;
}

std::vector<std::vector<double>> pooled_features(const ModelGraph& m, const SegmentDataset& ds,
                                                 std::span<const std::size_t> indices,
                                                 std::size_t layer) {
  if (layer >= m.size()) throw ArgumentError("pooled_features: layer index out of range");
  std::vector<std::vector<double>> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto r = forward(m, ds.segments().at(i).signal, {layer});
    const Tensor pooled = global_avg_pool_forward(r.captured.at(layer));
    out.emplace_back(pooled.data().begin(), pooled.data().end());
  }
  return out;
}

}  // namespace cldg
