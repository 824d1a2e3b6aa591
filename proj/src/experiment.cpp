// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include "cldg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "cldg/architectures.hpp"
#include "cldg/checkpoint.hpp"
#include "cldg/costmodel.hpp"
#include "cldg/error.hpp"
#include "cldg/hashing.hpp"
#include "cldg/insertion.hpp"
#include "cldg/rng.hpp"

namespace cldg {

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    std::exception_ptr first;
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        if (!first) first = std::current_exception();
      }
    }
    if (first) std::rethrow_exception(first);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = n;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < failed_index) {
          failed_index = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::jthread> threads;
  const std::size_t count = std::min(jobs, n);
  threads.reserve(count);
  for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
  threads.clear();
  if (failure) std::rethrow_exception(failure);
}

namespace {

nlohmann::json resolve_arch_field(const nlohmann::json& v, const std::filesystem::path& base_dir) {
  if (v.is_object()) return v;
  if (!v.is_string()) throw ConfigError("'architecture' must be an object, a name, or a path");
  const std::string s = v.get<std::string>();
  const auto names = shipped_architecture_names();
  if (std::find(names.begin(), names.end(), s) != names.end()) return shipped_architecture(s);
  std::filesystem::path p(s);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  return resolve_architecture(p.string());
}

nlohmann::json load_json_file(const std::filesystem::path& p) {
  try {
    return nlohmann::json::parse(read_text_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + p.string() + "': " + e.what());
  }
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!architecture.is_object()) throw ConfigError("experiment: architecture missing");
  if (kinds.empty()) throw ConfigError("experiment: at least one correction kind is required");
  if (sample_reductions.empty()) throw ConfigError("experiment: sample_reductions is empty");
  for (double r : sample_reductions) {
    if (!(r >= 1.0) || !std::isfinite(r)) {
      throw ConfigError("experiment: sample reductions must be finite and >= 1");
    }
  }
  if (folds < 2) throw ConfigError("experiment: folds must be at least 2");
  if (sd_holdout_folds < 2) throw ConfigError("experiment: sd_holdout_folds must be at least 2");
  if (td_group_size != 1 && td_group_size != 2) {
    throw ConfigError("experiment: td_group_size must be 1 or 2");
  }
  if (max_splits && *max_splits == 0) throw ConfigError("experiment: max_splits must be positive");
  if (jobs == 0) throw ConfigError("experiment: jobs must be positive");
  stage1.validate();
  stage2.validate();
  if (stage1.mode != TrainMode::full_finetune) {
    throw ConfigError("experiment: stage 1 must use full_finetune");
  }
  if (stage2.mode != TrainMode::cl_only) throw ConfigError("experiment: stage 2 must use cl_only");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json k = nlohmann::json::array();
  for (auto kind : kinds) k.push_back(to_string(kind));
  return {{"architecture_name", architecture_name},
          {"architecture", architecture},
          {"kinds", k},
          {"positions", positions ? nlohmann::json(*positions) : nlohmann::json(nullptr)},
          {"sample_reductions", sample_reductions},
          {"reduced_equal_steps", reduced_equal_steps},
          {"stage1", stage1.to_json()},
          {"stage2", stage2.to_json()},
          {"folds", folds},
          {"td_group_size", td_group_size},
          {"max_splits", max_splits ? nlohmann::json(*max_splits) : nlohmann::json(nullptr)},
          {"sd_holdout_folds", sd_holdout_folds},
          {"seed", seed}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir) {
  try {
    ExperimentConfig c;
    if (!j.contains("architecture")) throw ConfigError("experiment: 'architecture' is required");
    const auto& a = j.at("architecture");
    c.architecture_name = j.value("architecture_name", a.is_string() ? a.get<std::string>() : "");
    c.architecture = resolve_arch_field(a, base_dir);
    if (j.contains("kinds")) {
      c.kinds.clear();
      for (const auto& k : j.at("kinds")) c.kinds.push_back(parse_correction_kind(k.get<std::string>()));
    }
    if (j.contains("positions") && !j.at("positions").is_null()) {
      c.positions = j.at("positions").get<std::vector<std::size_t>>();
    }
    c.sample_reductions = j.value("sample_reductions", c.sample_reductions);
    c.reduced_equal_steps = j.value("reduced_equal_steps", c.reduced_equal_steps);
    if (j.contains("stage1")) c.stage1 = TrainConfig::from_json(j.at("stage1"), c.stage1);
    if (j.contains("stage2")) c.stage2 = TrainConfig::from_json(j.at("stage2"), c.stage2);
    c.folds = j.value("folds", c.folds);
    c.td_group_size = j.value("td_group_size", c.td_group_size);
    if (j.contains("max_splits") && !j.at("max_splits").is_null()) {
      c.max_splits = j.at("max_splits").get<std::size_t>();
    }
    c.sd_holdout_folds = j.value("sd_holdout_folds", c.sd_holdout_folds);
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
}

const ArmResult& ExperimentReport::arm(CorrectionKind kind, double reduction) const {
  for (const auto& a : arms) {
    if (a.kind == kind && a.sample_reduction == reduction) return a;
  }
  throw ArgumentError("experiment report has no " + std::string(to_string(kind)) + " arm at reduction " +
                      fmt(reduction, 2));
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json sp = nlohmann::json::array();
  for (const auto& s : splits) {
    sp.push_back({{"td_patients", s.td_patients},
                  {"td_counts", {{"N", s.td_counts.n}, {"AF", s.td_counts.af}}},
                  {"n_sd", s.sd_indices.size()},
                  {"n_td", s.td_indices.size()}});
  }
  nlohmann::json ar = nlohmann::json::array();
  for (const auto& a : arms) {
    nlohmann::json pos = nlohmann::json::array();
    for (const auto& p : a.positions) {
      pos.push_back({{"position", p.position},
                     {"after_layer", p.after_layer},
                     {"macs_norm", p.macs_norm},
                     {"mem_norm", p.mem_norm},
                     {"qos", p.qos.to_json()}});
    }
    ar.push_back({{"kind", to_string(a.kind)},
                  {"sample_reduction", a.sample_reduction},
                  {"positions", std::move(pos)},
                  {"best_position",
                   a.best_position ? nlohmann::json(*a.best_position) : nlohmann::json(nullptr)},
                  {"best_delta_f1", a.best_delta_f1}});
  }
  return {{"provenance", provenance},
          {"config", config},
          {"splits", std::move(sp)},
          {"baselines", {{"sd", sd_baseline.to_json()}, {"td", td_baseline.to_json()}}},
          {"arms", std::move(ar)},
          {"backbone_checkpoints", backbone_checkpoints},
          {"cost_reports", cost_reports}};
}

std::string ExperimentReport::to_markdown() const {
  std::ostringstream out;
  out << "# Correction-layer experiment\n\n";
  out << "Provenance: `" << provenance << "`\n\n";
  out << "Splits: " << splits.size() << "\n\n";
  out << "| baseline | mean F1 | std |\n|---|---|---|\n";
  out << "| frozen, SD held-out | " << fmt(sd_baseline.summary.mean) << " | "
      << fmt(sd_baseline.summary.std) << " |\n";
  out << "| frozen, TD val folds | " << fmt(td_baseline.summary.mean) << " | "
      << fmt(td_baseline.summary.std) << " |\n\n";
  for (const auto& a : arms) {
    out << "## " << to_string(a.kind) << ", sample reduction " << fmt(a.sample_reduction, 2)
        << "\n\n";
    out << "| position | after layer | mean F1 | std | dF1 | MACs (norm) | memory (norm) |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const auto& p : a.positions) {
      out << "| " << p.position << " | " << p.after_layer << " | " << fmt(p.qos.summary.mean)
          << " | " << fmt(p.qos.summary.std) << " | " << fmt(p.qos.delta_f1) << " | "
          << fmt(p.macs_norm) << " | " << fmt(p.mem_norm) << " |\n";
    }
    if (a.best_position) {
      out << "\nBest position " << *a.best_position << ", dF1 " << fmt(a.best_delta_f1) << "\n";
    }
    out << "\n";
  }
  if (!backbone_checkpoints.empty()) {
    out << "Backbones:";
    for (const auto& c : backbone_checkpoints) out << " `" << c << "`";
    out << "\n\n";
  }
  if (!cost_reports.empty()) {
    out << "Cost reports:";
    for (const auto& c : cost_reports) out << " `" << c << "`";
    out << "\n";
  }
  return out.str();
}

std::string ExperimentReport::hash() const { return sha256_hex(to_json().dump()); }

std::optional<std::size_t> reduction_cap(const SegmentDataset& train_set, double factor) {
  if (factor == 1.0) return std::nullopt;
  std::size_t largest = 0;
  for (const auto& pid : train_set.patients()) {
    const auto c = train_set.patient_label_counts(pid);
    largest = std::max({largest, c.n, c.af});
  }
  const auto cap = static_cast<std::size_t>(std::llround(static_cast<double>(largest) / factor));
  return std::max<std::size_t>(1, cap);
}

namespace {

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

std::vector<Label> labels_of(const SegmentDataset& ds) {
  std::vector<Label> out;
  out.reserve(ds.size());
  for (const auto& s : ds.segments()) out.push_back(s.label);
  return out;
}

struct Backbone {
  std::optional<ModelGraph> model;
  F1Scores sd_holdout;
  std::vector<Fold> td_folds;
  std::vector<F1Scores> td_frozen;
};

struct StageTwoJob {
  std::size_t arm = 0;
  std::size_t split = 0;
  std::size_t position_index = 0;
  std::size_t fold = 0;
};

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, const SegmentDataset& ds,
                                const std::optional<std::filesystem::path>& out_dir,
                                std::string provenance, const ProgressFn& progress) {
  cfg.validate();
  if (ds.empty()) throw ConfigError("experiment: dataset is empty");
  const ModelGraph proto = build_from_config(cfg.architecture, cfg.seed);
  if (proto.input_shape().channels != 1 || proto.input_shape().length != ds.length()) {
    throw DimensionError("experiment: architecture expects input " +
                         shape_to_string(proto.input_shape().shape()) + " but segments have length " +
                         std::to_string(ds.length()));
  }
  const std::vector<std::size_t> positions =
      cfg.positions ? *cfg.positions : block_boundaries(proto);
  const auto legal = insertion_positions(proto);
  for (std::size_t p : positions) {
    if (std::find(legal.begin(), legal.end(), p) == legal.end()) {
      throw ConfigError("experiment: position " + std::to_string(p) + " is not a legal insertion point");
    }
  }

  ExperimentReport report;
  report.config = cfg.to_json();
  report.provenance = std::move(provenance);

  auto all_splits = select_balanced_td(ds, cfg.td_group_size);
  if (all_splits.empty()) throw ConfigError("experiment: no balanced target-domain group exists");
  std::vector<std::size_t> chosen = iota_indices(all_splits.size());
  if (cfg.max_splits && *cfg.max_splits < chosen.size()) {
    Rng rng = Rng::derive(cfg.seed, 0x5b17);
    rng.shuffle(std::span<std::size_t>(chosen));
    chosen.resize(*cfg.max_splits);
    std::sort(chosen.begin(), chosen.end());
  }
  for (std::size_t i : chosen) report.splits.push_back(all_splits[i]);
  const std::size_t n_splits = report.splits.size();

  if (out_dir) std::filesystem::create_directories(*out_dir);

  // Stage 1: one backbone per split, trained on the source domain.
  std::vector<Backbone> backbones(n_splits);
  parallel_for(n_splits, cfg.jobs, [&](std::size_t s) {
    const DomainSplit& split = report.splits[s];
    const SegmentDataset sd = ds.subset(split.sd_indices);
    const auto sd_folds =
        stratified_kfold(labels_of(sd), cfg.sd_holdout_folds, Rng::derive_seed(cfg.seed, 0x5d00 + s));
    TrainConfig c1 = cfg.stage1;
    c1.seed = Rng::derive_seed(cfg.seed, 0x5100 + s);
    ModelGraph init = build_from_config(cfg.architecture, Rng::derive_seed(cfg.seed, 0xb000 + s));
    ModelGraph m = train(std::move(init), sd.subset(sd_folds[0].train), c1).model;
    m.freeze_all();
    m.set_provenance(report.provenance);

    Backbone& b = backbones[s];
    b.sd_holdout = evaluate_f1(m, sd, sd_folds[0].val);
    const SegmentDataset td = ds.subset(split.td_indices);
    b.td_folds = stratified_kfold(labels_of(td), cfg.folds, Rng::derive_seed(cfg.seed, 0x7d00 + s));
    for (const auto& f : b.td_folds) b.td_frozen.push_back(evaluate_f1(m, td, f.val));
    b.model.emplace(std::move(m));
  });

  std::vector<std::vector<F1Scores>> sd_scores, td_scores;
  for (const auto& b : backbones) {
    sd_scores.push_back({b.sd_holdout});
    td_scores.push_back(b.td_frozen);
  }
  report.sd_baseline = aggregate_qos(sd_scores, 0.0);
  report.td_baseline = aggregate_qos(td_scores, 0.0);
  report.sd_baseline.delta_f1 = 0.0;
  report.td_baseline.delta_f1 = 0.0;
  const double td_mean = report.td_baseline.summary.mean;

  if (out_dir) {
    for (std::size_t s = 0; s < n_splits; ++s) {
      const std::string name = "backbone_split" + std::to_string(s) + ".ckpt";
      save_checkpoint_file(*backbones[s].model, *out_dir / name);
      report.backbone_checkpoints.push_back(name);
    }
  }

  // Stage 2: one job per (arm, split, position, fold).
  struct Arm {
    CorrectionKind kind;
    double reduction;
  };
  std::vector<Arm> arms;
  for (auto k : cfg.kinds) {
    for (double r : cfg.sample_reductions) arms.push_back({k, r});
  }
  std::vector<StageTwoJob> jobs;
  for (std::size_t a = 0; a < arms.size(); ++a) {
    for (std::size_t s = 0; s < n_splits; ++s) {
      for (std::size_t pi = 0; pi < positions.size(); ++pi) {
        for (std::size_t f = 0; f < backbones[s].td_folds.size(); ++f) jobs.push_back({a, s, pi, f});
      }
    }
  }
  std::vector<F1Scores> results(jobs.size());
  std::vector<char> done(jobs.size(), 0);
  std::atomic<std::size_t> finished{0};
  try {
    parallel_for(jobs.size(), cfg.jobs, [&](std::size_t j) {
      const StageTwoJob& job = jobs[j];
      const Backbone& b = backbones[job.split];
      const std::size_t p = positions[job.position_index];
      const SegmentDataset td = ds.subset(report.splits[job.split].td_indices);
      const Fold& fold = b.td_folds[job.fold];
      const SegmentDataset train_set = td.subset(fold.train);

      TrainConfig c2 = cfg.stage2;
      // Same stream for every arm so kinds and reductions are compared on
      // identical shuffles.
      c2.seed = Rng::derive_seed(cfg.seed, 0x200000 + job.split * 100003 + job.fold * 1009 + p);
      c2.reuse_frozen_prefix = true;
      const double r = arms[job.arm].reduction;
      c2.samples_per_class_cap = reduction_cap(train_set, r);
      if (cfg.reduced_equal_steps && r > 1.0) {
        c2.epochs = static_cast<std::size_t>(std::llround(static_cast<double>(c2.epochs) * r));
      }
      ModelGraph with_cl = insert_correction(*b.model, arms[job.arm].kind, p);
      const ModelGraph trained = train(std::move(with_cl), train_set, c2).model;
      results[j] = evaluate_f1(trained, td, fold.val);
      if (progress) progress(finished.fetch_add(1) + 1, jobs.size());
      done[j] = 1;
    });
  } catch (...) {
    if (out_dir) {
      nlohmann::json partial = nlohmann::json::array();
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (!done[j]) continue;
        partial.push_back({{"kind", to_string(arms[jobs[j].arm].kind)},
                           {"sample_reduction", arms[jobs[j].arm].reduction},
                           {"split", jobs[j].split},
                           {"position", positions[jobs[j].position_index]},
                           {"fold", jobs[j].fold},
                           {"f1", results[j].macro()}});
      }
      write_text_file(*out_dir / "partial_results.json",
                      nlohmann::json{{"provenance", report.provenance},
                                     {"td_baseline", report.td_baseline.to_json()},
                                     {"completed", partial}}
                          .dump(2));
    }
    throw;
  }

  for (std::size_t a = 0; a < arms.size(); ++a) {
    ArmResult arm;
    arm.kind = arms[a].kind;
    arm.sample_reduction = arms[a].reduction;
    const CostReport cost = sweep(proto, arm.kind);
    std::vector<std::vector<std::vector<F1Scores>>> grid(
        positions.size(), std::vector<std::vector<F1Scores>>(n_splits));
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (jobs[j].arm != a) continue;
      auto& cell = grid[jobs[j].position_index][jobs[j].split];
      if (cell.size() <= jobs[j].fold) cell.resize(jobs[j].fold + 1);
      cell[jobs[j].fold] = results[j];
    }
    for (std::size_t pi = 0; pi < positions.size(); ++pi) {
      PositionResult pr;
      pr.position = positions[pi];
      pr.after_layer = std::string(to_string(proto.layer(pr.position).kind()));
      pr.macs_norm = cost.at_position(pr.position).macs_norm;
      pr.mem_norm = cost.at_position(pr.position).mem_norm;
      pr.qos = aggregate_qos(grid[pi], td_mean);
      arm.positions.push_back(std::move(pr));
    }
    for (const auto& pr : arm.positions) {
      if (!arm.best_position || pr.qos.delta_f1 > arm.best_delta_f1) {
        arm.best_position = pr.position;
        arm.best_delta_f1 = pr.qos.delta_f1;
      }
    }
    if (out_dir) {
      const std::string name = "cost_" + std::string(to_string(arm.kind)) + ".csv";
      if (std::find(report.cost_reports.begin(), report.cost_reports.end(), name) ==
          report.cost_reports.end()) {
        write_text_file(*out_dir / name, cost.to_csv());
        report.cost_reports.push_back(name);
      }
    }
    report.arms.push_back(std::move(arm));
  }

  if (out_dir) {
    write_text_file(*out_dir / "report.json", report.to_json().dump(2) + "\n");
    write_text_file(*out_dir / "report.md", report.to_markdown());
  }
  return report;
}

nlohmann::json ExperimentManifest::to_json() const {
  return {{"experiment", experiment.to_json()},
          {"data", data.to_json()},
          {"n_patients", n_patients},
          {"segments_per_patient", segments_per_patient},
          {"seeds", seeds}};
}

ExperimentManifest ExperimentManifest::from_json(const nlohmann::json& j,
                                                 const std::filesystem::path& base_dir) {
  try {
    ExperimentManifest m;
    if (!j.contains("experiment")) throw ConfigError("manifest: 'experiment' is required");
    nlohmann::json exp = j.at("experiment");
    if (exp.is_string()) {
      std::filesystem::path p = exp.get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      m.experiment = ExperimentConfig::from_json(load_json_file(p), p.parent_path());
    } else {
      m.experiment = ExperimentConfig::from_json(exp, base_dir);
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.is_string()) {
        std::filesystem::path p = d.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        m.data = DomainShiftConfig::from_json(load_json_file(p));
      } else {
        m.data = DomainShiftConfig::from_json(d);
      }
    }
    m.n_patients = j.value("n_patients", m.n_patients);
    m.segments_per_patient = j.value("segments_per_patient", m.segments_per_patient);
    m.seeds = j.value("seeds", m.seeds);
    if (m.seeds.empty()) throw ConfigError("manifest: seeds must not be empty");
    if (j.contains("jobs")) m.experiment.jobs = j.at("jobs").get<std::size_t>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
}

ExperimentManifest ExperimentManifest::load(const std::filesystem::path& path) {
  return from_json(load_json_file(path), path.parent_path());
}

std::string ExperimentManifest::hash() const { return sha256_hex(to_json().dump()); }

nlohmann::json ManifestSummary::to_json() const {
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json arms = nlohmann::json::array();
    for (const auto& a : r.arms) {
      arms.push_back({{"kind", to_string(a.kind)},
                      {"sample_reduction", a.sample_reduction},
                      {"best_position",
                       a.best_position ? nlohmann::json(*a.best_position) : nlohmann::json(nullptr)},
                      {"best_delta_f1", a.best_delta_f1}});
    }
    per_seed.push_back({{"seed", r.config.at("seed")},
                        {"report_hash", r.hash()},
                        {"sd_baseline", r.sd_baseline.summary.mean},
                        {"td_baseline", r.td_baseline.summary.mean},
                        {"arms", std::move(arms)}});
  }
  nlohmann::json arms = nlohmann::json::array();
  if (!reports.empty()) {
    for (std::size_t a = 0; a < reports.front().arms.size(); ++a) {
      arms.push_back({{"kind", to_string(reports.front().arms[a].kind)},
                      {"sample_reduction", reports.front().arms[a].sample_reduction},
                      {"mean_best_delta_f1", mean_best_delta_f1[a]},
                      {"mean_best_f1", mean_best_f1[a]}});
    }
  }
  return {{"manifest_hash", manifest_hash},
          {"mean_sd_baseline", mean_sd_baseline},
          {"mean_td_baseline", mean_td_baseline},
          {"arms", std::move(arms)},
          {"seeds", std::move(per_seed)}};
}

std::string ManifestSummary::to_markdown() const {
  std::ostringstream out;
  out << "# Experiment summary\n\nManifest: `" << manifest_hash << "`\n\nSeeds: " << reports.size()
      << "\n\nFrozen SD baseline " << fmt(mean_sd_baseline) << ", frozen TD baseline "
      << fmt(mean_td_baseline) << "\n\n";
  out << "| kind | sample reduction | mean best F1 | mean best dF1 |\n|---|---|---|---|\n";
  if (!reports.empty()) {
    for (std::size_t a = 0; a < reports.front().arms.size(); ++a) {
      out << "| " << to_string(reports.front().arms[a].kind) << " | "
          << fmt(reports.front().arms[a].sample_reduction, 2) << " | " << fmt(mean_best_f1[a])
          << " | " << fmt(mean_best_delta_f1[a]) << " |\n";
    }
  }
  return out.str();
}

std::string ManifestSummary::hash() const { return sha256_hex(to_json().dump()); }

ManifestSummary run_manifest(const ExperimentManifest& manifest,
                             const std::optional<std::filesystem::path>& out_dir) {
  ManifestSummary summary;
  summary.manifest_hash = manifest.hash();
  for (std::uint64_t seed : manifest.seeds) {
    DomainShiftConfig data = manifest.data;
    data.seed = seed;
    const SegmentDataset ds =
        generate_synthetic(data, manifest.n_patients, manifest.segments_per_patient);
    ExperimentConfig cfg = manifest.experiment;
    cfg.seed = seed;
    std::optional<std::filesystem::path> dir;
    if (out_dir) dir = *out_dir / ("seed_" + std::to_string(seed));
    summary.reports.push_back(run_experiment(cfg, ds, dir, summary.manifest_hash));
  }
  const std::size_t n_arms = summary.reports.front().arms.size();
  summary.mean_best_delta_f1.assign(n_arms, 0.0);
  summary.mean_best_f1.assign(n_arms, 0.0);
  const double n = static_cast<double>(summary.reports.size());
  for (const auto& r : summary.reports) {
    summary.mean_sd_baseline += r.sd_baseline.summary.mean / n;
    summary.mean_td_baseline += r.td_baseline.summary.mean / n;
    for (std::size_t a = 0; a < n_arms; ++a) {
      summary.mean_best_delta_f1[a] += r.arms[a].best_delta_f1 / n;
      summary.mean_best_f1[a] += (r.arms[a].best_delta_f1 + r.td_baseline.summary.mean) / n;
    }
  }
  if (out_dir) {
    write_text_file(*out_dir / "summary.json", summary.to_json().dump(2) + "\n");
    write_text_file(*out_dir / "summary.md", summary.to_markdown());
  }
  return summary;
}

}  // namespace cldg
