// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

// Command-line front end. Every artifact carries the hash of the run
// description (subcommand, parameters, input hashes) it was produced from.

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cldg/architectures.hpp"
#include "cldg/checkpoint.hpp"
#include "cldg/costmodel.hpp"
#include "cldg/data.hpp"
#include "cldg/error.hpp"
#include "cldg/eval.hpp"
#include "cldg/experiment.hpp"
#include "cldg/hashing.hpp"
#include "cldg/insertion.hpp"
#include "cldg/training.hpp"

namespace fs = std::filesystem;
using namespace cldg;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kIngestion = 4,
  kFormat = 5,
  kDimension = 6,
  kUnsupportedFold = 7,
  kIo = 8,
  kNumeric = 9,
};

int exit_code_for(const Error& e) {
  const std::string& c = e.category();
  if (c == "argument") return kUsage;
  if (c == "config") return kConfig;
  if (c == "ingestion") return kIngestion;
  if (c == "format") return kFormat;
  if (c == "dimension") return kDimension;
  if (c == "unsupported-fold") return kUnsupportedFold;
  if (c == "io") return kIo;
  if (c == "numeric") return kNumeric;
  return kInternal;
}

/// Canonical description of one invocation; its hash is the provenance
/// stamped into every output.
class RunManifest {
 public:
  explicit RunManifest(std::string command) { j_["command"] = std::move(command); }
  template <typename T>
  void param(const std::string& key, const T& value) {
    j_["params"][key] = value;
  }
  void input_file(const std::string& key, const fs::path& path) {
    j_["inputs"][key] = sha256_file(path);
  }
  void input_hash(const std::string& key, const std::string& hash) { j_["inputs"][key] = hash; }
  std::string hash() const { return sha256_hex(j_.dump()); }
  const nlohmann::json& json() const { return j_; }

 private:
  nlohmann::json j_ = nlohmann::json::object();
};

std::string dataset_hash(const SegmentDataset& ds) {
  std::string buf;
  for (const auto& s : ds.segments()) {
    buf += s.record_id + ',' + s.patient_id + ',' + std::string(to_string(s.label)) + ',' +
           std::to_string(s.signal.numel()) + '\n';
    for (double v : s.signal.data()) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>(bits >> (8 * i)));
    }
  }
  return sha256_hex(buf);
}

fs::path manifest_path(const fs::path& data) {
  return fs::is_directory(data) ? data / "manifest.csv" : data;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct DataSelection {
  std::string data;
  std::string patients;
  std::string exclude;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--data", data, "Dataset directory or manifest.csv")->required();
    cmd->add_option("--patients", patients, "Comma-separated patient ids to keep");
    cmd->add_option("--exclude-patients", exclude, "Comma-separated patient ids to drop");
  }

  SegmentDataset load(RunManifest& run) const {
    std::vector<std::string> warnings;
    SegmentDataset ds = load_dataset(manifest_path(data), &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    const auto keep = split_list(patients);
    const auto drop = split_list(exclude);
    const auto ids = ds.patients();
    const std::set<std::string> known(ids.begin(), ids.end());
    for (const auto& p : keep) {
      if (!known.count(p)) throw ArgumentError("unknown patient '" + p + "' in --patients");
    }
    for (const auto& p : drop) {
      if (!known.count(p)) throw ArgumentError("unknown patient '" + p + "' in --exclude-patients");
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& pid = ds[i].patient_id;
      if (!keep.empty() && std::find(keep.begin(), keep.end(), pid) == keep.end()) continue;
      if (std::find(drop.begin(), drop.end(), pid) != drop.end()) continue;
      idx.push_back(i);
    }
    SegmentDataset sel = ds.subset(idx);
    run.input_hash("dataset", dataset_hash(sel));
    return sel;
  }
};

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

nlohmann::json load_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path.string() + "': " + e.what());
  }
}

struct TrainFlags {
  std::string config;
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> cap;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--config", config, "Training config JSON");
    cmd->add_option("--lr", lr, "Learning rate");
    cmd->add_option("--epochs", epochs, "Epochs");
    cmd->add_option("--batch", batch, "Mini-batch size");
    cmd->add_option("--cap", cap, "Max segments per (patient, class)");
  }

  TrainConfig resolve(TrainConfig base, std::uint64_t seed) const {
    if (!config.empty()) base = TrainConfig::from_json(load_json(config), base);
    if (lr) base.learning_rate = *lr;
    if (epochs) base.epochs = *epochs;
    if (batch) base.batch_size = *batch;
    if (cap) base.samples_per_class_cap = *cap;
    base.seed = seed;
    base.validate();
    return base;
  }
};

void finish_training(const TrainResult& r, const fs::path& out, const std::string& stats_path,
                     const RunManifest& run) {
  ModelGraph m = r.model;
  m.set_provenance(run.hash());
  save_checkpoint_file(m, out);
  nlohmann::json stats = r.stats.to_json();
  stats["provenance"] = run.hash();
  stats["run"] = run.json();
  write_json(stats_path.empty() ? fs::path(out.string() + ".stats.json") : fs::path(stats_path),
             stats);
  std::cout << "wrote " << out.string() << " (final loss "
            << (r.stats.loss_curve.empty() ? 0.0 : r.stats.loss_curve.back()) << ")\n";
}

CostPlan parse_plan(const std::string& text, CorrectionKind kind) {
  if (text == "full") return CostPlan::full_finetune();
  if (text.rfind("cl:", 0) == 0) {
    const std::string num = text.substr(3);
    if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos) {
      throw ArgumentError("--plan cl:P needs a non-negative integer position, got '" + text + "'");
    }
    return CostPlan::cl_at(std::stoul(num), kind);
  }
  throw ArgumentError("--plan must be full, cl:P or sweep, got '" + text + "'");
}

std::string dat_header(const std::string& provenance, const std::string& columns) {
  return "# provenance " + provenance + "\n# " + columns + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correction-layer domain generalization toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(
      "Exit codes: 0 ok, 1 internal, 2 usage, 3 config, 4 ingestion, 5 checkpoint format,\n"
      "6 dimension, 7 unsupported fold, 8 io, 9 numeric (training diverged).");
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random choice")->envname("CLDG_SEED");

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic domain-shifted dataset");
  std::size_t n_patients = 12, n_segments = 100;
  std::string synth_out, synth_cfg;
  std::optional<double> synth_fs;
  std::optional<std::size_t> synth_len;
  synth->add_option("--patients", n_patients, "Number of patients");
  synth->add_option("--segments", n_segments, "Segments per patient");
  synth->add_option("--config", synth_cfg, "Generator config JSON");
  synth->add_option("--fs", synth_fs, "Sampling rate override");
  synth->add_option("--length", synth_len, "Segment length override");
  synth->add_option("-o,--out", synth_out, "Output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a backbone from scratch (all layers)");
  std::string arch_name, out_path, stats_path;
  DataSelection train_data;
  TrainFlags train_flags;
  train_cmd->add_option("--arch", arch_name, "Shipped architecture name or JSON path")->required();
  train_data.add_options(train_cmd);
  train_flags.add_options(train_cmd);
  train_cmd->add_option("--out", out_path, "Checkpoint to write")->required();
  train_cmd->add_option("--stats", stats_path, "Training stats JSON");

  // insert-cl
  auto* insert_cmd = app.add_subcommand("insert-cl", "Insert an identity correction layer");
  std::string in_path, kind_name = "ic";
  std::size_t position = 0;
  insert_cmd->add_option("--in", in_path, "Input checkpoint")->required();
  insert_cmd->add_option("--out", out_path, "Output checkpoint")->required();
  insert_cmd->add_option("--position", position, "Insert after this layer index")->required();
  insert_cmd->add_option("--kind", kind_name, "ic or cw");

  // train-cl
  auto* train_cl_cmd = app.add_subcommand("train-cl", "Train only the correction layer");
  DataSelection cl_data;
  TrainFlags cl_flags;
  train_cl_cmd->add_option("--in", in_path, "Checkpoint with a correction layer")->required();
  cl_data.add_options(train_cl_cmd);
  cl_flags.add_options(train_cl_cmd);
  train_cl_cmd->add_option("--out", out_path, "Checkpoint to write")->required();
  train_cl_cmd->add_option("--stats", stats_path, "Training stats JSON");

  // fold-cl
  auto* fold_cmd = app.add_subcommand("fold-cl", "Merge the correction layer into the next layer");
  fold_cmd->add_option("--in", in_path, "Input checkpoint")->required();
  fold_cmd->add_option("--out", out_path, "Output checkpoint")->required();

  // estimate-cost
  auto* cost_cmd = app.add_subcommand("estimate-cost", "Analytic training MACs and memory");
  std::string plan_text = "sweep", json_path;
  std::size_t element_bytes = 8;
  cost_cmd->add_option("--arch", arch_name, "Shipped architecture name or JSON path")->required();
  cost_cmd->add_option("--plan", plan_text, "full, cl:P or sweep");
  cost_cmd->add_option("--kind", kind_name, "ic or cw");
  cost_cmd->add_option("--element-bytes", element_bytes, "Bytes per stored value");
  cost_cmd->add_option("-o,--out", out_path, "CSV output (stdout if omitted)");
  cost_cmd->add_option("--json", json_path, "JSON output");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a two-stage experiment manifest");
  std::string manifest_file, out_dir;
  std::size_t jobs = 1;
  std::vector<std::uint64_t> seeds_override;
  sweep_cmd->add_option("--manifest", manifest_file, "Experiment manifest JSON")->required();
  sweep_cmd->add_option("--out", out_dir, "Output directory")->required();
  sweep_cmd->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--seeds", seeds_override, "Override the manifest's seed list");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "F1 of a checkpoint on a dataset");
  DataSelection eval_data;
  std::optional<std::size_t> pca_layer;
  std::string pca_out;
  eval_cmd->add_option("--model", in_path, "Checkpoint")->required();
  eval_data.add_options(eval_cmd);
  eval_cmd->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  eval_cmd->add_option("-o,--out", out_path, "JSON output (stdout if omitted)");
  eval_cmd->add_option("--pca-layer", pca_layer, "Project time-averaged features of this layer");
  eval_cmd->add_option("--pca-out", pca_out, "gnuplot .dat for the PCA projection");

  // report
  auto* report_cmd = app.add_subcommand("report", "gnuplot data files from a report");
  report_cmd->add_option("--in", in_path, "report.json, summary.json or cost JSON")->required();
  report_cmd->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) {
      DomainShiftConfig cfg;
      if (!synth_cfg.empty()) cfg = DomainShiftConfig::from_json(load_json(synth_cfg));
      if (synth_fs) cfg.fs_hz = *synth_fs;
      if (synth_len) cfg.length = *synth_len;
      cfg.seed = seed;
      cfg.validate();
      RunManifest run("synth-data");
      run.param("data_config", cfg.to_json());
      run.param("patients", n_patients);
      run.param("segments", n_segments);
      const SegmentDataset ds = generate_synthetic(cfg, n_patients, n_segments);
      const fs::path manifest = save_dataset(ds, synth_out);
      write_json(fs::path(synth_out) / "dataset.json",
                 {{"provenance", run.hash()},
                  {"run", run.json()},
                  {"dataset_sha256", dataset_hash(ds)},
                  {"manifest_sha256", sha256_file(manifest)}});
      std::cout << "wrote " << ds.size() << " segments from " << n_patients << " patients to "
                << manifest.string() << "\n";
    } else if (*train_cmd) {
      RunManifest run("train");
      const nlohmann::json arch = resolve_architecture(arch_name);
      run.param("architecture", arch);
      run.param("seed", seed);
      const SegmentDataset ds = train_data.load(run);
      TrainConfig cfg = train_flags.resolve(TrainConfig{}, seed);
      cfg.mode = TrainMode::full_finetune;
      run.param("train", cfg.to_json());
      ModelGraph m = build_from_config(arch, seed);
      finish_training(train(std::move(m), ds, cfg), out_path, stats_path, run);
    } else if (*insert_cmd) {
      RunManifest run("insert-cl");
      run.input_file("model", in_path);
      const CorrectionKind kind = parse_correction_kind(kind_name);
      run.param("kind", to_string(kind));
      run.param("position", position);
      ModelGraph m = insert_correction(load_checkpoint_file(in_path), kind, position);
      m.set_provenance(run.hash());
      save_checkpoint_file(m, out_path);
      std::cout << "inserted " << to_string(kind) << " correction after layer " << position
                << " (" << m.correction()->parameter_count() << " parameters)\n";
    } else if (*train_cl_cmd) {
      RunManifest run("train-cl");
      run.input_file("model", in_path);
      run.param("seed", seed);
      const SegmentDataset ds = cl_data.load(run);
      TrainConfig cfg = cl_flags.resolve(TrainConfig::cl_defaults(), seed);
      cfg.mode = TrainMode::cl_only;
      cfg.reuse_frozen_prefix = true;
      run.param("train", cfg.to_json());
      finish_training(train(load_checkpoint_file(in_path), ds, cfg), out_path, stats_path, run);
    } else if (*fold_cmd) {
      RunManifest run("fold-cl");
      run.input_file("model", in_path);
      ModelGraph m = fold_correction(load_checkpoint_file(in_path));
      m.set_provenance(run.hash());
      save_checkpoint_file(m, out_path);
      std::cout << "folded model has " << m.size() << " layers\n";
    } else if (*cost_cmd) {
      RunManifest run("estimate-cost");
      const nlohmann::json arch_cfg = resolve_architecture(arch_name);
      const CorrectionKind kind = parse_correction_kind(kind_name);
      run.param("architecture", arch_cfg);
      run.param("plan", plan_text);
      run.param("kind", to_string(kind));
      run.param("element_bytes", element_bytes);
      const ModelGraph arch = build_from_config(arch_cfg);
      CostReport report;
      if (plan_text == "sweep") {
        report = sweep(arch, kind, element_bytes, arch_name);
      } else {
        // A single plan: the reference row plus that plan.
        report = sweep(arch, kind, element_bytes, arch_name);
        const CostPlan plan = parse_plan(plan_text, kind);
        std::vector<CostRecord> keep;
        if (!plan.full) keep.push_back(report.at_position(plan.position));
        report.positions = std::move(keep);
      }
      const std::string csv = report.to_csv();
      if (out_path.empty()) {
        std::cout << csv;
      } else {
        write_text_file(out_path, csv);
      }
      if (!json_path.empty()) {
        nlohmann::json j = report.to_json();
        j["provenance"] = run.hash();
        write_json(json_path, j);
      } else if (!out_path.empty()) {
        nlohmann::json j = report.to_json();
        j["provenance"] = run.hash();
        write_json(out_path + ".json", j);
      }
    } else if (*sweep_cmd) {
      ExperimentManifest manifest = ExperimentManifest::load(manifest_file);
      if (!seeds_override.empty()) manifest.seeds = seeds_override;
      manifest.experiment.jobs = jobs;
      const ManifestSummary summary = run_manifest(manifest, fs::path(out_dir));
      write_json(fs::path(out_dir) / "manifest.resolved.json",
                 {{"manifest_hash", summary.manifest_hash}, {"manifest", manifest.to_json()}});
      std::cout << summary.to_markdown() << "\nsummary hash " << summary.hash() << "\n";
    } else if (*eval_cmd) {
      RunManifest run("evaluate");
      run.input_file("model", in_path);
      const ModelGraph m = load_checkpoint_file(in_path);
      const SegmentDataset ds = eval_data.load(run);
      if (ds.empty()) throw ArgumentError("evaluate: no segments selected");
      std::vector<Label> preds(ds.size());
      const std::size_t chunks = std::max<std::size_t>(1, std::min(jobs, ds.size()));
      parallel_for(chunks, jobs, [&](std::size_t c) {
        for (std::size_t i = c; i < ds.size(); i += chunks) {
          preds[i] = static_cast<Label>(argmax(forward(m, ds[i].signal).logits));
        }
      });
      std::vector<Label> labels;
      for (const auto& s : ds.segments()) labels.push_back(s.label);
      const F1Scores f1 = f1_per_class(preds, labels);
      const Confusion cm = confusion_matrix(preds, labels);
      nlohmann::json j{{"provenance", run.hash()},
                       {"run", run.json()},
                       {"segments", ds.size()},
                       {"f1", {{"N", f1.per_class[0]}, {"AF", f1.per_class[1]}}},
                       {"f1_undefined", {{"N", f1.undefined[0]}, {"AF", f1.undefined[1]}}},
                       {"macro_f1", f1.macro()},
                       {"confusion", cm.counts}};
      if (pca_layer) {
        std::vector<std::size_t> all(ds.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        const PcaResult pca = pca_project(pooled_features(m, ds, all, *pca_layer), 2);
        j["pca"] = {{"layer", *pca_layer},
                    {"explained_variance_ratio", pca.explained_variance_ratio},
                    {"zero_variance", pca.zero_variance}};
        if (!pca_out.empty()) {
          std::ostringstream dat;
          dat << dat_header(run.hash(), "pc1 pc2 label patient");
          for (std::size_t i = 0; i < ds.size(); ++i) {
            dat << pca.points[i][0] << ' ' << pca.points[i][1] << ' ' << to_string(ds[i].label)
                << ' ' << ds[i].patient_id << '\n';
          }
          write_text_file(pca_out, dat.str());
        }
      }
      if (out_path.empty()) {
        std::cout << j.dump(2) << "\n";
      } else {
        write_json(out_path, j);
      }
    } else if (*report_cmd) {
      const nlohmann::json j = load_json(in_path);
      const std::string prov = j.value("provenance", j.value("manifest_hash", std::string{}));
      fs::create_directories(out_dir);
      std::size_t written = 0;
      if (j.contains("reference") && j.contains("positions")) {
        std::ostringstream dat;
        dat << dat_header(prov, "position macs_norm mem_norm");
        for (const auto& p : j.at("positions")) {
          dat << p.at("position") << ' ' << p.at("macs_norm") << ' ' << p.at("mem_norm") << '\n';
        }
        write_text_file(fs::path(out_dir) / "cost.dat", dat.str());
        ++written;
      } else if (j.contains("arms") && j.contains("baselines")) {
        for (const auto& a : j.at("arms")) {
          std::ostringstream dat;
          dat << dat_header(prov, "position mean_f1 std_f1 delta_f1 macs_norm mem_norm");
          dat << "# td_baseline " << j.at("baselines").at("td").at("mean_f1") << " sd_baseline "
              << j.at("baselines").at("sd").at("mean_f1") << "\n";
          for (const auto& p : a.at("positions")) {
            const auto& q = p.at("qos");
            dat << p.at("position") << ' ' << q.at("mean_f1") << ' ' << q.at("std_f1") << ' '
                << q.at("delta_f1") << ' ' << p.at("macs_norm") << ' ' << p.at("mem_norm") << '\n';
          }
          const std::string name = "f1_" + a.at("kind").get<std::string>() + "_r" +
                                   std::to_string(a.at("sample_reduction").get<double>()) + ".dat";
          write_text_file(fs::path(out_dir) / name, dat.str());
          ++written;
        }
      } else if (j.contains("arms") && j.contains("seeds")) {
        std::ostringstream dat;
        dat << dat_header(prov, "seed sd_baseline td_baseline best_delta_f1 per arm");
        for (const auto& s : j.at("seeds")) {
          dat << s.at("seed") << ' ' << s.at("sd_baseline") << ' ' << s.at("td_baseline");
          for (const auto& a : s.at("arms")) dat << ' ' << a.at("best_delta_f1");
          dat << '\n';
        }
        write_text_file(fs::path(out_dir) / "seeds.dat", dat.str());
        ++written;
      } else {
        throw ConfigError("report: '" + in_path + "' is not a cost, experiment or summary report");
      }
      std::cout << "wrote " << written << " .dat file(s) to " << out_dir << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error [" << e.category() << "]: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error [internal]: " << e.what() << "\n";
    return kInternal;
  }
  return kOk;
}
