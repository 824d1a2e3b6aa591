// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cldg/tensor.hpp"

namespace cldg {

enum class Label : std::uint8_t { N = 0, AF = 1 };
inline constexpr std::size_t kNumClasses = 2;

std::string_view to_string(Label label);
/// Throws ArgumentError for anything other than "N" or "AF".
Label parse_label(std::string_view text);

struct Segment {
  Tensor signal;  // 1 x L
  Label label = Label::N;
  std::string patient_id;
  std::string record_id;
  std::string domain_tag;
};

struct LabelCounts {
  std::size_t n = 0;
  std::size_t af = 0;
  std::size_t total() const { return n + af; }
  std::size_t operator[](Label l) const { return l == Label::N ? n : af; }
};

/// Labeled fixed-length single-channel segments. Immutable once built.
class SegmentDataset {
 public:
  SegmentDataset() = default;
  SegmentDataset(std::vector<Segment> segments, double fs_hz);

  const std::vector<Segment>& segments() const noexcept { return segments_; }
  const Segment& operator[](std::size_t i) const { return segments_.at(i); }
  std::size_t size() const noexcept { return segments_.size(); }
  bool empty() const noexcept { return segments_.empty(); }
  std::size_t length() const noexcept { return length_; }
  double fs_hz() const noexcept { return fs_hz_; }

  /// Patient ids in sorted order.
  std::vector<std::string> patients() const;
  const std::vector<std::size_t>& indices_of_patient(const std::string& patient_id) const;
  std::vector<std::size_t> indices_of_label(Label label) const;
  LabelCounts label_counts() const;
  LabelCounts label_counts(std::span<const std::size_t> indices) const;
  LabelCounts patient_label_counts(const std::string& patient_id) const;

  /// New dataset holding the given segments in the given order.
  SegmentDataset subset(std::span<const std::size_t> indices) const;

  friend bool operator==(const SegmentDataset& a, const SegmentDataset& b);

 private:
  std::vector<Segment> segments_;
  double fs_hz_ = 250.0;
  std::size_t length_ = 0;
  std::map<std::string, std::vector<std::size_t>> by_patient_;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Parameters of the synthetic pseudo-ECG generator. Every patient draws its
/// own gain, polarity, baseline wander, noise level, heart rate and beat
/// morphology from these ranges; those draws are the inter-patient domain
/// shift.
struct DomainShiftConfig {
  double fs_hz = 250.0;
  std::size_t length = 1024;
  Range gain{0.5, 2.0};             // log-uniform
  double polarity_flip_prob = 0.0;
  Range wander_amplitude{0.0, 0.3};
  Range wander_frequency_hz{0.05, 0.5};
  Range noise_sigma{0.01, 0.06};
  Range heart_rate_bpm{55.0, 95.0};
  double normal_rr_cv = 0.03;
  Range af_rr_cv{0.15, 0.30};
  double af_rate_factor = 1.2;
  Range qrs_width_s{0.018, 0.035};
  Range p_amplitude{0.08, 0.25};
  Range t_amplitude{0.15, 0.45};
  Range f_wave_amplitude{0.02, 0.08};
  Range f_wave_frequency_hz{4.0, 8.0};
  /// Per-patient lead transfer: an odd-length FIR whose centre tap is 1 and
  /// whose other taps are N(0, spread^2). 0 taps disables it.
  std::size_t lead_filter_taps = 0;
  double lead_filter_spread = 0.0;
  /// Per-patient narrowband artifact (e.g. tremor), random phase per segment.
  Range artifact_amplitude{0.0, 0.0};
  Range artifact_frequency_hz{1.0, 1.0};
  /// Fraction of patients with exactly half of their segments labelled AF;
  /// the others draw their AF share from af_fraction.
  double balanced_patient_fraction = 0.5;
  Range af_fraction{0.2, 0.8};
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static DomainShiftConfig from_json(const nlohmann::json& j);
};

/// Deterministic in cfg (including cfg.seed). Samples are rounded to float
/// precision so a dataset survives the 32-bit signal file format exactly.
SegmentDataset generate_synthetic(const DomainShiftConfig& cfg, std::size_t n_patients,
                                  std::size_t segs_per_patient);

/// Writes <dir>/manifest.csv and <dir>/signals/<record_id>.f32.
std::filesystem::path save_dataset(const SegmentDataset& ds, const std::filesystem::path& dir);

/// Reads a manifest (header record_id,patient_id,label,path,fs_hz,length);
/// paths are relative to the manifest's directory. Non-fatal findings such
/// as an empty manifest are appended to `warnings`.
SegmentDataset load_dataset(const std::filesystem::path& manifest,
                            std::vector<std::string>* warnings = nullptr);

/// |#N - #AF| / max(#N, #AF) <= tolerance.
bool is_balanced(LabelCounts counts, double tolerance = 0.05);

struct DomainSplit {
  std::vector<std::string> td_patients;
  std::vector<std::size_t> sd_indices;
  std::vector<std::size_t> td_indices;
  LabelCounts td_counts;
};

/// Every group of `group_size` patients (1 or 2) whose combined label counts
/// are balanced becomes a target domain; the remaining patients form the
/// source domain. Groups are enumerated in lexicographic patient order.
std::vector<DomainSplit> select_balanced_td(const SegmentDataset& ds, std::size_t group_size);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Stratified k-fold over positions 0..labels.size()-1. Each class is
/// shuffled with the seed and dealt round-robin, so per-fold class counts
/// differ by at most one. Throws ConfigError if a class has fewer than k
/// members.
std::vector<Fold> stratified_kfold(std::span<const Label> labels, std::size_t k,
                                   std::uint64_t seed);

}  // namespace cldg
