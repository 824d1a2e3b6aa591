// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cldg/data.hpp"
#include "cldg/error.hpp"
#include "split_properties.hpp"

namespace cldg {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / name) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

DomainShiftConfig small_config(std::uint64_t seed) {
  DomainShiftConfig c;
  c.length = 256;
  c.seed = seed;
  return c;
}

DomainShiftConfig benchmark_data_config() {
  std::ifstream in(std::string(CLDG_SOURCE_DIR) + "/configs/benchmark/data.json");
  return DomainShiftConfig::from_json(nlohmann::json::parse(in));
}

TEST(Generator, SameSeedSameDataset) {
  const auto a = generate_synthetic(small_config(3), 4, 5);
  const auto b = generate_synthetic(small_config(3), 4, 5);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(a == generate_synthetic(small_config(4), 4, 5));
  EXPECT_EQ(a.size(), 20u);
  EXPECT_EQ(a.patients().size(), 4u);
  EXPECT_THROW(generate_synthetic(small_config(3), 0, 5), ArgumentError);
}

TEST(Generator, ConfigJsonRoundTripAndValidation) {
  DomainShiftConfig c = benchmark_data_config();
  EXPECT_EQ(DomainShiftConfig::from_json(c.to_json()).to_json(), c.to_json());
  c.lead_filter_taps = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c = DomainShiftConfig{};
  c.gain = {2.0, 1.0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = DomainShiftConfig{};
  c.polarity_flip_prob = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

/// R-peak times of a clean signal: local maxima above 60 % of the segment
/// maximum, at least 0.25 s apart.
std::vector<double> r_peaks(const Tensor& x, double fs) {
  double top = 0.0;
  for (double v : x.data()) top = std::max(top, v);
  std::vector<double> peaks;
  for (std::size_t i = 1; i + 1 < x.numel(); ++i) {
    if (x[i] < 0.6 * top || x[i] < x[i - 1] || x[i] < x[i + 1]) continue;
    const double t = static_cast<double>(i) / fs;
    if (!peaks.empty() && t - peaks.back() < 0.25) continue;
    peaks.push_back(t);
  }
  return peaks;
}

TEST(Generator, AfHasMoreIrregularRhythm) {
  DomainShiftConfig c;
  c.noise_sigma = {0.0, 0.0};
  c.wander_amplitude = {0.0, 0.0};
  c.f_wave_amplitude = {0.0, 0.0};
  c.length = 2500;
  c.seed = 17;
  const auto ds = generate_synthetic(c, 6, 10);
  double cv_sum[2] = {0, 0};
  int cv_n[2] = {0, 0};
  for (const auto& s : ds.segments()) {
    const auto peaks = r_peaks(s.signal, c.fs_hz);
    if (peaks.size() < 4) continue;
    std::vector<double> rr;
    for (std::size_t i = 1; i < peaks.size(); ++i) rr.push_back(peaks[i] - peaks[i - 1]);
    double mean = 0.0, var = 0.0;
    for (double r : rr) mean += r;
    mean /= static_cast<double>(rr.size());
    for (double r : rr) var += (r - mean) * (r - mean);
    const auto k = static_cast<std::size_t>(s.label);
    cv_sum[k] += std::sqrt(var / static_cast<double>(rr.size() - 1)) / mean;
    ++cv_n[k];
  }
  ASSERT_GT(cv_n[0], 10);
  ASSERT_GT(cv_n[1], 10);
  EXPECT_GT(cv_sum[1] / cv_n[1], cv_sum[0] / cv_n[0]);
}

double mean_abs(const SegmentDataset& ds) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& seg : ds.segments()) {
    for (double v : seg.signal.data()) s += std::abs(v);
    n += seg.signal.numel();
  }
  return s / static_cast<double>(n);
}

TEST(Generator, DisjointGainRangesGiveDifferentAmplitudes) {
  DomainShiftConfig low = small_config(5), high = small_config(5);
  low.gain = {0.5, 0.6};
  high.gain = {2.0, 2.2};
  EXPECT_LT(mean_abs(generate_synthetic(low, 1, 10)) * 2.0, mean_abs(generate_synthetic(high, 1, 10)));
}

TEST(Dataset, SaveLoadRoundTrip) {
  TempDir dir("cldg_data_roundtrip");
  const auto ds = generate_synthetic(small_config(8), 3, 4);
  const auto manifest = save_dataset(ds, dir.path());
  std::vector<std::string> warnings;
  EXPECT_EQ(load_dataset(manifest, &warnings), ds);
  EXPECT_TRUE(warnings.empty());
}

TEST(Dataset, IngestionErrorsNameTheRecord) {
  TempDir dir("cldg_data_errors");
  const auto ds = generate_synthetic(small_config(9), 1, 2);
  const auto manifest = save_dataset(ds, dir.path());
  std::ifstream in(manifest);
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  in.close();
  auto write = [&](const std::string& body) {
    std::ofstream out(manifest, std::ios::trunc);
    out << header << "\n" << body << "\n";
  };
  auto record_of = [&]() -> std::string {
    try {
      load_dataset(manifest);
    } catch (const IngestionError& e) {
      return e.record_id();
    }
    return "<none>";
  };
  const std::string rid = row1.substr(0, row1.find(','));

  std::string bad = row1;
  bad.replace(bad.find(",N,") != std::string::npos ? bad.find(",N,") : bad.find(",AF,"),
              bad.find(",N,") != std::string::npos ? 3 : 4, ",X,");
  write(bad);
  EXPECT_EQ(record_of(), rid);

  bad = row1;
  bad.replace(bad.rfind(',') + 1, std::string::npos, "999");
  write(bad);
  EXPECT_EQ(record_of(), rid);

  fs::remove(dir.path() / "signals" / (rid + ".f32"));
  write(row1);
  EXPECT_EQ(record_of(), rid);

  EXPECT_THROW(load_dataset(dir.path() / "nope.csv"), IngestionError);
}

TEST(Dataset, EmptyManifestWarns) {
  TempDir dir("cldg_data_empty");
  {
    std::ofstream out(dir.path() / "manifest.csv");
    out << "record_id,patient_id,label,path,fs_hz,length\n";
  }
  std::vector<std::string> warnings;
  EXPECT_TRUE(load_dataset(dir.path() / "manifest.csv", &warnings).empty());
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(Dataset, IndexesPartitionByPatient) {
  const auto ds = generate_synthetic(small_config(10), 5, 7);
  std::size_t total = 0;
  for (const auto& p : ds.patients()) {
    for (std::size_t i : ds.indices_of_patient(p)) EXPECT_EQ(ds[i].patient_id, p);
    total += ds.indices_of_patient(p).size();
  }
  EXPECT_EQ(total, ds.size());
  EXPECT_THROW(ds.indices_of_patient("nobody"), ArgumentError);
  EXPECT_THROW(parse_label("X"), ArgumentError);
}

TEST(BalancedTd, FootnoteRule) {
  EXPECT_TRUE(is_balanced({10, 10}));
  EXPECT_FALSE(is_balanced({10, 9}));
  EXPECT_TRUE(is_balanced({20, 19}));
  EXPECT_FALSE(is_balanced({0, 0}));
  const auto ds = oracle::counts_dataset({{10, 10}, {10, 9}, {12, 8}, {8, 12}});
  const auto singles = select_balanced_td(ds, 1);
  ASSERT_EQ(singles.size(), 1u);
  EXPECT_EQ(singles[0].td_patients, std::vector<std::string>{"p00"});
  const auto pairs = select_balanced_td(ds, 2);
  bool found = false;
  for (const auto& s : pairs) found = found || s.td_patients == std::vector<std::string>{"p02", "p03"};
  EXPECT_TRUE(found);
  EXPECT_THROW(select_balanced_td(ds, 3), ArgumentError);
}

TEST(BalancedTd, ShippedBenchmarkSetHasEnoughSplits) {
  const auto ds = generate_synthetic(benchmark_data_config(), 12, 40);
  EXPECT_GE(select_balanced_td(ds, 1).size(), 5u);
}

TEST(StratifiedKFold, CountsAndErrors) {
  std::vector<Label> labels(100, Label::N);
  std::fill(labels.begin() + 50, labels.end(), Label::AF);
  const auto folds = stratified_kfold(labels, 5, 1);
  for (const auto& f : folds) {
    std::size_t af = 0;
    for (std::size_t i : f.val) af += labels[i] == Label::AF;
    EXPECT_EQ(f.val.size(), 20u);
    EXPECT_EQ(af, 10u);
  }
  std::vector<Label> uneven(100, Label::N);
  std::fill(uneven.begin() + 49, uneven.end(), Label::AF);
  for (const auto& f : stratified_kfold(uneven, 5, 2)) {
    std::size_t n = 0;
    for (std::size_t i : f.val) n += uneven[i] == Label::N;
    EXPECT_GE(n, 9u);
    EXPECT_LE(n, 10u);
  }
  EXPECT_EQ(stratified_kfold(labels, 5, 3)[0].val, stratified_kfold(labels, 5, 3)[0].val);
  std::vector<Label> small{Label::N, Label::N, Label::N, Label::AF, Label::AF, Label::AF};
  EXPECT_THROW(stratified_kfold(small, 5, 1), ConfigError);
}

TEST(SplitProtocol, RandomScenariosSatisfyInvariants) {
  Rng rng(2024);
  for (int n = 0; n < 300; ++n) {
    const auto violation = oracle::check_split_scenario(rng);
    ASSERT_FALSE(violation.has_value()) << "scenario " << n << ": " << *violation;
  }
}

}  // namespace
}  // namespace cldg
