// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include "cldg/data.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cldg/error.hpp"
#include "cldg/rng.hpp"

namespace cldg {

static_assert(std::endian::native == std::endian::little,
              "signal files are little-endian; big-endian hosts need byte swapping");

std::string_view to_string(Label label) { return label == Label::N ? "N" : "AF"; }

Label parse_label(std::string_view text) {
  if (text == "N") return Label::N;
  if (text == "AF") return Label::AF;
  throw ArgumentError("unknown label '" + std::string(text) + "' (expected N or AF)");
}

// ---------------------------------------------------------------------------
// SegmentDataset

SegmentDataset::SegmentDataset(std::vector<Segment> segments, double fs_hz)
    : segments_(std::move(segments)), fs_hz_(fs_hz) {
  if (!(fs_hz_ > 0.0)) throw ArgumentError("sampling rate must be positive");
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& s = segments_[i];
    if (s.signal.rank() != 2 || s.signal.dim(0) != 1) {
      throw IngestionError(s.record_id, "signal must be 1 x L, got " +
                                            shape_to_string(s.signal.shape()));
    }
    if (i == 0) length_ = s.signal.dim(1);
    if (s.signal.dim(1) != length_) {
      throw IngestionError(s.record_id, "length " + std::to_string(s.signal.dim(1)) +
                                            " differs from dataset length " +
                                            std::to_string(length_));
    }
    for (double v : s.signal.data()) {
      if (!std::isfinite(v)) throw IngestionError(s.record_id, "non-finite sample");
    }
    by_patient_[s.patient_id].push_back(i);
  }
}

std::vector<std::string> SegmentDataset::patients() const {
  std::vector<std::string> out;
  out.reserve(by_patient_.size());
  for (const auto& [pid, _] : by_patient_) out.push_back(pid);
  return out;
}

const std::vector<std::size_t>& SegmentDataset::indices_of_patient(
    const std::string& patient_id) const {
  const auto it = by_patient_.find(patient_id);
  if (it == by_patient_.end()) throw ArgumentError("unknown patient '" + patient_id + "'");
  return it->second;
}

std::vector<std::size_t> SegmentDataset::indices_of_label(Label label) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].label == label) out.push_back(i);
  }
  return out;
}

LabelCounts SegmentDataset::label_counts(std::span<const std::size_t> indices) const {
  LabelCounts c;
  for (std::size_t i : indices) (segments_.at(i).label == Label::N ? c.n : c.af)++;
  return c;
}

LabelCounts SegmentDataset::label_counts() const {
  LabelCounts c;
  for (const auto& s : segments_) (s.label == Label::N ? c.n : c.af)++;
  return c;
}

LabelCounts SegmentDataset::patient_label_counts(const std::string& patient_id) const {
  return label_counts(indices_of_patient(patient_id));
}

SegmentDataset SegmentDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Segment> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(segments_.at(i));
  return SegmentDataset(std::move(out), fs_hz_);
}

bool operator==(const SegmentDataset& a, const SegmentDataset& b) {
  if (a.fs_hz_ != b.fs_hz_ || a.segments_.size() != b.segments_.size()) return false;
  for (std::size_t i = 0; i < a.segments_.size(); ++i) {
    const Segment& x = a.segments_[i];
    const Segment& y = b.segments_[i];
    if (!(x.signal == y.signal) || x.label != y.label || x.patient_id != y.patient_id ||
        x.record_id != y.record_id || x.domain_tag != y.domain_tag) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// DomainShiftConfig

namespace {

void check_range(const Range& r, const char* name, bool positive = false) {
  if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
    throw ConfigError(std::string("domain shift range '") + name + "' is empty");
  }
  if (positive && r.lo <= 0.0) {
    throw ConfigError(std::string("domain shift range '") + name + "' must be positive");
  }
  if (r.lo < 0.0) throw ConfigError(std::string("domain shift range '") + name + "' is negative");
}

nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

Range range_from(const nlohmann::json& j, const char* key, Range fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) {
    throw ConfigError(std::string("domain shift '") + key + "' must be a [lo, hi] pair");
  }
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

void DomainShiftConfig::validate() const {
  if (!(fs_hz > 0.0) || length == 0) throw ConfigError("fs_hz and length must be positive");
  check_range(gain, "gain", true);
  check_range(wander_amplitude, "wander_amplitude");
  check_range(wander_frequency_hz, "wander_frequency_hz");
  check_range(noise_sigma, "noise_sigma");
  check_range(heart_rate_bpm, "heart_rate_bpm", true);
  check_range(af_rr_cv, "af_rr_cv");
  check_range(qrs_width_s, "qrs_width_s", true);
  check_range(p_amplitude, "p_amplitude");
  check_range(t_amplitude, "t_amplitude");
  check_range(f_wave_amplitude, "f_wave_amplitude");
  check_range(f_wave_frequency_hz, "f_wave_frequency_hz", true);
  check_range(af_fraction, "af_fraction");
  if (af_fraction.hi > 1.0) throw ConfigError("af_fraction must lie in [0, 1]");
  check_range(artifact_amplitude, "artifact_amplitude");
  check_range(artifact_frequency_hz, "artifact_frequency_hz", true);
  if (lead_filter_taps != 0 && lead_filter_taps % 2 == 0) {
    throw ConfigError("lead_filter_taps must be odd (or 0)");
  }
  if (lead_filter_spread < 0.0) throw ConfigError("lead_filter_spread must be >= 0");
  if (polarity_flip_prob < 0.0 || polarity_flip_prob > 1.0 || balanced_patient_fraction < 0.0 ||
      balanced_patient_fraction > 1.0) {
    throw ConfigError("probabilities must lie in [0, 1]");
  }
  if (normal_rr_cv < 0.0 || !(af_rate_factor > 0.0)) {
    throw ConfigError("normal_rr_cv must be >= 0 and af_rate_factor > 0");
  }
}

nlohmann::json DomainShiftConfig::to_json() const {
  return {
      {"fs_hz", fs_hz},
      {"length", length},
      {"gain", range_json(gain)},
      {"polarity_flip_prob", polarity_flip_prob},
      {"wander_amplitude", range_json(wander_amplitude)},
      {"wander_frequency_hz", range_json(wander_frequency_hz)},
      {"noise_sigma", range_json(noise_sigma)},
      {"heart_rate_bpm", range_json(heart_rate_bpm)},
      {"normal_rr_cv", normal_rr_cv},
      {"af_rr_cv", range_json(af_rr_cv)},
      {"af_rate_factor", af_rate_factor},
      {"qrs_width_s", range_json(qrs_width_s)},
      {"p_amplitude", range_json(p_amplitude)},
      {"t_amplitude", range_json(t_amplitude)},
      {"f_wave_amplitude", range_json(f_wave_amplitude)},
      {"f_wave_frequency_hz", range_json(f_wave_frequency_hz)},
      {"lead_filter_taps", lead_filter_taps},
      {"lead_filter_spread", lead_filter_spread},
      {"artifact_amplitude", range_json(artifact_amplitude)},
      {"artifact_frequency_hz", range_json(artifact_frequency_hz)},
      {"balanced_patient_fraction", balanced_patient_fraction},
      {"af_fraction", range_json(af_fraction)},
      {"seed", seed},
  };
}

DomainShiftConfig DomainShiftConfig::from_json(const nlohmann::json& j) {
  DomainShiftConfig c;
  c.fs_hz = j.value("fs_hz", c.fs_hz);
  c.length = j.value("length", c.length);
  c.gain = range_from(j, "gain", c.gain);
  c.polarity_flip_prob = j.value("polarity_flip_prob", c.polarity_flip_prob);
  c.wander_amplitude = range_from(j, "wander_amplitude", c.wander_amplitude);
  c.wander_frequency_hz = range_from(j, "wander_frequency_hz", c.wander_frequency_hz);
  c.noise_sigma = range_from(j, "noise_sigma", c.noise_sigma);
  c.heart_rate_bpm = range_from(j, "heart_rate_bpm", c.heart_rate_bpm);
  c.normal_rr_cv = j.value("normal_rr_cv", c.normal_rr_cv);
  c.af_rr_cv = range_from(j, "af_rr_cv", c.af_rr_cv);
  c.af_rate_factor = j.value("af_rate_factor", c.af_rate_factor);
  c.qrs_width_s = range_from(j, "qrs_width_s", c.qrs_width_s);
  c.p_amplitude = range_from(j, "p_amplitude", c.p_amplitude);
  c.t_amplitude = range_from(j, "t_amplitude", c.t_amplitude);
  c.f_wave_amplitude = range_from(j, "f_wave_amplitude", c.f_wave_amplitude);
  c.f_wave_frequency_hz = range_from(j, "f_wave_frequency_hz", c.f_wave_frequency_hz);
  c.lead_filter_taps = j.value("lead_filter_taps", c.lead_filter_taps);
  c.lead_filter_spread = j.value("lead_filter_spread", c.lead_filter_spread);
  c.artifact_amplitude = range_from(j, "artifact_amplitude", c.artifact_amplitude);
  c.artifact_frequency_hz = range_from(j, "artifact_frequency_hz", c.artifact_frequency_hz);
  c.balanced_patient_fraction = j.value("balanced_patient_fraction", c.balanced_patient_fraction);
  c.af_fraction = range_from(j, "af_fraction", c.af_fraction);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

struct PatientProfile {
  double gain;
  double polarity;
  double wander_amp;
  double wander_freq;
  double noise_sigma;
  double rr_mean;
  double af_rr_cv;
  double qrs_sigma;
  double p_amp;
  double t_amp;
  double f_amp;
  double f_freq;
  std::size_t af_count;
  std::vector<double> lead_filter;
  double artifact_amp;
  double artifact_freq;
};

double gaussian_bump(double t, double centre, double sigma) {
  const double z = (t - centre) / sigma;
  return std::exp(-0.5 * z * z);
}

PatientProfile draw_profile(const DomainShiftConfig& cfg, std::size_t segs, Rng& rng) {
  PatientProfile p{};
  p.gain = std::exp(rng.uniform(std::log(cfg.gain.lo), std::log(cfg.gain.hi)));
  p.polarity = rng.bernoulli(cfg.polarity_flip_prob) ? -1.0 : 1.0;
  p.wander_amp = rng.uniform(cfg.wander_amplitude.lo, cfg.wander_amplitude.hi);
  p.wander_freq = rng.uniform(cfg.wander_frequency_hz.lo, cfg.wander_frequency_hz.hi);
  p.noise_sigma = rng.uniform(cfg.noise_sigma.lo, cfg.noise_sigma.hi);
  p.rr_mean = 60.0 / rng.uniform(cfg.heart_rate_bpm.lo, cfg.heart_rate_bpm.hi);
  p.af_rr_cv = rng.uniform(cfg.af_rr_cv.lo, cfg.af_rr_cv.hi);
  p.qrs_sigma = rng.uniform(cfg.qrs_width_s.lo, cfg.qrs_width_s.hi) / 2.0;
  p.p_amp = rng.uniform(cfg.p_amplitude.lo, cfg.p_amplitude.hi);
  p.t_amp = rng.uniform(cfg.t_amplitude.lo, cfg.t_amplitude.hi);
  p.f_amp = rng.uniform(cfg.f_wave_amplitude.lo, cfg.f_wave_amplitude.hi);
  p.f_freq = rng.uniform(cfg.f_wave_frequency_hz.lo, cfg.f_wave_frequency_hz.hi);
  if (rng.bernoulli(cfg.balanced_patient_fraction)) {
    p.af_count = segs / 2;
  } else {
    const double frac = rng.uniform(cfg.af_fraction.lo, cfg.af_fraction.hi);
    p.af_count = static_cast<std::size_t>(std::lround(frac * static_cast<double>(segs)));
  }
  // Drawn last so that configs without these shifts keep their streams.
  if (cfg.lead_filter_taps > 0) {
    p.lead_filter.assign(cfg.lead_filter_taps, 0.0);
    for (double& h : p.lead_filter) h = cfg.lead_filter_spread * rng.normal();
    p.lead_filter[cfg.lead_filter_taps / 2] = 1.0;
  }
  if (cfg.artifact_amplitude.hi > 0.0) {
    p.artifact_amp = rng.uniform(cfg.artifact_amplitude.lo, cfg.artifact_amplitude.hi);
    p.artifact_freq = rng.uniform(cfg.artifact_frequency_hz.lo, cfg.artifact_frequency_hz.hi);
  }
  return p;
}

std::vector<double> synth_segment(const DomainShiftConfig& cfg, const PatientProfile& p,
                                  bool af, Rng& rng) {
  const std::size_t n = cfg.length;
  const double fs = cfg.fs_hz;
  const double duration = static_cast<double>(n) / fs;
  std::vector<double> ecg(n, 0.0);

  const double rr_mean = af ? p.rr_mean / cfg.af_rate_factor : p.rr_mean;
  const double rr_cv = af ? p.af_rr_cv : cfg.normal_rr_cv;
  auto next_rr = [&] {
    return std::clamp(rr_mean * (1.0 + rr_cv * rng.normal()), 0.3, 2.0);
  };

  double beat = -rng.uniform() * rr_mean;
  while (beat < duration + 0.5) {
    const std::size_t lo = static_cast<std::size_t>(std::max(0.0, (beat - 0.35) * fs));
    const std::size_t hi =
        std::min(n, static_cast<std::size_t>(std::max(0.0, (beat + 0.6) * fs)) + 1);
    for (std::size_t i = lo; i < hi; ++i) {
      const double t = static_cast<double>(i) / fs;
      double v = gaussian_bump(t, beat, p.qrs_sigma) -
                 0.12 * gaussian_bump(t, beat - 2.2 * p.qrs_sigma, p.qrs_sigma * 0.7) -
                 0.22 * gaussian_bump(t, beat + 2.2 * p.qrs_sigma, p.qrs_sigma * 0.8) +
                 p.t_amp * gaussian_bump(t, beat + 0.28, 0.055);
      if (!af) v += p.p_amp * gaussian_bump(t, beat - 0.17, 0.025);
      ecg[i] += v;
    }
    beat += next_rr();
  }

  if (af) {
    const double phase1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double phase2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double f = p.f_freq * (1.0 + 0.1 * rng.normal());
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      ecg[i] += p.f_amp * (std::sin(2.0 * std::numbers::pi * f * t + phase1) +
                           0.5 * std::sin(2.0 * std::numbers::pi * 1.7 * f * t + phase2));
    }
  }

  if (!p.lead_filter.empty()) {
    // Centred FIR with zero padding at the edges.
    const std::size_t half = p.lead_filter.size() / 2;
    std::vector<double> filtered(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p.lead_filter.size(); ++k) {
        if (i + k < half || i + k - half >= n) continue;
        acc += p.lead_filter[k] * ecg[i + k - half];
      }
      filtered[i] = acc;
    }
    ecg = std::move(filtered);
  }

  const double wander_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double artifact_phase =
      p.artifact_amp > 0.0 ? rng.uniform(0.0, 2.0 * std::numbers::pi) : 0.0;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double wander =
        p.wander_amp * std::sin(2.0 * std::numbers::pi * p.wander_freq * t + wander_phase);
    const double artifact =
        p.artifact_amp * std::sin(2.0 * std::numbers::pi * p.artifact_freq * t + artifact_phase);
    const double v =
        p.polarity * p.gain * ecg[i] + wander + artifact + p.noise_sigma * rng.normal();
    out[i] = static_cast<double>(static_cast<float>(v));
  }
  return out;
}

std::string zero_padded(std::size_t value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

}  // namespace

SegmentDataset generate_synthetic(const DomainShiftConfig& cfg, std::size_t n_patients,
                                  std::size_t segs_per_patient) {
  cfg.validate();
  if (n_patients == 0 || segs_per_patient == 0) {
    throw ArgumentError("generate_synthetic: patient and segment counts must be >= 1");
  }
  std::vector<Segment> segments;
  segments.reserve(n_patients * segs_per_patient);
  for (std::size_t pi = 0; pi < n_patients; ++pi) {
    Rng rng = Rng::derive(cfg.seed, pi + 1);
    const PatientProfile profile = draw_profile(cfg, segs_per_patient, rng);
    std::vector<Label> labels(segs_per_patient, Label::N);
    std::fill_n(labels.begin(), profile.af_count, Label::AF);
    rng.shuffle(std::span<Label>(labels));

    const std::string patient_id = "p" + zero_padded(pi + 1, 2);
    for (std::size_t si = 0; si < segs_per_patient; ++si) {
      Segment s;
      s.label = labels[si];
      s.signal = Tensor({1, cfg.length}, synth_segment(cfg, profile, s.label == Label::AF, rng));
      s.patient_id = patient_id;
      s.record_id = patient_id + "_s" + zero_padded(si, 3);
      s.domain_tag = patient_id;
      segments.push_back(std::move(s));
    }
  }
  return SegmentDataset(std::move(segments), cfg.fs_hz);
}

// ---------------------------------------------------------------------------
// Manifest I/O

namespace {

constexpr std::string_view kManifestHeader = "record_id,patient_id,label,path,fs_hz,length";

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::filesystem::path save_dataset(const SegmentDataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "signals");
  const fs::path manifest = dir / "manifest.csv";
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw IoError("cannot write " + manifest.string());
  out << kManifestHeader << "\n";
  for (const Segment& s : ds.segments()) {
    const fs::path rel = fs::path("signals") / (s.record_id + ".f32");
    std::vector<float> samples(s.signal.numel());
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = static_cast<float>(s.signal[i]);
    std::ofstream sig(dir / rel, std::ios::binary);
    sig.write(reinterpret_cast<const char*>(samples.data()),
              static_cast<std::streamsize>(samples.size() * sizeof(float)));
    if (!sig) throw IoError("failed to write signal file for record " + s.record_id);
    out << s.record_id << ',' << s.patient_id << ',' << to_string(s.label) << ','
        << rel.generic_string() << ',' << format_double(ds.fs_hz()) << ','
        << s.signal.numel() << "\n";
  }
  if (!out) throw IoError("failed writing " + manifest.string());
  return manifest;
}

SegmentDataset load_dataset(const std::filesystem::path& manifest,
                            std::vector<std::string>* warnings) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest);
  if (!in) throw IngestionError("<manifest>", "cannot open " + manifest.string());
  std::string line;
  if (!std::getline(in, line)) line.clear();
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) {
    throw IngestionError("<manifest>", "bad header '" + line + "', expected '" +
                                           std::string(kManifestHeader) + "'");
  }
  const fs::path base = manifest.parent_path();
  std::vector<Segment> segments;
  double fs_hz = 0.0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cols = split_csv(line);
    const std::string rid = cols.empty() ? "<line " + std::to_string(line_no) + ">" : cols[0];
    if (cols.size() != 6) throw IngestionError(rid, "expected 6 columns, got " + std::to_string(cols.size()));

    Segment s;
    s.record_id = cols[0];
    s.patient_id = cols[1];
    s.domain_tag = cols[1];
    try {
      s.label = parse_label(cols[2]);
    } catch (const ArgumentError& e) {
      throw IngestionError(rid, e.what());
    }
    double row_fs = 0.0;
    std::size_t length = 0;
    {
      const auto r1 = std::from_chars(cols[4].data(), cols[4].data() + cols[4].size(), row_fs);
      const auto r2 = std::from_chars(cols[5].data(), cols[5].data() + cols[5].size(), length);
      if (r1.ec != std::errc{} || r2.ec != std::errc{} || !(row_fs > 0.0) || length == 0) {
        throw IngestionError(rid, "fs_hz and length must be positive numbers");
      }
    }
    if (fs_hz == 0.0) fs_hz = row_fs;
    if (row_fs != fs_hz) throw IngestionError(rid, "sampling rate differs from earlier records");

    const fs::path path = base / cols[3];
    std::ifstream sig(path, std::ios::binary);
    if (!sig) throw IngestionError(rid, "missing signal file " + path.string());
    std::vector<float> samples(length);
    sig.read(reinterpret_cast<char*>(samples.data()),
             static_cast<std::streamsize>(length * sizeof(float)));
    if (sig.gcount() != static_cast<std::streamsize>(length * sizeof(float)) ||
        sig.peek() != std::char_traits<char>::eof()) {
      throw IngestionError(rid, "signal file " + path.string() + " does not hold exactly " +
                                    std::to_string(length) + " float32 samples");
    }
    std::vector<double> data(samples.begin(), samples.end());
    s.signal = Tensor({1, length}, std::move(data));
    segments.push_back(std::move(s));
  }
  if (segments.empty()) {
    if (warnings) warnings->push_back("manifest " + manifest.string() + " lists no records");
    return SegmentDataset({}, 250.0);
  }
  return SegmentDataset(std::move(segments), fs_hz);
}

// ---------------------------------------------------------------------------
// Split protocol

bool is_balanced(LabelCounts counts, double tolerance) {
  const std::size_t hi = std::max(counts.n, counts.af);
  if (hi == 0) return false;
  const std::size_t lo = std::min(counts.n, counts.af);
  return static_cast<double>(hi - lo) <= tolerance * static_cast<double>(hi);
}

std::vector<DomainSplit> select_balanced_td(const SegmentDataset& ds, std::size_t group_size) {
  if (group_size != 1 && group_size != 2) {
    throw ArgumentError("select_balanced_td: group_size must be 1 or 2");
  }
  const auto patients = ds.patients();
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t a = 0; a < patients.size(); ++a) {
    if (group_size == 1) {
      groups.push_back({a});
    } else {
      for (std::size_t b = a + 1; b < patients.size(); ++b) groups.push_back({a, b});
    }
  }
  std::vector<DomainSplit> out;
  for (const auto& group : groups) {
    DomainSplit split;
    std::vector<bool> in_td(patients.size(), false);
    for (std::size_t g : group) {
      in_td[g] = true;
      split.td_patients.push_back(patients[g]);
    }
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& pid = ds[i].patient_id;
      const auto pos = static_cast<std::size_t>(
          std::lower_bound(patients.begin(), patients.end(), pid) - patients.begin());
      (in_td[pos] ? split.td_indices : split.sd_indices).push_back(i);
    }
    split.td_counts = ds.label_counts(split.td_indices);
    if (is_balanced(split.td_counts)) out.push_back(std::move(split));
  }
  return out;
}

std::vector<Fold> stratified_kfold(std::span<const Label> labels, std::size_t k,
                                   std::uint64_t seed) {
  if (k < 2) throw ConfigError("stratified_kfold: k must be at least 2");
  std::vector<std::vector<std::size_t>> by_class(kNumClasses);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (by_class[c].size() < k) {
      throw ConfigError("stratified_kfold: class " + std::string(to_string(static_cast<Label>(c))) +
                        " has " + std::to_string(by_class[c].size()) + " segments, fewer than k=" +
                        std::to_string(k));
    }
  }
  Rng rng = Rng::derive(seed, 0x6b66);
  std::vector<std::vector<std::size_t>> val(k);
  std::size_t next_fold = 0;
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) {
      val[next_fold].push_back(idx);
      next_fold = (next_fold + 1) % k;
    }
  }
  std::vector<Fold> folds(k);
  for (std::size_t f = 0; f < k; ++f) {
    std::sort(val[f].begin(), val[f].end());
    folds[f].val = val[f];
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), val[g].begin(), val[g].end());
    }
    std::sort(folds[f].train.begin(), folds[f].train.end());
  }
  return folds;
}

}  // namespace cldg
