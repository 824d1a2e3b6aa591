// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include "cldg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string_view>

#include "cldg/error.hpp"
#include "cldg/hashing.hpp"

namespace cldg {

namespace {

constexpr std::string_view kMagic = "CLDG";
constexpr std::size_t kPreamble = 12;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

double get_f64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return std::bit_cast<double>(v);
}

struct Parsed {
  nlohmann::json header;
  std::size_t payload_offset = 0;
};

Parsed parse_preamble(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size()) throw FormatError("truncated magic", bytes.size());
  for (std::size_t i = 0; i < kMagic.size(); ++i) {
    if (bytes[i] != static_cast<std::uint8_t>(kMagic[i])) throw FormatError("bad magic", i);
  }
  if (bytes.size() < 8) throw FormatError("truncated version", bytes.size());
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  if (bytes.size() < kPreamble) throw FormatError("truncated header length", bytes.size());
  const std::size_t hlen = get_u32(bytes, 8);
  if (bytes.size() - kPreamble < hlen) throw FormatError("truncated header", bytes.size());
  const auto* begin = reinterpret_cast<const char*>(bytes.data() + kPreamble);
  Parsed p;
  try {
    p.header = nlohmann::json::parse(std::string_view(begin, hlen));
  } catch (const nlohmann::json::parse_error& e) {
    // parse_error::byte is 1-based.
    throw FormatError(std::string("header is not valid JSON: ") + e.what(),
                      kPreamble + (e.byte > 0 ? e.byte - 1 : 0));
  }
  if (!p.header.is_object() || !p.header.contains("architecture")) {
    throw FormatError("header has no architecture", kPreamble);
  }
  p.payload_offset = kPreamble + hlen;
  return p;
}

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const ModelGraph& m) {
  nlohmann::json header{
      {"architecture", describe_architecture(m)},
      {"parameter_count", m.parameter_count()},
      {"provenance", m.provenance()},
  };
  if (const auto* cl = m.correction()) {
    header["correction"] = {{"kind", to_string(cl->kind)},
                            {"position", cl->position},
                            {"channels", cl->channels}};
  } else {
    header["correction"] = nullptr;
  }
  const std::string text = header.dump();
  std::vector<std::uint8_t> out;
  out.reserve(kPreamble + text.size() + 8 * m.parameter_count());
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& layer : m.layers()) {
    for (const Tensor* t : layer.parameter_tensors()) {
      for (double v : t->data()) put_f64(out, v);
    }
  }
  return out;
}

nlohmann::json read_checkpoint_header(std::span<const std::uint8_t> bytes) {
  return parse_preamble(bytes).header;
}

ModelGraph load_checkpoint(std::span<const std::uint8_t> bytes) {
  const Parsed p = parse_preamble(bytes);
  std::optional<ModelGraph> built;
  try {
    built.emplace(build_from_config(p.header.at("architecture")));
  } catch (const Error& e) {
    throw FormatError(std::string("header architecture rejected: ") + e.what(), kPreamble);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("header architecture malformed: ") + e.what(), kPreamble);
  }
  ModelGraph m = std::move(*built);
  const auto& jl = p.header.at("architecture").at("layers");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (const auto* cl = std::get_if<CorrectionLayer>(&m.layer(i).params)) {
      if (jl[i].contains("position") && jl[i].at("position").get<std::size_t>() != cl->position) {
        throw FormatError("correction position disagrees with its graph index", kPreamble);
      }
    }
  }
  const std::size_t expected = m.parameter_count() * 8;
  if (bytes.size() - p.payload_offset < expected) {
    throw FormatError("truncated parameter payload, expected " + std::to_string(expected) +
                          " bytes",
                      bytes.size());
  }
  if (bytes.size() - p.payload_offset > expected) {
    throw FormatError("trailing bytes after parameter payload", p.payload_offset + expected);
  }
  std::size_t at = p.payload_offset;
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (Tensor* t : m.layer(i).parameter_tensors()) {
      for (double& v : t->data()) {
        v = get_f64(bytes, at);
        at += 8;
      }
    }
  }
  m.set_provenance(p.header.value("provenance", std::string{}));
  return m;
}

void save_checkpoint_file(const ModelGraph& m, const std::filesystem::path& path) {
  const auto bytes = save_checkpoint(m);
  write_text_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

ModelGraph load_checkpoint_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  return load_checkpoint(
      std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace cldg
