// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "cldg/model.hpp"

namespace cldg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: "CLDG", u32 LE version, u32 LE header length, JSON header, then
/// every parameter tensor (layer order, weights before bias) as LE f64.
std::vector<std::uint8_t> save_checkpoint(const ModelGraph& m);

/// Throws FormatError carrying the offending byte offset.
ModelGraph load_checkpoint(std::span<const std::uint8_t> bytes);

/// Parses only the JSON header.
nlohmann::json read_checkpoint_header(std::span<const std::uint8_t> bytes);

void save_checkpoint_file(const ModelGraph& m, const std::filesystem::path& path);
ModelGraph load_checkpoint_file(const std::filesystem::path& path);

}  // namespace cldg
