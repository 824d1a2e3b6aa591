// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cldg {

/// Names of the architecture configs compiled into the library
/// (loh2022_standin, lu2021_standin, parmar_standin). They are configurable
/// stand-ins for three architecture families, not replicas.
std::vector<std::string> shipped_architecture_names();

/// Throws ConfigError for an unknown name.
nlohmann::json shipped_architecture(std::string_view name);

/// A shipped name, or else a path to an architecture JSON file.
nlohmann::json resolve_architecture(const std::string& name_or_path);

}  // namespace cldg
