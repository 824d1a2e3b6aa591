// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#include "cldg/architectures.hpp"

#include <fstream>
#include <utility>

#include "cldg/error.hpp"

namespace cldg {

namespace detail {
// Generated from configs/*.json at build time.
extern const std::vector<std::pair<std::string_view, std::string_view>> kShippedArchitectures;
}  // namespace detail

std::vector<std::string> shipped_architecture_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : detail::kShippedArchitectures) names.emplace_back(name);
  return names;
}

nlohmann::json shipped_architecture(std::string_view name) {
  for (const auto& [n, text] : detail::kShippedArchitectures) {
    if (n == name) return nlohmann::json::parse(text);
  }
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

nlohmann::json resolve_architecture(const std::string& name_or_path) {
  for (const auto& [n, text] : detail::kShippedArchitectures) {
    if (n == name_or_path) return nlohmann::json::parse(text);
  }
  std::ifstream in(name_or_path);
  if (!in) {
    throw ConfigError("'" + name_or_path + "' is neither a shipped architecture nor a readable file");
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("architecture file '" + name_or_path + "': " + e.what());
  }
}

}  // namespace cldg
