// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The cldg Authors

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cldg {

/// Base class of every error thrown by the library. The category string is
/// what the CLI prints in front of the message.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io", what) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what) : Error("argument", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

/// Training diverged or a decomposition failed.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric", what) {}
};

class UnsupportedFoldError : public Error {
 public:
  explicit UnsupportedFoldError(const std::string& what)
      : Error("unsupported-fold", what) {}
};

/// Malformed checkpoint bytes. offset() is the byte position at which
/// decoding gave up.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error("format", what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class IngestionError : public Error {
 public:
  IngestionError(const std::string& record_id, const std::string& what)
      : Error("ingestion", "record '" + record_id + "': " + what), record_id_(record_id) {}
  const std::string& record_id() const noexcept { return record_id_; }

 private:
  std::string record_id_;
};

}  // namespace cldg
