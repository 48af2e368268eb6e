// Copyright 2026 The sfod Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sfod {

/// Invalid user-supplied configuration (bad key, out-of-range value, bad template).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(what), key_(std::move(key)) {}
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// File-system or format failure while reading/writing artifacts.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Contract violation on in-memory data (shape mismatch, out-of-range id, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sfod
