// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Flat "key = value" configuration files. '#' starts a comment.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace skillassess {

class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::filesystem::path& path);

  // Sorted by key; stable byte output.
  std::string serialize() const;

  bool has(const std::string& key) const { return values_.contains(key); }
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  // Entries of `other` win.
  void merge(const Config& other);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace skillassess
