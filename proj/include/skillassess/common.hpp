// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace skillassess {

using AttributeSet = std::set<std::string>;

// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Stable 64-bit hash (FNV-1a) for seeding and ordering. Not cryptographic.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0);

std::uint64_t splitmix64(std::uint64_t& state);

// Platform-independent seeded generator. std::mt19937_64 output is fully
// specified by the standard, the distributions are not, so the few
// distributions we need live here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  // Uniform real in [0, 1).
  double uniform();
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_[4];
};

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char delim);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// Fixed-precision formatting used by every report writer so that outputs
// are byte-stable.
std::string format_fixed(double v, int digits = 6);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace skillassess
