// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Append-only experiment ledger: one JSON line per completed stage with the
// content hashes of its inputs and outputs.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace skillassess {

struct StageEntry {
  std::string stage;
  std::string key;  // digest of stage, inputs and config
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  std::string config;
  double wall_clock_s = 0.0;
};

nlohmann::json to_json(const StageEntry& e);
StageEntry stage_entry_from_json(const nlohmann::json& j);

// sha256 of a file, or for a directory of every regular file under it
// (one map entry per file).
std::map<std::string, std::string> hash_paths(const std::vector<std::filesystem::path>& paths);

std::string stage_key(const std::string& stage, const std::map<std::string, std::string>& inputs,
                      const std::string& config);

class ExperimentManifest {
 public:
  explicit ExperimentManifest(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }
  // Derived from the first entry; empty until one exists.
  std::string experiment_id() const;
  std::vector<StageEntry> entries() const;

  // Appends under an exclusive file lock.
  void append(const StageEntry& entry) const;

  // A prior entry with the same key whose outputs are all still on disk
  // with their recorded hashes.
  std::optional<StageEntry> up_to_date(const std::string& key) const;

 private:
  std::filesystem::path path_;
};

}  // namespace skillassess
