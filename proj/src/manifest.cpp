// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/manifest.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "skillassess/common.hpp"
#include "skillassess/error.hpp"

namespace skillassess {

nlohmann::json to_json(const StageEntry& e) {
  return {{"stage", e.stage},   {"key", e.key},       {"inputs", e.inputs},
          {"outputs", e.outputs}, {"config", e.config}, {"wall_clock_s", e.wall_clock_s}};
}

StageEntry stage_entry_from_json(const nlohmann::json& j) {
  StageEntry e;
  e.stage = j.at("stage").get<std::string>();
  e.key = j.at("key").get<std::string>();
  e.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  e.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  e.config = j.value("config", "");
  e.wall_clock_s = j.value("wall_clock_s", 0.0);
  return e;
}

std::map<std::string, std::string> hash_paths(const std::vector<std::filesystem::path>& paths) {
  std::map<std::string, std::string> out;
  for (const auto& p : paths) {
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> files;
      for (const auto& entry : std::filesystem::recursive_directory_iterator(p)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) out[f.lexically_normal().generic_string()] = sha256_file(f);
    } else if (std::filesystem::is_regular_file(p)) {
      out[p.lexically_normal().generic_string()] = sha256_file(p);
    } else {
      throw InputError("missing input file: " + p.string());
    }
  }
  return out;
}

std::string stage_key(const std::string& stage, const std::map<std::string, std::string>& inputs,
                      const std::string& config) {
  std::string blob = stage + '\n';
  // Input content, not location, decides whether a stage is stale.
  std::vector<std::string> digests;
  for (const auto& [_, h] : inputs) digests.push_back(h);
  std::sort(digests.begin(), digests.end());
  for (const auto& h : digests) blob += h + '\n';
  blob += config;
  return sha256_hex(blob);
}

ExperimentManifest::ExperimentManifest(std::filesystem::path path) : path_(std::move(path)) {}

std::vector<StageEntry> ExperimentManifest::entries() const {
  std::vector<StageEntry> out;
  if (!std::filesystem::exists(path_)) return out;
  std::size_t lineno = 0;
  for (const auto& line : split(read_file(path_), '\n')) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(stage_entry_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("bad manifest entry: ") + e.what());
    }
  }
  return out;
}

std::string ExperimentManifest::experiment_id() const {
  const auto all = entries();
  return all.empty() ? std::string() : all.front().key.substr(0, 16);
}

void ExperimentManifest::append(const StageEntry& entry) const {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error("cannot open manifest " + path_.string() + ": " + std::strerror(errno));
  if (::flock(fd, LOCK_EX) != 0) {
    ::close(fd);
    throw Error("cannot lock manifest " + path_.string());
  }
  const std::string line = to_json(entry).dump() + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const auto n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::flock(fd, LOCK_UN);
      ::close(fd);
      throw Error("cannot append to manifest " + path_.string());
    }
    written += static_cast<std::size_t>(n);
  }
  ::fsync(fd);
  ::flock(fd, LOCK_UN);
  ::close(fd);
}

std::optional<StageEntry> ExperimentManifest::up_to_date(const std::string& key) const {
  const auto all = entries();
  for (auto it = all.rbegin(); it != all.rend(); ++it) {
    if (it->key != key) continue;
    bool intact = true;
    for (const auto& [p, h] : it->outputs) {
      if (!std::filesystem::is_regular_file(p) || sha256_file(p) != h) {
        intact = false;
        break;
      }
    }
    if (intact) return *it;
    return std::nullopt;
  }
  return std::nullopt;
}

}  // namespace skillassess
