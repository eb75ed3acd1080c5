// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "skillassess/commentary.hpp"
#include "skillassess/common.hpp"
#include "skillassess/dataset.hpp"

namespace skillassess::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("skillassess_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline CommentaryRecord make_record(std::string id, std::string video, double t, std::string text,
                                    std::string sport = "soccer", std::string skill = "dribbling") {
  CommentaryRecord r;
  r.record_id = std::move(id);
  r.video_id = std::move(video);
  r.timestamp_s = t;
  r.text = std::move(text);
  r.sport = std::move(sport);
  r.skill = std::move(skill);
  r.views = {"ego"};
  r.video_duration_s = 100.0;
  return r;
}

inline ClipSample make_sample(std::string id, std::string video, std::string sport, std::string skill,
                              AttributeSet attrs = {"balance"}) {
  ClipSample s;
  s.sample_id = std::move(id);
  s.video_id = std::move(video);
  s.window_start_s = 0.0;
  s.window_end_s = 8.0;
  s.video_duration_s = 60.0;
  s.sport = std::move(sport);
  s.skill = std::move(skill);
  s.views = {"ego"};
  s.attributes = std::move(attrs);
  s.feedback_text = "work on your balance";
  return s;
}

// Lowercase words joined by single spaces; canonical under normalize_attribute.
inline std::string random_attribute(Rng& rng) {
  static const char* kAlpha = "abcdefghijklmnopqrstuvwxyz0123456789";
  const std::size_t words = 1 + rng.below(3);
  std::string out;
  for (std::size_t w = 0; w < words; ++w) {
    if (w) out.push_back(' ');
    const std::size_t len = 1 + rng.below(8);
    for (std::size_t i = 0; i < len; ++i) out.push_back(kAlpha[rng.below(36)]);
  }
  return out;
}

inline AttributeSet random_attribute_set(Rng& rng, std::size_t max_size) {
  AttributeSet s;
  const std::size_t n = rng.below(max_size + 1);
  while (s.size() < n) s.insert(random_attribute(rng));
  return s;
}

}  // namespace skillassess::testing
