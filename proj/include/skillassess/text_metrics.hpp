// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

// Text-generation scores, all on a 0-100 scale.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace skillassess {

class SimilarityBackend;

// Lowercase; runs of ASCII letters and digits are tokens, everything else
// separates.
std::vector<std::string> metric_tokens(std::string_view text);

// Sentence BLEU-4: uniform weights over modified 1..4-gram precisions, no
// smoothing, brevity penalty against the closest reference length (shorter
// wins ties). Any zero precision, or an empty candidate, gives 0.
double bleu4(std::string_view candidate, const std::vector<std::string>& references);
// Corpus BLEU-4: clipped counts and lengths summed over the corpus first.
double corpus_bleu4(const std::vector<std::string>& candidates,
                    const std::vector<std::vector<std::string>>& references);

// F1 of the longest common subsequence.
double rouge_l(std::string_view candidate, std::string_view reference);

// Light suffix stripper used by meteor_like.
std::string crude_stem(std::string_view word);

// Approximation of METEOR: exact then stem unigram alignment, F-mean with
// recall weight 9, penalty 0.5 * ((chunks - 1) / matches)^3.
double meteor_like(std::string_view candidate, std::string_view reference);

// Greedy token matching F1 with token similarity from `sim`.
double bert_like(std::string_view candidate, std::string_view reference, const SimilarityBackend& sim);

// Recorded scores from an external scorer, keyed by (metric, candidate,
// reference). File: one JSON object per line {metric, candidate, reference,
// score}.
class ReplayScorer {
 public:
  static ReplayScorer from_file(const std::filesystem::path& path);
  void add(std::string metric, std::string candidate, std::string reference, double score);
  // Throws BackendError on a miss.
  double score(std::string_view metric, std::string_view candidate, std::string_view reference) const;
  bool contains(std::string_view metric, std::string_view candidate, std::string_view reference) const;
  std::size_t size() const { return table_.size(); }

 private:
  std::map<std::tuple<std::string, std::string, std::string>, double> table_;
};

}  // namespace skillassess
