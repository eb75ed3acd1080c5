// Copyright 2026 The skillassess Authors
// SPDX-License-Identifier: Apache-2.0

#include "skillassess/text_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "skillassess/common.hpp"
#include "skillassess/error.hpp"
#include "skillassess/evaluation.hpp"

namespace skillassess {

std::vector<std::string> metric_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      cur += ch;
    } else if (c >= 'A' && c <= 'Z') {
      cur += static_cast<char>(c - 'A' + 'a');
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

using Tokens = std::vector<std::string>;
using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const Tokens& t, std::size_t n) {
  NgramCounts out;
  if (t.size() < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[Tokens(t.begin() + i, t.begin() + i + n)];
  return out;
}

struct BleuStats {
  std::size_t matches[4] = {0, 0, 0, 0};
  std::size_t totals[4] = {0, 0, 0, 0};
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
};

void add_sentence(BleuStats& st, const Tokens& hyp, const std::vector<Tokens>& refs) {
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = ngrams(hyp, n);
    NgramCounts max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    std::size_t clipped = 0;
    std::size_t total = 0;
    for (const auto& [g, c] : h) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) clipped += std::min(c, it->second);
    }
    st.matches[n - 1] += clipped;
    st.totals[n - 1] += total;
  }
  st.hyp_len += hyp.size();
  std::size_t best = 0;
  bool have = false;
  for (const auto& r : refs) {
    const auto rl = r.size();
    const auto dist = [&](std::size_t x) { return x > hyp.size() ? x - hyp.size() : hyp.size() - x; };
    if (!have || dist(rl) < dist(best) || (dist(rl) == dist(best) && rl < best)) {
      best = rl;
      have = true;
    }
  }
  st.ref_len += best;
}

double bleu_from_stats(const BleuStats& st) {
  if (st.hyp_len == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (st.matches[n] == 0 || st.totals[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(st.matches[n]) / static_cast<double>(st.totals[n]));
  }
  const double c = static_cast<double>(st.hyp_len);
  const double r = static_cast<double>(st.ref_len);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return 100.0 * bp * std::exp(log_sum / 4.0);
}

std::vector<Tokens> tokenize_all(const std::vector<std::string>& texts) {
  std::vector<Tokens> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(metric_tokens(t));
  return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

double bleu4(std::string_view candidate, const std::vector<std::string>& references) {
  BleuStats st;
  add_sentence(st, metric_tokens(candidate), tokenize_all(references));
  return bleu_from_stats(st);
}

double corpus_bleu4(const std::vector<std::string>& candidates,
                    const std::vector<std::vector<std::string>>& references) {
  if (candidates.size() != references.size()) throw ArgumentError("candidate and reference counts differ");
  BleuStats st;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    add_sentence(st, metric_tokens(candidates[i]), tokenize_all(references[i]));
  }
  return bleu_from_stats(st);
}

double rouge_l(std::string_view candidate, std::string_view reference) {
  const auto c = metric_tokens(candidate);
  const auto r = metric_tokens(reference);
  if (c.empty() || r.empty()) return 0.0;
  std::vector<std::size_t> prev(r.size() + 1, 0), cur(r.size() + 1, 0);
  for (std::size_t i = 1; i <= c.size(); ++i) {
    for (std::size_t j = 1; j <= r.size(); ++j) {
      cur[j] = c[i - 1] == r[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[r.size()]);
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(c.size());
  const double rc = lcs / static_cast<double>(r.size());
  return 100.0 * 2.0 * p * rc / (p + rc);
}

std::string crude_stem(std::string_view word) {
  std::string w = to_lower_ascii(word);
  auto strip = [&](std::string_view suffix, std::string_view repl, std::size_t min_stem) {
    if (ends_with(w, suffix) && w.size() - suffix.size() >= min_stem) {
      w.resize(w.size() - suffix.size());
      w += repl;
      return true;
    }
    return false;
  };
  if (strip("ies", "y", 2)) return w;
  if (strip("ing", "", 3)) return w;
  if (strip("edly", "", 3)) return w;
  if (strip("ed", "", 3)) return w;
  if (strip("ly", "", 3)) return w;
  if (strip("es", "", 3)) return w;
  if (!ends_with(w, "ss")) strip("s", "", 3);
  return w;
}

double meteor_like(std::string_view candidate, std::string_view reference) {
  const auto c = metric_tokens(candidate);
  const auto r = metric_tokens(reference);
  if (c.empty() || r.empty()) return 0.0;
  std::vector<int> align(c.size(), -1);
  std::vector<bool> used(r.size(), false);
  auto run_stage = [&](auto&& same) {
    int last = -2;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (align[i] >= 0) {
        last = align[i];
        continue;
      }
      int pick = -1;
      if (last + 1 >= 0 && static_cast<std::size_t>(last + 1) < r.size() && !used[last + 1] &&
          same(c[i], r[last + 1])) {
        pick = last + 1;
      } else {
        for (std::size_t j = 0; j < r.size(); ++j) {
          if (!used[j] && same(c[i], r[j])) {
            pick = static_cast<int>(j);
            break;
          }
        }
      }
      if (pick >= 0) {
        align[i] = pick;
        used[pick] = true;
        last = pick;
      }
    }
  };
  run_stage([](const std::string& a, const std::string& b) { return a == b; });
  run_stage([](const std::string& a, const std::string& b) { return crude_stem(a) == crude_stem(b); });

  std::size_t matches = 0;
  std::size_t chunks = 0;
  int prev_ref = -2;
  bool prev_matched = false;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (align[i] < 0) {
      prev_matched = false;
      continue;
    }
    ++matches;
    if (!prev_matched || align[i] != prev_ref + 1) ++chunks;
    prev_ref = align[i];
    prev_matched = true;
  }
  if (matches == 0) return 0.0;
  const double m = static_cast<double>(matches);
  const double p = m / static_cast<double>(c.size());
  const double rc = m / static_cast<double>(r.size());
  const double fmean = 10.0 * p * rc / (rc + 9.0 * p);
  const double frag = (static_cast<double>(chunks) - 1.0) / m;
  const double penalty = 0.5 * frag * frag * frag;
  return 100.0 * fmean * (1.0 - penalty);
}

double bert_like(std::string_view candidate, std::string_view reference, const SimilarityBackend& sim) {
  const auto c = metric_tokens(candidate);
  const auto r = metric_tokens(reference);
  if (c.empty() && r.empty()) return 100.0;
  if (c.empty() || r.empty()) return 0.0;
  std::vector<double> best_r(r.size(), 0.0);
  double p_sum = 0.0;
  for (const auto& ct : c) {
    double best = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double s = sim.score(ct, r[j]);
      best = std::max(best, s);
      best_r[j] = std::max(best_r[j], s);
    }
    p_sum += best;
  }
  double r_sum = 0.0;
  for (double v : best_r) r_sum += v;
  const double p = p_sum / static_cast<double>(c.size());
  const double rc = r_sum / static_cast<double>(r.size());
  if (p + rc == 0.0) return 0.0;
  return 100.0 * 2.0 * p * rc / (p + rc);
}

ReplayScorer ReplayScorer::from_file(const std::filesystem::path& path) {
  ReplayScorer out;
  std::size_t lineno = 0;
  for (const auto& line : split(read_file(path), '\n')) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.add(j.at("metric").get<std::string>(), j.at("candidate").get<std::string>(),
              j.at("reference").get<std::string>(), j.at("score").get<double>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(lineno, std::string("bad scorer replay entry: ") + e.what());
    }
  }
  return out;
}

void ReplayScorer::add(std::string metric, std::string candidate, std::string reference, double score) {
  table_[{std::move(metric), std::move(candidate), std::move(reference)}] = score;
}

bool ReplayScorer::contains(std::string_view metric, std::string_view candidate, std::string_view reference) const {
  return table_.contains({std::string(metric), std::string(candidate), std::string(reference)});
}

double ReplayScorer::score(std::string_view metric, std::string_view candidate, std::string_view reference) const {
  auto it = table_.find({std::string(metric), std::string(candidate), std::string(reference)});
  if (it == table_.end()) {
    throw BackendError("external scorer has no recorded " + std::string(metric) + " value for this pair");
  }
  return it->second;
}

}  // namespace skillassess
