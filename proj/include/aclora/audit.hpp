// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

// Verbatim-memorization scoring: every maximal common word run of length
// >= n between a prediction and the training entries, unioned over the
// prediction into absolute and relative scores.

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "aclora/detail/suffix_array.hpp"
#include "aclora/embedding.hpp"
#include "aclora/error.hpp"
#include "json.hpp"

namespace aclora {

/// Inclusive word-index range.
struct WordInterval {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  auto operator<=>(const WordInterval&) const = default;
};

struct CommonSubstring {
  WordInterval prediction;
  WordInterval training;
  std::size_t training_index = 0;

  auto operator<=>(const CommonSubstring&) const = default;
};

/// Sorted, pairwise disjoint, with touching intervals ([1,3] and [4,5])
/// coalesced.
inline std::vector<WordInterval> union_intervals(std::vector<WordInterval> intervals) {
  std::sort(intervals.begin(), intervals.end());
  std::vector<WordInterval> out;
  for (const auto& iv : intervals) {
    if (!out.empty() && iv.start <= out.back().end + 1) {
      out.back().end = std::max(out.back().end, iv.end);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

inline std::size_t covered_words(const std::vector<WordInterval>& disjoint) {
  std::size_t total = 0;
  for (const auto& iv : disjoint) total += iv.length();
  return total;
}

/// All maximal common substring occurrences of length >= min_len between
/// `prediction` and each of `training`, found with one generalized suffix
/// array over prediction and training texts joined by unique separators.
/// An occurrence is maximal when it can be extended neither left nor right.
/// Sorted by (prediction.start, training_index, training.start).
inline std::vector<CommonSubstring> common_substrings(const TokenSequence& prediction,
                                                      const std::vector<TokenSequence>& training,
                                                      std::size_t min_len) {
  if (min_len == 0) throw Error(ErrorCode::kInvalidArgument, "minimum substring length must be >= 1");
  std::unordered_map<std::string_view, std::int64_t> vocab;
  auto id_of = [&vocab](const std::string& w) { return vocab.try_emplace(w, static_cast<std::int64_t>(vocab.size())).first->second; };

  // origin[i] = -1 for prediction positions, training index otherwise;
  // offset[i] = position within its own sequence.
  std::vector<std::int64_t> text;
  std::vector<std::int64_t> origin;
  std::vector<std::size_t> offset;
  std::vector<std::size_t> separators;
  auto append = [&](const TokenSequence& seq, std::int64_t who) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      text.push_back(id_of(seq[i]));
      origin.push_back(who);
      offset.push_back(i);
    }
    separators.push_back(text.size());
    text.push_back(-1);  // patched below to a unique symbol
    origin.push_back(-2);
    offset.push_back(0);
  };
  append(prediction, -1);
  for (std::size_t t = 0; t < training.size(); ++t) append(training[t], static_cast<std::int64_t>(t));
  const auto base = static_cast<std::int64_t>(vocab.size());
  for (std::size_t k = 0; k < separators.size(); ++k) text[separators[k]] = base + static_cast<std::int64_t>(k);

  const auto sa = detail::suffix_array(text);
  const auto lcp = detail::lcp_array(text, sa);

  std::vector<CommonSubstring> out;
  auto emit = [&](std::size_t p_pos, std::size_t s_pos, std::size_t len) {
    const std::size_t i = offset[p_pos];
    const std::size_t j = offset[s_pos];
    const auto t = static_cast<std::size_t>(origin[s_pos]);
    if (i > 0 && j > 0 && prediction[i - 1] == training[t][j - 1]) return;  // not left-maximal
    out.push_back({{i, i + len - 1}, {j, j + len - 1}, t});
  };

  // Runs of adjacent suffix-array entries whose LCP is >= min_len; within a
  // run, LCP(a, b) is the minimum of lcp over [a, b). Only prediction x
  // training pairs are visited. Right-maximality is automatic because the
  // LCP of two suffixes stops exactly at the first mismatch or separator.
  std::size_t lo = 0;
  while (lo < sa.size()) {
    std::size_t hi = lo;
    while (hi + 1 < sa.size() && lcp[hi] >= min_len) ++hi;
    if (hi > lo) {
      for (std::size_t a = lo; a <= hi; ++a) {
        if (origin[sa[a]] != -1) continue;
        std::size_t m = SIZE_MAX;
        for (std::size_t b = a + 1; b <= hi; ++b) {
          m = std::min(m, lcp[b - 1]);
          if (origin[sa[b]] >= 0) emit(sa[a], sa[b], m);
        }
        m = SIZE_MAX;
        for (std::size_t b = a; b-- > lo;) {
          m = std::min(m, lcp[b]);
          if (origin[sa[b]] >= 0) emit(sa[a], sa[b], m);
        }
      }
    }
    lo = hi + 1;
  }
  std::sort(out.begin(), out.end(), [](const CommonSubstring& x, const CommonSubstring& y) {
    return std::tie(x.prediction.start, x.training_index, x.training.start) <
           std::tie(y.prediction.start, y.training_index, y.training.start);
  });
  return out;
}

/// Single training entry form.
inline std::vector<CommonSubstring> common_substrings(const TokenSequence& prediction, const TokenSequence& training,
                                                      std::size_t min_len) {
  return common_substrings(prediction, std::vector<TokenSequence>{training}, min_len);
}

struct TrainingSpan {
  std::size_t training_index = 0;
  WordInterval interval;

  auto operator<=>(const TrainingSpan&) const = default;
};

struct OverlapReport {
  std::string prediction_id;
  std::size_t prediction_length = 0;
  std::size_t n = 0;
  std::vector<WordInterval> global_intervals;  // prediction side, disjoint
  std::vector<TrainingSpan> training_spans;    // training side, disjoint per entry
  std::size_t absolute = 0;
  double relative = 0.0;
};

namespace detail {

inline OverlapReport report_from_matches(const std::string& prediction_id, std::size_t prediction_length, std::size_t n,
                                         const std::vector<CommonSubstring>& matches) {
  OverlapReport r;
  r.prediction_id = prediction_id;
  r.prediction_length = prediction_length;
  r.n = n;
  std::vector<WordInterval> p_side;
  std::map<std::size_t, std::vector<WordInterval>> s_side;
  for (const auto& m : matches) {
    if (m.prediction.length() < n) continue;
    p_side.push_back(m.prediction);
    s_side[m.training_index].push_back(m.training);
  }
  r.global_intervals = union_intervals(std::move(p_side));
  for (auto& [t, ivs] : s_side) {
    for (const auto& iv : union_intervals(std::move(ivs))) r.training_spans.push_back({t, iv});
  }
  r.absolute = covered_words(r.global_intervals);
  r.relative = static_cast<double>(r.absolute) / static_cast<double>(prediction_length);
  return r;
}

}  // namespace detail

inline OverlapReport score_prediction(const TokenSequence& prediction, const std::vector<TokenSequence>& training,
                                      std::size_t n, const std::string& prediction_id = {}) {
  if (prediction.empty()) throw Error(ErrorCode::kEmptyPrediction, "prediction has no words");
  return detail::report_from_matches(prediction_id, prediction.size(), n, common_substrings(prediction, training, n));
}

/// Cumulative absolute score over several predictions for the same query.
/// Prediction-side indices refer to different texts, so captures are merged
/// on the training side: a training word counts once however many
/// predictions reproduced it.
inline std::size_t merge_predictions(const std::vector<OverlapReport>& reports) {
  std::map<std::size_t, std::vector<WordInterval>> by_entry;
  for (const auto& r : reports) {
    for (const auto& span : r.training_spans) by_entry[span.training_index].push_back(span.interval);
  }
  std::size_t total = 0;
  for (auto& [_, ivs] : by_entry) total += covered_words(union_intervals(std::move(ivs)));
  return total;
}

struct TextRecord {
  std::string id;
  std::string text;
};

inline const std::vector<std::size_t> kDefaultAuditN{8, 12, 15, 18};

/// One report per (prediction, n), in prediction order then n order.
/// Predictions are sharded over `workers` threads; assembly order does not
/// depend on scheduling.
inline std::vector<OverlapReport> audit_corpus(const std::vector<TextRecord>& predictions,
                                               const std::vector<TextRecord>& training,
                                               const std::vector<std::size_t>& n_values = kDefaultAuditN,
                                               std::size_t workers = 1) {
  if (n_values.empty()) throw Error(ErrorCode::kInvalidArgument, "need at least one n");
  const std::size_t n_min = *std::min_element(n_values.begin(), n_values.end());
  if (n_min == 0) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
  std::vector<TokenSequence> train_tokens;
  train_tokens.reserve(training.size());
  for (const auto& t : training) train_tokens.push_back(tokenize(t.text));

  std::vector<OverlapReport> rows(predictions.size() * n_values.size());
  // Maximal matches do not depend on n, so one pass at the smallest n
  // serves every larger n by length filtering.
  auto run = [&](std::size_t shard, std::size_t shards) {
    for (std::size_t i = shard; i < predictions.size(); i += shards) {
      const TokenSequence p = tokenize(predictions[i].text);
      if (p.empty()) throw Error(ErrorCode::kEmptyPrediction, "prediction '" + predictions[i].id + "' has no words");
      const auto matches = common_substrings(p, train_tokens, n_min);
      for (std::size_t k = 0; k < n_values.size(); ++k) {
        rows[i * n_values.size() + k] = detail::report_from_matches(predictions[i].id, p.size(), n_values[k], matches);
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, predictions.size()));
  if (workers == 1) {
    run(0, 1);
  } else {
    std::vector<std::future<void>> futures;
    for (std::size_t w = 0; w < workers; ++w) futures.push_back(std::async(std::launch::async, run, w, workers));
    for (auto& f : futures) f.get();
  }
  return rows;
}

inline void write_audit_csv(std::ostream& os, const std::vector<OverlapReport>& rows) {
  os << "prediction_id,n,absolute,relative,interval_count\n";
  for (const auto& r : rows) {
    std::string id = r.prediction_id;
    if (id.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (const char c : id) quoted += (c == '"') ? std::string("\"\"") : std::string(1, c);
      id = quoted + "\"";
    }
    char rel[32];
    std::snprintf(rel, sizeof rel, "%.6f", r.relative);
    os << id << ',' << r.n << ',' << r.absolute << ',' << rel << ',' << r.global_intervals.size() << '\n';
  }
}

inline nlohmann::json to_json(const OverlapReport& r) {
  nlohmann::json ivs = nlohmann::json::array();
  for (const auto& iv : r.global_intervals) ivs.push_back({iv.start, iv.end});
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& s : r.training_spans) {
    spans.push_back({{"training_index", s.training_index}, {"start", s.interval.start}, {"end", s.interval.end}});
  }
  return {{"prediction_id", r.prediction_id}, {"n", r.n},
          {"prediction_length", r.prediction_length}, {"absolute", r.absolute},
          {"relative", r.relative}, {"global_intervals", std::move(ivs)},
          {"training_spans", std::move(spans)}};
}

/// Reads UTF-8 JSON-lines of {"id": ..., "text": ...}; blank lines are skipped.
inline std::vector<TextRecord> read_text_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<TextRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      throw Error(ErrorCode::kInvalidArgument, path.string() + ":" + std::to_string(line_no) + ": expected {\"id\",\"text\"}");
    }
    std::string id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                      : std::to_string(out.size());
    out.push_back({std::move(id), j["text"].get<std::string>()});
  }
  return out;
}

}  // namespace aclora
