// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "aclora/audit.hpp"

namespace aclora {
namespace {

// Naive oracle: every (i, j) that starts a left-maximal match, extended as
// far right as it goes.
std::vector<CommonSubstring> dp_oracle(const TokenSequence& p, const TokenSequence& s, std::size_t n,
                                       std::size_t training_index = 0) {
  std::vector<CommonSubstring> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (i > 0 && j > 0 && p[i - 1] == s[j - 1]) continue;
      std::size_t len = 0;
      while (i + len < p.size() && j + len < s.size() && p[i + len] == s[j + len]) ++len;
      if (len >= n && len > 0) out.push_back({{i, i + len - 1}, {j, j + len - 1}, training_index});
    }
  }
  return out;
}

TokenSequence random_words(std::mt19937& rng, std::size_t len, std::size_t alphabet) {
  TokenSequence out;
  for (std::size_t i = 0; i < len; ++i) out.push_back("w" + std::to_string(rng() % alphabet));
  return out;
}

TEST(CommonSubstrings, WorkedExamples) {
  const auto p = tokenize("a b c d e");
  const auto s = tokenize("x b c d y");
  const auto m = common_substrings(p, s, 3);
  ASSERT_EQ(m.size(), 1U);
  EXPECT_EQ(m[0].prediction, (WordInterval{1, 3}));
  EXPECT_EQ(m[0].training, (WordInterval{1, 3}));
  EXPECT_TRUE(common_substrings(p, s, 4).empty());

  const auto same = tokenize("a b c");
  const auto id = common_substrings(same, same, 1);
  ASSERT_EQ(id.size(), 1U);
  EXPECT_EQ(id[0].prediction, (WordInterval{0, 2}));
  EXPECT_EQ(id[0].training, (WordInterval{0, 2}));
  EXPECT_THROW(common_substrings(p, s, 0), Error);
}

TEST(CommonSubstrings, EmptySides) {
  EXPECT_TRUE(common_substrings(TokenSequence{}, tokenize("a b"), 1).empty());
  EXPECT_TRUE(common_substrings(tokenize("a b"), TokenSequence{}, 1).empty());
  EXPECT_TRUE(common_substrings(tokenize("a b"), std::vector<TokenSequence>{}, 1).empty());
}

TEST(CommonSubstrings, MatchesDpOracle) {
  std::mt19937 rng(12);
  for (const std::size_t alphabet : {2, 5, 26}) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto p = random_words(rng, rng() % 120, alphabet);
      const auto s = random_words(rng, rng() % 120, alphabet);
      const std::size_t n = 1 + rng() % 6;
      EXPECT_EQ(common_substrings(p, s, n), dp_oracle(p, s, n)) << "alphabet " << alphabet << " trial " << trial;
    }
  }
}

TEST(CommonSubstrings, MultiTrainingMatchesPerEntryOracle) {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_words(rng, 60, 4);
    std::vector<TokenSequence> training;
    std::vector<CommonSubstring> expected;
    for (std::size_t t = 0; t < 4; ++t) {
      training.push_back(random_words(rng, rng() % 60, 4));
      const auto part = dp_oracle(p, training.back(), 3, t);
      expected.insert(expected.end(), part.begin(), part.end());
    }
    std::sort(expected.begin(), expected.end(), [](const auto& x, const auto& y) {
      return std::tie(x.prediction.start, x.training_index, x.training.start) <
             std::tie(y.prediction.start, y.training_index, y.training.start);
    });
    EXPECT_EQ(common_substrings(p, training, 3), expected);
  }
}

TEST(UnionIntervals, CoalescesOverlapAndAdjacency) {
  EXPECT_EQ(union_intervals({{2, 4}, {1, 3}}), (std::vector<WordInterval>{{1, 4}}));
  EXPECT_EQ(union_intervals({{1, 3}, {4, 5}, {7, 7}}), (std::vector<WordInterval>{{1, 5}, {7, 7}}));
  const auto u = union_intervals({{0, 2}, {5, 9}, {1, 6}});
  EXPECT_EQ(union_intervals(u), u);
}

TEST(ScorePrediction, UnionAcrossTrainingEntries) {
  // p-side captures [1,3] from the first entry and [2,4] from the second.
  const auto p = tokenize("z a b c d y");
  const std::vector<TokenSequence> training{tokenize("a b c"), tokenize("b c d")};
  const auto r = score_prediction(p, training, 3);
  EXPECT_EQ(r.global_intervals, (std::vector<WordInterval>{{1, 4}}));
  EXPECT_EQ(r.absolute, 4U);
  EXPECT_DOUBLE_EQ(r.relative, 4.0 / 6.0);
}

TEST(ScorePrediction, NoMatchAndEmpty) {
  const auto r = score_prediction(tokenize("a b c"), {tokenize("x y z")}, 1);
  EXPECT_EQ(r.absolute, 0U);
  EXPECT_EQ(r.relative, 0.0);
  EXPECT_TRUE(r.global_intervals.empty());
  try {
    score_prediction({}, {tokenize("a")}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyPrediction);
  }
}

TEST(ScorePrediction, SelfMatchIsFullCoverage) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_words(rng, 1 + rng() % 80, 3);
    const std::size_t n = 1 + rng() % p.size();
    const auto r = score_prediction(p, {p}, n);
    EXPECT_EQ(r.absolute, p.size());
    EXPECT_EQ(r.relative, 1.0);
  }
}

// 43 memorized words in a 111-word prediction.
TEST(ScorePrediction, PublishedExampleRelativeScore) {
  TokenSequence p;
  for (int i = 0; i < 111; ++i) p.push_back("p" + std::to_string(i));
  TokenSequence s1(p.begin() + 10, p.begin() + 30);  // 20 words
  TokenSequence s2(p.begin() + 60, p.begin() + 83);  // 23 words
  s1.insert(s1.begin(), "noise");
  s2.push_back("tail");
  const auto r = score_prediction(p, {s1, s2}, 8);
  EXPECT_EQ(r.absolute, 43U);
  EXPECT_NEAR(r.relative, 0.387, 0.001);
}

TEST(ScorePrediction, MonotoneInN) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = random_words(rng, 150, 2);
    const std::vector<TokenSequence> training{random_words(rng, 150, 2), random_words(rng, 80, 2)};
    std::size_t prev = SIZE_MAX;
    for (const std::size_t n : kDefaultAuditN) {
      const auto a = score_prediction(p, training, n).absolute;
      EXPECT_LE(a, prev);
      prev = a;
    }
  }
}

OverlapReport with_spans(std::vector<TrainingSpan> spans) {
  OverlapReport r;
  r.training_spans = std::move(spans);
  return r;
}

TEST(MergePredictions, DedupsOnTrainingSide) {
  const auto same = with_spans({{0, {10, 14}}});
  EXPECT_EQ(merge_predictions({same, same, same}), 5U);
  EXPECT_EQ(merge_predictions({with_spans({{0, {0, 2}}}), with_spans({{0, {10, 13}}})}), 7U);
  EXPECT_EQ(merge_predictions({with_spans({{0, {1, 4}}}), with_spans({{0, {3, 6}}})}), 6U);
  // Same coordinates in different training entries are different words.
  EXPECT_EQ(merge_predictions({with_spans({{0, {1, 4}}}), with_spans({{1, {1, 4}}})}), 8U);
  EXPECT_EQ(merge_predictions({}), 0U);
}

TEST(MergePredictions, ThreeIdenticalPredictionsEndToEnd) {
  const auto training = std::vector<TokenSequence>{tokenize("q r s t u v w")};
  const auto p = tokenize("a q r s t u b");
  std::vector<OverlapReport> reports;
  for (int i = 0; i < 3; ++i) reports.push_back(score_prediction(p, training, 3));
  EXPECT_EQ(reports[0].absolute, 5U);
  EXPECT_EQ(merge_predictions(reports), 5U);
}

TEST(AuditCorpus, TableShapeDefaultsAndParallelDeterminism) {
  std::mt19937 rng(31);
  std::vector<TextRecord> preds, train;
  for (int i = 0; i < 12; ++i) preds.push_back({"p" + std::to_string(i), join_tokens(random_words(rng, 100, 2))});
  for (int i = 0; i < 5; ++i) train.push_back({"t" + std::to_string(i), join_tokens(random_words(rng, 100, 2))});
  const auto serial = audit_corpus(preds, train);
  ASSERT_EQ(serial.size(), preds.size() * 4);
  const auto parallel = audit_corpus(preds, train, kDefaultAuditN, 4);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].prediction_id, preds[i / 4].id);
    EXPECT_EQ(serial[i].n, kDefaultAuditN[i % 4]);
    EXPECT_EQ(serial[i].global_intervals, parallel[i].global_intervals);
    EXPECT_EQ(serial[i].absolute, parallel[i].absolute);
    if (i % 4) {
      EXPECT_LE(serial[i].absolute, serial[i - 1].absolute);
    }
    std::vector<TokenSequence> train_tokens;
    for (const auto& t : train) train_tokens.push_back(tokenize(t.text));
    EXPECT_EQ(serial[i].absolute, score_prediction(tokenize(preds[i / 4].text), train_tokens, serial[i].n).absolute);
  }
  EXPECT_TRUE(audit_corpus({}, train).empty());
}

TEST(AuditCorpus, CsvFormat) {
  const std::vector<TextRecord> preds{{"x,1", "a b c d"}};
  const std::vector<TextRecord> train{{"t", "a b c"}};
  std::ostringstream os;
  write_audit_csv(os, audit_corpus(preds, train, {2, 4}));
  EXPECT_EQ(os.str(),
            "prediction_id,n,absolute,relative,interval_count\n"
            "\"x,1\",2,3,0.750000,1\n"
            "\"x,1\",4,0,0.000000,0\n");
}

}  // namespace
}  // namespace aclora
