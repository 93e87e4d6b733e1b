// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

// Desk-scale experiments: synthetic topic corpora with collision-free
// vocabularies, retrieval accuracy (is the right adapter among those
// retrieved?), and a TTFT sweep over the number of active adapters.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "aclora/deployment.hpp"
#include "aclora/detail/xorshift.hpp"

namespace aclora::bench {

struct SyntheticTopic {
  AdapterId adapter;
  std::vector<std::string> vocabulary;
  std::vector<std::string> documents;
  std::vector<std::string> queries;  // drawn independently of the documents
};

struct CorpusOptions {
  std::size_t topics = 5;
  std::size_t words_per_topic = 20;
  std::size_t docs_per_topic = 3;
  std::size_t doc_tokens = 250;
  std::size_t queries_per_topic = 50;
  std::size_t query_tokens = 8;
  std::uint64_t seed = 1;
};

/// Picks `topics` vocabularies whose words occupy pairwise distinct hash
/// slots of `embedder`, so chunks from different topics are orthogonal.
inline std::vector<std::vector<std::string>> collision_free_vocabularies(const HashEmbedder& embedder,
                                                                         std::size_t topics,
                                                                         std::size_t words_per_topic) {
  if (topics * words_per_topic > embedder.dim()) {
    throw Error(ErrorCode::kInvalidArgument, "not enough hash slots for a collision-free vocabulary");
  }
  static constexpr const char* kSyllables[] = {"ka", "lo", "mi", "ren", "sa", "tu", "vo", "zel", "dri", "pha"};
  std::set<std::size_t> used;
  std::vector<std::vector<std::string>> out(topics);
  std::size_t counter = 0;
  for (auto& vocab : out) {
    while (vocab.size() < words_per_topic) {
      std::string w;
      for (std::size_t c = counter++; ; c /= 10) {
        w += kSyllables[c % 10];
        if (c < 10) break;
      }
      if (used.insert(embedder.slot(w).index).second) vocab.push_back(std::move(w));
    }
  }
  return out;
}

inline std::vector<SyntheticTopic> make_synthetic_corpus(const HashEmbedder& embedder, const CorpusOptions& opt) {
  const auto vocabs = collision_free_vocabularies(embedder, opt.topics, opt.words_per_topic);
  detail::Xorshift64Star doc_rng(opt.seed);
  detail::Xorshift64Star query_rng(opt.seed ^ 0xA5A5A5A5ULL);
  auto sentence = [](detail::Xorshift64Star& rng, const std::vector<std::string>& vocab, std::size_t len) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s += (i ? " " : "") + vocab[rng.below(vocab.size())];
    return s;
  };
  std::vector<SyntheticTopic> topics;
  for (std::size_t t = 0; t < opt.topics; ++t) {
    SyntheticTopic topic{AdapterId("topic" + std::to_string(t)), vocabs[t], {}, {}};
    for (std::size_t d = 0; d < opt.docs_per_topic; ++d) topic.documents.push_back(sentence(doc_rng, vocabs[t], opt.doc_tokens));
    for (std::size_t q = 0; q < opt.queries_per_topic; ++q) topic.queries.push_back(sentence(query_rng, vocabs[t], opt.query_tokens));
    topics.push_back(std::move(topic));
  }
  return topics;
}

struct DeploymentOptions {
  std::size_t hidden = 64;
  std::size_t output = 16;
  std::size_t rank = 8;
  double alpha = 16.0;
  std::size_t chunk_size = kDefaultChunkSize;
  std::uint64_t seed = 7;
};

/// One adapter per topic (random weights, all layers), every document
/// ingested under its topic's tag. No users are registered.
inline Deployment make_synthetic_deployment(std::unique_ptr<HashEmbedder> embedder,
                                            const std::vector<SyntheticTopic>& topics,
                                            const DeploymentOptions& opt = {}) {
  const std::size_t dim = embedder->dim();
  const ModelSignature sig{{dim, opt.hidden}, {opt.hidden, opt.hidden}, {opt.hidden, opt.output}};
  Deployment d{std::move(embedder), VectorStore(dim), PermissionRegistry{}, AdapterRegistry(sig),
               ReferenceModel::random(sig, opt.seed)};
  for (std::size_t t = 0; t < topics.size(); ++t) {
    auto a = make_random_adapter(topics[t].adapter, sig, {0, 1, 2}, opt.rank, opt.alpha, opt.seed * 1000 + t);
    a.metadata = {{"description", "synthetic topic " + std::to_string(t)},
                  {"sample_terms", topics[t].vocabulary.empty() ? "" : topics[t].vocabulary.front()}};
    d.adapters.register_adapter(std::move(a));
    for (std::size_t i = 0; i < topics[t].documents.size(); ++i) {
      ingest_document(*d.embedder, d.store, topics[t].adapter.str() + "/doc" + std::to_string(i), topics[t].documents[i],
                      topics[t].adapter, opt.chunk_size);
    }
  }
  return d;
}

struct RetrievalRow {
  std::string topic;
  std::size_t queries = 0;
  std::size_t hits = 0;
  double mean_retrieved = 0.0;

  double hit_rate() const { return queries ? static_cast<double>(hits) / static_cast<double>(queries) : 0.0; }
};

struct LabeledQuery {
  std::string topic;  // id of the adapter that should be retrieved
  std::string text;
};

/// For each query, runs the pipeline as a user holding every adapter and
/// checks whether the labeled adapter is among the active ones.
inline std::vector<RetrievalRow> evaluate_retrieval(Deployment& d, const std::vector<LabeledQuery>& queries,
                                                    const RetrievalConfig& config) {
  const std::string superuser = "__retrieval_eval__";
  const auto ids = d.adapters.ids();
  d.permissions.set_permissions(superuser, GrantSet(ids.begin(), ids.end()));
  const Pipeline pipe = d.pipeline();
  std::map<std::string, RetrievalRow> rows;
  std::vector<std::string> order;
  for (const auto& q : queries) {
    auto [it, fresh] = rows.try_emplace(q.topic, RetrievalRow{q.topic});
    if (fresh) order.push_back(q.topic);
    const auto outcome = pipe.query(superuser, q.text, config);
    RetrievalRow& row = it->second;
    ++row.queries;
    row.mean_retrieved += static_cast<double>(outcome.active.size());
    if (std::any_of(outcome.active.begin(), outcome.active.end(),
                    [&](const WeightedAdapter& w) { return w.id.str() == q.topic; })) {
      ++row.hits;
    }
  }
  std::vector<RetrievalRow> out;
  for (const auto& t : order) {
    RetrievalRow r = rows[t];
    r.mean_retrieved /= static_cast<double>(std::max<std::size_t>(r.queries, 1));
    out.push_back(r);
  }
  return out;
}

inline std::vector<LabeledQuery> labeled_queries(const std::vector<SyntheticTopic>& topics) {
  std::vector<LabeledQuery> out;
  for (const auto& t : topics) {
    for (const auto& q : t.queries) out.push_back({t.adapter.str(), q});
  }
  return out;
}

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(ErrorCode::kInvalidArgument, "spearman needs paired samples");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

struct LatencyOptions {
  std::size_t max_adapters = 10;
  std::size_t reps = 30;
  std::size_t warmup = 3;
  std::size_t dim = 256;
  std::size_t hidden = 512;
  std::size_t rank = 64;
  double alpha = 64.0;
  std::uint64_t seed = 11;
};

struct LatencyRow {
  std::size_t active_adapters = 0;
  std::vector<double> ttft_ms;

  double median() const { return quantile(ttft_ms, 0.5); }
  double p95() const { return quantile(ttft_ms, 0.95); }
};

/// TTFT for 1..max_adapters active adapters on one fixed query. Every
/// adapter holds a chunk identical to the query, so user "n" (granted the
/// first n adapters) activates exactly n of them. Adapter counts are
/// interleaved within each repetition so drift spreads evenly.
inline std::vector<LatencyRow> bench_latency(const LatencyOptions& opt) {
  const std::string query = "how many cores are in the cpu of the current platform generation";
  const ModelSignature sig{{opt.dim, opt.hidden}, {opt.hidden, opt.hidden}, {opt.hidden, opt.dim}};
  Deployment d{std::make_unique<HashEmbedder>(opt.dim), VectorStore(opt.dim), PermissionRegistry{},
               AdapterRegistry(sig), ReferenceModel::random(sig, opt.seed)};
  std::vector<AdapterId> ids;
  for (std::size_t i = 0; i < opt.max_adapters; ++i) {
    ids.emplace_back("bench" + std::to_string(i));
    d.adapters.register_adapter(make_random_adapter(ids.back(), sig, {0, 1, 2}, opt.rank, opt.alpha, opt.seed + i + 1));
    ingest_document(*d.embedder, d.store, ids.back().str(), query, ids.back());
  }
  for (std::size_t n = 1; n <= opt.max_adapters; ++n) {
    d.permissions.set_permissions("n" + std::to_string(n), GrantSet(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n)));
  }
  RetrievalConfig config;
  config.fetch_k = config.k = opt.max_adapters;
  config.hints_enabled = false;
  const Pipeline pipe = d.pipeline();

  std::vector<LatencyRow> rows(opt.max_adapters);
  for (std::size_t n = 1; n <= opt.max_adapters; ++n) rows[n - 1].active_adapters = n;
  for (std::size_t rep = 0; rep < opt.warmup + opt.reps; ++rep) {
    for (std::size_t n = 1; n <= opt.max_adapters; ++n) {
      const auto outcome = pipe.query("n" + std::to_string(n), query, config, Pipeline::Clock::now());
      if (outcome.active.size() != n) {
        throw Error(ErrorCode::kInvalidArgument, "latency bench expected " + std::to_string(n) + " active adapters");
      }
      if (rep >= opt.warmup) rows[n - 1].ttft_ms.push_back(outcome.timing.ttft_ms);
    }
  }
  return rows;
}

/// Spearman rho between adapter count and median TTFT.
inline double ttft_trend(const std::vector<LatencyRow>& rows) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    x.push_back(static_cast<double>(r.active_adapters));
    y.push_back(r.median());
  }
  return spearman(x, y);
}

/// Lower `q`-quantile of the trend statistic under resampling each row's
/// samples with replacement.
inline double ttft_trend_bootstrap(const std::vector<LatencyRow>& rows, std::size_t iterations, double q,
                                   std::uint64_t seed = 99) {
  detail::Xorshift64Star rng(seed);
  std::vector<double> stats;
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<LatencyRow> resampled;
    for (const auto& r : rows) {
      LatencyRow s{r.active_adapters, {}};
      for (std::size_t i = 0; i < r.ttft_ms.size(); ++i) s.ttft_ms.push_back(r.ttft_ms[rng.below(r.ttft_ms.size())]);
      resampled.push_back(std::move(s));
    }
    stats.push_back(ttft_trend(resampled));
  }
  return quantile(stats, q);
}

}  // namespace aclora::bench
