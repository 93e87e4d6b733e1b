// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

// Query orchestration: embed, retrieve, aggregate per adapter, filter by
// permission, weight, run the mixed forward pass, and collect hints.

#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "aclora/adapters.hpp"
#include "aclora/embedding.hpp"
#include "aclora/model.hpp"
#include "aclora/permissions.hpp"
#include "aclora/vector_store.hpp"

namespace aclora {

struct RetrievalConfig {
  std::size_t fetch_k = 10;
  std::size_t k = 3;
  double threshold = 0.0;
  bool hints_enabled = true;

  void validate() const {
    if (fetch_k == 0 || k == 0) throw Error(ErrorCode::kInvalidArgument, "k and fetch_k must be >= 1");
    if (k > fetch_k) {
      throw Error(ErrorCode::kInvalidArgument,
                  "k (" + std::to_string(k) + ") must not exceed fetch_k (" + std::to_string(fetch_k) + ")");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "threshold outside [0, 1]");
  }
};

/// Per-adapter aggregate scores, ordered by adapter id.
using CandidateSet = std::map<AdapterId, double>;

/// Mean chunk score per adapter over the given chunks.
inline CandidateSet aggregate_scores(const std::vector<ScoredChunk>& chunks) {
  std::map<AdapterId, std::pair<double, std::size_t>> acc;
  for (const auto& c : chunks) {
    auto& [sum, n] = acc[c.adapter_tag];
    sum += c.score;
    ++n;
  }
  CandidateSet out;
  for (const auto& [id, sn] : acc) out.emplace(id, sn.first / static_cast<double>(sn.second));
  return out;
}

/// Candidates sorted by descending score, ties by id.
inline std::vector<ScoredAdapter> ranked(const CandidateSet& candidates) {
  std::vector<ScoredAdapter> out;
  for (const auto& [id, score] : candidates) out.push_back({id, score});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

struct WeightedAdapter {
  AdapterId id;
  double weight = 0.0;

  bool operator==(const WeightedAdapter&) const = default;
};

/// Mixing weights over permitted candidates: adapters scoring below
/// `threshold` are dropped, non-positive scores clamp to 0 and are left out,
/// and the rest are normalized to sum to 1. Empty when nothing positive
/// survives. Output is in descending-weight order (ties by id).
inline std::vector<WeightedAdapter> build_plan(const CandidateSet& permitted, double threshold) {
  std::vector<ScoredAdapter> kept;
  double total = 0.0;
  for (const auto& c : ranked(permitted)) {
    if (c.score < threshold || c.score <= 0.0) continue;  // clamps to 0: contributes nothing
    kept.push_back(c);
    total += c.score;
  }
  std::vector<WeightedAdapter> plan;
  if (!(total > 0.0)) return plan;
  for (const auto& c : kept) plan.push_back({c.id, c.score / total});
  return plan;
}

struct Hint {
  AdapterId id;
  double score = 0.0;
  std::map<std::string, std::string> metadata;
};

struct QueryTiming {
  double embed_ms = 0.0;
  double retrieve_ms = 0.0;
  double ttft_ms = 0.0;
};

struct QueryOutcome {
  Eigen::VectorXd response;
  std::string trace;
  std::vector<WeightedAdapter> active;
  std::vector<Hint> hints;
  QueryTiming timing;
};

/// Wires the embedder, store, registries and model together. Holds
/// references; the caller owns the components and their lifetimes.
///
/// The active set comes from a search restricted to the user's live grants,
/// so it depends only on permitted adapters. With hints enabled a second,
/// unrestricted search yields the candidate set O from which forbidden but
/// relevant adapters are reported.
class Pipeline {
 public:
  using Clock = std::chrono::steady_clock;

  Pipeline(const Embedder& embedder, const VectorStore& store, PermissionRegistry& permissions,
           const AdapterRegistry& adapters, const ReferenceModel& model)
      : embedder_(embedder), store_(store), permissions_(permissions), adapters_(adapters), model_(model) {}

  QueryOutcome query(const std::string& user_id, std::string_view text, const RetrievalConfig& config,
                     Clock::time_point received = Clock::now()) const {
    config.validate();
    if (tokenize(text).empty()) throw Error(ErrorCode::kEmptyInput, "query has no tokens");
    if (embedder_.dim() != store_.dim() || embedder_.dim() != model_.input_dim()) {
      throw Error(ErrorCode::kUnknownEmbedderDim, "embedder dim " + std::to_string(embedder_.dim()) +
                                                      " does not match store dim " + std::to_string(store_.dim()) +
                                                      " / model input " + std::to_string(model_.input_dim()));
    }
    QueryOutcome out;
    const auto t0 = Clock::now();
    const EmbeddingVector q = embedder_.embed(text);
    const auto t1 = Clock::now();

    const GrantSet grants = adapters_.live_subset(permissions_.lookup(user_id));
    const CandidateSet permitted = top_k_candidates(store_.search(q, config.fetch_k, grants), config.k);

    std::vector<ScoredAdapter> hint_candidates;
    if (config.hints_enabled) {
      const CandidateSet all = top_k_candidates(store_.search(q, config.fetch_k), config.k);
      hint_candidates = partition(ranked(all), grants).denied;
    }
    const auto t2 = Clock::now();

    out.active = build_plan(permitted, config.threshold);
    std::vector<MixPlan::Entry> entries;
    for (const auto& w : out.active) {
      AdapterPtr a = adapters_.get(w.id);
      if (!a) throw Error(ErrorCode::kUnknownId, w.id.str() + " vanished during the query");
      entries.push_back({std::move(a), w.weight});
    }
    const MixPlan plan(std::move(entries));
    out.response = model_.forward_mixed(to_input(q), plan);
    out.timing.ttft_ms = ms(received, Clock::now());

    for (const auto& c : hint_candidates) {
      AdapterPtr a = adapters_.get(c.id);
      if (a && a->hintable) out.hints.push_back({c.id, c.score, a->metadata});
    }
    out.timing.embed_ms = ms(t0, t1);
    out.timing.retrieve_ms = ms(t1, t2);
    out.trace = describe(out);
    return out;
  }

  /// Grants `granted` to the user (keeping existing grants) and re-runs the query.
  QueryOutcome hint_rerun(const std::string& user_id, std::string_view text, const RetrievalConfig& config,
                          const AdapterId& granted) const {
    GrantSet grants = permissions_.lookup(user_id);
    grants.insert(granted);
    permissions_.set_permissions(user_id, std::move(grants));
    return query(user_id, text, config);
  }

  /// Top-k chunks of a fetch, aggregated per adapter.
  static CandidateSet top_k_candidates(std::vector<ScoredChunk> fetched, std::size_t k) {
    if (fetched.size() > k) fetched.resize(k);
    return aggregate_scores(fetched);
  }

 private:
  static double ms(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
  }

  static Eigen::VectorXd to_input(const EmbeddingVector& q) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(q.dim()));
    for (std::size_t j = 0; j < q.dim(); ++j) x(static_cast<Eigen::Index>(j)) = q[j];
    return x;
  }

  static std::string describe(const QueryOutcome& o) {
    std::ostringstream os;
    os.precision(4);
    if (o.active.empty()) {
      os << "base model";
    } else {
      os << "base + " << o.active.size() << " adapter(s):";
      for (const auto& a : o.active) os << ' ' << a.id << '=' << a.weight;
    }
    if (!o.hints.empty()) {
      os << "; hints:";
      for (const auto& h : o.hints) os << ' ' << h.id;
    }
    return os.str();
  }

  const Embedder& embedder_;
  const VectorStore& store_;
  PermissionRegistry& permissions_;
  const AdapterRegistry& adapters_;
  const ReferenceModel& model_;
};

}  // namespace aclora
