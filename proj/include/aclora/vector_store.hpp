// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "aclora/adapter_id.hpp"
#include "aclora/detail/container.hpp"
#include "aclora/embedding.hpp"

namespace aclora {

struct EmbeddedChunk {
  Chunk chunk;
  EmbeddingVector embedding;
  AdapterId adapter_tag;
};

enum class ChunkHandle : std::uint64_t {};

struct ScoredChunk {
  ChunkHandle handle{};
  double score = 0.0;
  AdapterId adapter_tag;
};

inline constexpr std::size_t kFetchAll = std::numeric_limits<std::size_t>::max();

/// Exact-scan cosine index over tagged chunks.
///
/// Embeddings are held as float32, the same precision they are persisted
/// with, so a saved and reloaded store produces bit-identical scores. Scores
/// accumulate in double. Removed rows are tombstoned and compacted lazily;
/// compaction keeps insertion order, which is also the tie-break order.
class VectorStore {
 public:
  explicit VectorStore(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "store dim must be >= 1");
  }

  VectorStore(VectorStore&& other) noexcept : dim_(other.dim_) {
    std::unique_lock lock(other.mu_);
    state_ = std::move(other.state_);
  }

  VectorStore& operator=(VectorStore&& other) noexcept {
    if (this != &other) {
      std::scoped_lock lock(mu_, other.mu_);
      dim_ = other.dim_;
      state_ = std::move(other.state_);
    }
    return *this;
  }

  std::size_t dim() const { return dim_; }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return state_.live;
  }

  ChunkHandle insert(const EmbeddedChunk& ec) {
    if (ec.embedding.dim() != dim_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "chunk embedding dim " + std::to_string(ec.embedding.dim()) + " != store dim " + std::to_string(dim_));
    }
    std::unique_lock lock(mu_);
    std::vector<float> row(dim_);
    for (std::size_t j = 0; j < dim_; ++j) row[j] = static_cast<float>(ec.embedding[j]);
    return append_locked(ec.chunk, ec.adapter_tag, row);
  }

  /// Removes every chunk carrying `tag`; cost is proportional to that tag's
  /// chunk count, not the store size.
  std::size_t remove_by_tag(const AdapterId& tag) {
    std::unique_lock lock(mu_);
    auto it = state_.by_tag.find(tag);
    if (it == state_.by_tag.end()) return 0;
    const std::size_t removed = it->second.size();
    for (const std::size_t r : it->second) {
      state_.rows[r].alive = false;
      state_.by_handle.erase(state_.rows[r].handle);
    }
    state_.by_tag.erase(it);
    state_.live -= removed;
    maybe_compact_locked();
    return removed;
  }

  /// Top-fetch_k live chunks by descending cosine; ties go to the earlier insert.
  std::vector<ScoredChunk> search(const EmbeddingVector& q, std::size_t fetch_k) const {
    check_query(q);
    std::shared_lock lock(mu_);
    std::vector<Candidate> cands;
    cands.reserve(state_.live);
    for (std::size_t r = 0; r < state_.rows.size(); ++r) {
      if (state_.rows[r].alive) cands.push_back({score_row(q, r), r});
    }
    return select_locked(std::move(cands), fetch_k);
  }

  /// As above, restricted to chunks whose tag is in `allowed_tags`. Only the
  /// rows of those tags are visited; the result equals an unfiltered search
  /// over a store that holds only those tags.
  std::vector<ScoredChunk> search(const EmbeddingVector& q, std::size_t fetch_k,
                                  const std::set<AdapterId>& allowed_tags) const {
    check_query(q);
    std::shared_lock lock(mu_);
    std::vector<Candidate> cands;
    for (const auto& tag : allowed_tags) {
      auto it = state_.by_tag.find(tag);
      if (it == state_.by_tag.end()) continue;
      for (const std::size_t r : it->second) cands.push_back({score_row(q, r), r});
    }
    return select_locked(std::move(cands), fetch_k);
  }

  std::optional<Chunk> chunk(ChunkHandle h) const {
    std::shared_lock lock(mu_);
    auto it = state_.by_handle.find(h);
    if (it == state_.by_handle.end()) return std::nullopt;
    return state_.rows[it->second].chunk;
  }

  std::size_t count_tag(const AdapterId& tag) const {
    std::shared_lock lock(mu_);
    auto it = state_.by_tag.find(tag);
    return it == state_.by_tag.end() ? 0 : it->second.size();
  }

  /// Live chunks of one document in seq_no order.
  std::vector<Chunk> chunks_for_doc(const std::string& doc_id) const {
    std::shared_lock lock(mu_);
    std::vector<Chunk> out;
    for (const auto& row : state_.rows) {
      if (row.alive && row.chunk.doc_id == doc_id) out.push_back(row.chunk);
    }
    std::stable_sort(out.begin(), out.end(), [](const Chunk& a, const Chunk& b) { return a.seq_no < b.seq_no; });
    return out;
  }

  std::vector<std::uint8_t> encode() const {
    std::shared_lock lock(mu_);
    nlohmann::json chunks = nlohmann::json::array();
    detail::FloatBlob blob;
    for (std::size_t r = 0; r < state_.rows.size(); ++r) {
      const Row& row = state_.rows[r];
      if (!row.alive) continue;
      chunks.push_back({{"doc_id", row.chunk.doc_id},
                        {"seq_no", row.chunk.seq_no},
                        {"token_count", row.chunk.token_count},
                        {"tag", row.tag.str()},
                        {"text", row.chunk.text}});
      for (std::size_t j = 0; j < dim_; ++j) blob.push(state_.embeddings[r * dim_ + j]);
    }
    nlohmann::json manifest = {{"dim", dim_}, {"count", state_.live}, {"chunks", std::move(chunks)}};
    return detail::encode_container(kMagic, std::move(manifest), blob.bytes());
  }

  static VectorStore decode(std::span<const std::uint8_t> bytes) {
    const auto c = detail::decode_container(kMagic, bytes);
    const auto dim = detail::manifest_get<std::size_t>(c.manifest, "dim");
    const auto count = detail::manifest_get<std::size_t>(c.manifest, "count");
    const auto& chunks = c.manifest.at("chunks");
    if (dim == 0 || !chunks.is_array() || chunks.size() != count || c.blob.size() != count * dim * 4) {
      throw Error(ErrorCode::kCorruptFile, "store manifest disagrees with blob");
    }
    VectorStore store(dim);
    detail::FloatCursor cursor(c.blob);
    std::vector<float> row(dim);
    for (const auto& m : chunks) {
      Chunk ch;
      ch.doc_id = detail::manifest_get<std::string>(m, "doc_id");
      ch.seq_no = detail::manifest_get<std::uint32_t>(m, "seq_no");
      ch.token_count = detail::manifest_get<std::uint32_t>(m, "token_count");
      ch.text = detail::manifest_get<std::string>(m, "text");
      const auto tag = detail::manifest_get<std::string>(m, "tag");
      if (!AdapterId::is_valid(tag)) throw Error(ErrorCode::kCorruptFile, "bad tag '" + tag + "'");
      for (std::size_t j = 0; j < dim; ++j) row[j] = static_cast<float>(cursor.next());
      store.append_locked(std::move(ch), AdapterId(tag), row);
    }
    return store;
  }

  void save(const std::filesystem::path& path) const { detail::write_file_atomic(path, encode()); }
  static VectorStore load(const std::filesystem::path& path) { return decode(detail::read_file(path)); }

 private:
  static constexpr std::array<char, 4> kMagic{'A', 'C', 'S', 'T'};

  struct Row {
    ChunkHandle handle;
    Chunk chunk;
    AdapterId tag;
    bool alive = true;
  };

  struct Candidate {
    double score;
    std::size_t row;
  };

  struct State {
    std::vector<Row> rows;
    std::vector<float> embeddings;  // rows.size() * dim, row-major
    std::unordered_map<AdapterId, std::vector<std::size_t>> by_tag;
    std::unordered_map<ChunkHandle, std::size_t> by_handle;
    std::size_t live = 0;
    std::uint64_t next_handle = 0;
  };

  void check_query(const EmbeddingVector& q) const {
    if (q.dim() != dim_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "query dim " + std::to_string(q.dim()) + " != store dim " + std::to_string(dim_));
    }
  }

  double score_row(const EmbeddingVector& q, std::size_t r) const {
    const float* e = state_.embeddings.data() + r * dim_;
    double dot = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) dot += q[j] * static_cast<double>(e[j]);
    return std::clamp(dot, -1.0, 1.0);
  }

  std::vector<ScoredChunk> select_locked(std::vector<Candidate> cands, std::size_t fetch_k) const {
    const auto before = [](const Candidate& a, const Candidate& b) {
      return a.score != b.score ? a.score > b.score : a.row < b.row;
    };
    const std::size_t take = std::min(fetch_k, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(), before);
    std::vector<ScoredChunk> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
      const Row& row = state_.rows[cands[i].row];
      out.push_back(ScoredChunk{row.handle, cands[i].score, row.tag});
    }
    return out;
  }

  ChunkHandle append_locked(Chunk chunk, const AdapterId& tag, std::span<const float> embedding) {
    const auto handle = static_cast<ChunkHandle>(state_.next_handle++);
    const std::size_t r = state_.rows.size();
    state_.rows.push_back(Row{handle, std::move(chunk), tag, true});
    state_.embeddings.insert(state_.embeddings.end(), embedding.begin(), embedding.end());
    state_.by_tag[tag].push_back(r);
    state_.by_handle.emplace(handle, r);
    ++state_.live;
    return handle;
  }

  void maybe_compact_locked() {
    const std::size_t dead = state_.rows.size() - state_.live;
    if (dead < 64 || dead < state_.live) return;
    State fresh;
    fresh.next_handle = state_.next_handle;
    for (std::size_t r = 0; r < state_.rows.size(); ++r) {
      Row& row = state_.rows[r];
      if (!row.alive) continue;
      const std::size_t nr = fresh.rows.size();
      fresh.by_tag[row.tag].push_back(nr);
      fresh.by_handle.emplace(row.handle, nr);
      fresh.embeddings.insert(fresh.embeddings.end(), state_.embeddings.begin() + static_cast<std::ptrdiff_t>(r * dim_),
                              state_.embeddings.begin() + static_cast<std::ptrdiff_t>((r + 1) * dim_));
      fresh.rows.push_back(std::move(row));
      ++fresh.live;
    }
    state_ = std::move(fresh);
  }

  std::size_t dim_;
  State state_;
  mutable std::shared_mutex mu_;
};

}  // namespace aclora
