// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

// Word tokenization, fixed-size chunking, unit-norm embeddings and the
// built-in feature-hashing embedder.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aclora/error.hpp"

namespace aclora {

/// Whitespace-delimited word tokens in source order. Never holds empty tokens.
using TokenSequence = std::vector<std::string>;

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline TokenSequence tokenize(std::string_view text) {
  TokenSequence tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

inline std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

struct Chunk {
  std::string doc_id;
  std::uint32_t seq_no = 0;
  std::string text;  // tokens re-joined with single spaces
  std::uint32_t token_count = 0;

  bool operator==(const Chunk&) const = default;
};

inline constexpr std::size_t kDefaultChunkSize = 100;

/// Splits into consecutive windows of chunk_size tokens; only the last may be
/// shorter. Whitespace-only text yields no chunks.
inline std::vector<Chunk> chunk_document(std::string_view text, std::size_t chunk_size,
                                         std::string_view doc_id = {}) {
  if (chunk_size == 0) throw Error(ErrorCode::kInvalidArgument, "chunk_size must be >= 1");
  const TokenSequence tokens = tokenize(text);
  std::vector<Chunk> chunks;
  for (std::size_t start = 0; start < tokens.size(); start += chunk_size) {
    const std::size_t len = std::min(chunk_size, tokens.size() - start);
    chunks.push_back(Chunk{std::string(doc_id), static_cast<std::uint32_t>(chunks.size()),
                           join_tokens(std::span(tokens).subspan(start, len)),
                           static_cast<std::uint32_t>(len)});
  }
  return chunks;
}

/// A unit-L2-norm real vector. Construction normalizes; zero vectors throw.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error(ErrorCode::kInvalidArgument, "embedding dim must be >= 1");
    double sq = 0.0;
    for (const double v : values_) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "embedding value not finite");
      sq += v * v;
    }
    if (sq == 0.0) throw Error(ErrorCode::kInvalidArgument, "zero vector has no direction");
    const double norm = std::sqrt(sq);
    for (double& v : values_) v /= norm;
  }

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

/// Dot product of two unit vectors, clamped to [-1, 1]. Each term a_j*b_j
/// commutes exactly, so cosine(a, b) == cosine(b, a) bit-for-bit.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "cosine of dim " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  double dot = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j) dot += a[j] * b[j];
  return std::clamp(dot, -1.0, 1.0);
}

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  /// Throws EmptyInput when text has no tokens.
  virtual EmbeddingVector embed(std::string_view text) const = 0;

  virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
  }
};

/// Signed feature hashing over word tokens.
///
/// For token w: h = splitmix64(fnv1a64(seed_le8 || bytes(w))); the token adds
/// sign to coordinate h mod dim, where sign = -1 if bit 63 of h is set, +1
/// otherwise. The count vector is then L2-normalized, so repeating the whole
/// text does not change the direction.
class HashEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kDefaultDim = 256;
  static constexpr std::uint64_t kDefaultSeed = 0x5EED;

  explicit HashEmbedder(std::size_t dim = kDefaultDim, std::uint64_t seed = kDefaultSeed)
      : dim_(dim), seed_(seed) {
    if (dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "embedder dim must be >= 1");
  }

  std::size_t dim() const override { return dim_; }
  std::uint64_t seed() const { return seed_; }

  struct Slot {
    std::size_t index;
    double sign;
  };

  Slot slot(std::string_view token) const {
    const std::uint64_t h = mix(fnv1a(token));
    return Slot{static_cast<std::size_t>(h % dim_), (h >> 63) ? -1.0 : 1.0};
  }

  EmbeddingVector embed(std::string_view text) const override {
    const TokenSequence tokens = tokenize(text);
    if (tokens.empty()) throw Error(ErrorCode::kEmptyInput, "text has no tokens");
    std::vector<double> v(dim_, 0.0);
    for (const auto& t : tokens) {
      const Slot s = slot(t);
      v[s.index] += s.sign;
    }
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
      throw Error(ErrorCode::kEmptyInput, "token hashes cancel to a zero vector");
    }
    return EmbeddingVector(std::move(v));
  }

 private:
  std::uint64_t fnv1a(std::string_view token) const {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    auto feed = [&h](std::uint8_t byte) {
      h ^= byte;
      h *= 0x100000001B3ULL;
    };
    for (int i = 0; i < 8; ++i) feed(static_cast<std::uint8_t>(seed_ >> (8 * i)));
    for (const char c : token) feed(static_cast<std::uint8_t>(c));
    return h;
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::size_t dim_;
  std::uint64_t seed_;
};

}  // namespace aclora
