// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "aclora/embedding.hpp"
#include "httplib.h"
#include "json.hpp"

namespace aclora {

/// Client for an external embedding service:
///   POST {base_url}/embed  {"texts": [...]}  ->  {"vectors": [[...]], "dim": N}
/// Responses are re-normalized locally and must agree with the configured dim.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(std::string base_url, std::size_t dim) : base_url_(std::move(base_url)), dim_(dim) {
    if (dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "embedder dim must be >= 1");
  }

  std::size_t dim() const override { return dim_; }

  EmbeddingVector embed(std::string_view text) const override {
    const std::string s(text);
    auto out = embed_batch(std::span<const std::string>(&s, 1));
    return std::move(out.front());
  }

  std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override {
    for (const auto& t : texts) {
      if (tokenize(t).empty()) throw Error(ErrorCode::kEmptyInput, "text has no tokens");
    }
    nlohmann::json body = {{"texts", texts}};
    httplib::Result res;
    {
      std::lock_guard lock(mu_);  // httplib::Client is not thread-safe
      if (!client_) {
        client_ = std::make_unique<httplib::Client>(base_url_);
        client_->set_read_timeout(30, 0);
      }
      res = client_->Post("/embed", body.dump(), "application/json");
    }
    if (!res) throw Error(ErrorCode::kRemote, "embed request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw Error(ErrorCode::kRemote, "embed service returned " + std::to_string(res->status));

    const auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("vectors") || !reply["vectors"].is_array()) {
      throw Error(ErrorCode::kRemote, "malformed embed response");
    }
    if (!reply.contains("dim") || !reply["dim"].is_number_unsigned() || reply["dim"].get<std::size_t>() != dim_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "embed service dim " + (reply.contains("dim") ? reply["dim"].dump() : std::string("missing")) +
                      " != configured " + std::to_string(dim_));
    }
    const auto& vectors = reply["vectors"];
    if (vectors.size() != texts.size()) throw Error(ErrorCode::kRemote, "embed response count mismatch");
    std::vector<EmbeddingVector> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) {
      auto values = v.get<std::vector<double>>();
      if (values.size() != dim_) throw Error(ErrorCode::kDimensionMismatch, "embed vector has wrong length");
      out.emplace_back(std::move(values));
    }
    return out;
  }

 private:
  std::string base_url_;
  std::size_t dim_;
  mutable std::mutex mu_;
  mutable std::unique_ptr<httplib::Client> client_;
};

}  // namespace aclora
