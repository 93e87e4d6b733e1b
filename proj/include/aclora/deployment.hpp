// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "aclora/adapters.hpp"
#include "aclora/embedding.hpp"
#include "aclora/model.hpp"
#include "aclora/permissions.hpp"
#include "aclora/pipeline.hpp"
#include "aclora/vector_store.hpp"

namespace aclora {

/// Embeds each chunk of `text` and stores it under `tag`. Returns the number
/// of chunks inserted. Nothing is inserted if any chunk fails to embed.
inline std::size_t ingest_document(const Embedder& embedder, VectorStore& store, const std::string& doc_id,
                                   std::string_view text, const AdapterId& tag,
                                   std::size_t chunk_size = kDefaultChunkSize) {
  const auto chunks = chunk_document(text, chunk_size, doc_id);
  std::vector<EmbeddingVector> vectors;
  vectors.reserve(chunks.size());
  for (const auto& c : chunks) vectors.push_back(embedder.embed(c.text));
  for (std::size_t i = 0; i < chunks.size(); ++i) store.insert({chunks[i], vectors[i], tag});
  return chunks.size();
}

struct DeploymentPaths {
  std::filesystem::path store;        // .acstore
  std::filesystem::path adapters_dir;  // directory of .acadapter files
  std::filesystem::path permissions;  // .acperm
  std::filesystem::path model;        // .acmodel

  /// Conventional layout under one directory.
  static DeploymentPaths under(const std::filesystem::path& dir) {
    return {dir / "docs.acstore", dir / "adapters", dir / "users.acperm", dir / "reference.acmodel"};
  }
};

/// The full component set behind one serving instance.
struct Deployment {
  std::unique_ptr<Embedder> embedder;
  VectorStore store;
  PermissionRegistry permissions;
  AdapterRegistry adapters;
  ReferenceModel model;

  Pipeline pipeline() { return Pipeline(*embedder, store, permissions, adapters, model); }

  void save(const DeploymentPaths& paths) const {
    for (const auto& p : {paths.store, paths.permissions, paths.model}) {
      if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    }
    store.save(paths.store);
    adapters.save_directory(paths.adapters_dir);
    permissions.save(paths.permissions);
    model.save(paths.model);
  }

  static Deployment load(const DeploymentPaths& paths, std::unique_ptr<Embedder> embedder) {
    auto model = ReferenceModel::load(paths.model);
    auto signature = model.signature();
    auto store = VectorStore::load(paths.store);
    if (store.dim() != embedder->dim()) {
      throw Error(ErrorCode::kUnknownEmbedderDim, "store dim " + std::to_string(store.dim()) + " != embedder dim " +
                                                      std::to_string(embedder->dim()));
    }
    return Deployment{std::move(embedder), std::move(store), PermissionRegistry::load(paths.permissions),
                      AdapterRegistry::load_directory(paths.adapters_dir, std::move(signature)), std::move(model)};
  }
};

}  // namespace aclora
