// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "aclora/adapter_id.hpp"
#include "aclora/detail/container.hpp"
#include "aclora/detail/xorshift.hpp"

namespace aclora {

struct LayerShape {
  std::size_t d_in = 0;
  std::size_t d_out = 0;

  bool operator==(const LayerShape&) const = default;
};

/// Shapes of the reference model's dense layers, input side first.
using ModelSignature = std::vector<LayerShape>;

/// One adapted layer: A is r x d_in (down-projection), B is d_out x r.
struct LowRankLayerDelta {
  std::size_t layer_index = 0;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
};

struct LowRankAdapter {
  AdapterId id;
  std::size_t rank = 0;
  double alpha = 0.0;
  std::vector<LowRankLayerDelta> deltas;
  std::map<std::string, std::string> metadata;
  bool hintable = true;

  double scale() const { return alpha / static_cast<double>(rank); }

  const LowRankLayerDelta* find_layer(std::size_t layer_index) const {
    for (const auto& d : deltas) {
      if (d.layer_index == layer_index) return &d;
    }
    return nullptr;
  }

  /// Internal consistency plus agreement with `signature`. Throws ShapeMismatch.
  void validate(const ModelSignature& signature) const {
    auto fail = [this](const std::string& why) { throw Error(ErrorCode::kShapeMismatch, id.str() + ": " + why); };
    if (rank == 0) fail("rank must be >= 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha must be positive and finite");
    std::set<std::size_t> seen;
    for (const auto& d : deltas) {
      const std::string where = "layer " + std::to_string(d.layer_index);
      if (!seen.insert(d.layer_index).second) fail(where + " adapted twice");
      if (d.layer_index >= signature.size()) fail(where + " does not exist in the model");
      const LayerShape shape = signature[d.layer_index];
      if (static_cast<std::size_t>(d.A.rows()) != rank || static_cast<std::size_t>(d.B.cols()) != rank) {
        fail(where + " factors disagree with rank " + std::to_string(rank));
      }
      if (static_cast<std::size_t>(d.A.cols()) != shape.d_in || static_cast<std::size_t>(d.B.rows()) != shape.d_out) {
        fail(where + " factors do not match layer " + std::to_string(shape.d_in) + "->" + std::to_string(shape.d_out));
      }
      if (rank > std::min(shape.d_in, shape.d_out)) fail(where + " rank exceeds min(d_in, d_out)");
      if (!d.A.allFinite() || !d.B.allFinite()) fail(where + " has non-finite entries");
    }
  }
};

struct EffectiveDelta {
  std::size_t layer_index = 0;
  Eigen::MatrixXd delta;  // (alpha / r) * B * A
};

inline EffectiveDelta effective_delta(const LowRankAdapter& adapter, std::size_t layer_index) {
  const LowRankLayerDelta* d = adapter.find_layer(layer_index);
  if (!d) {
    throw Error(ErrorCode::kLayerNotAdapted, adapter.id.str() + " does not adapt layer " + std::to_string(layer_index));
  }
  return EffectiveDelta{layer_index, adapter.scale() * (d->B * d->A)};
}

namespace detail {
inline constexpr std::array<char, 4> kAdapterMagic{'A', 'C', 'A', 'D'};
}

/// Deterministic bytes: equal adapters always serialize identically.
inline std::vector<std::uint8_t> encode_adapter(const LowRankAdapter& a) {
  nlohmann::json layers = nlohmann::json::array();
  detail::FloatBlob blob;
  for (const auto& d : a.deltas) {
    layers.push_back({{"layer_index", d.layer_index}, {"d_in", d.A.cols()}, {"d_out", d.B.rows()}});
    for (Eigen::Index i = 0; i < d.A.rows(); ++i)
      for (Eigen::Index j = 0; j < d.A.cols(); ++j) blob.push(d.A(i, j));
    for (Eigen::Index i = 0; i < d.B.rows(); ++i)
      for (Eigen::Index j = 0; j < d.B.cols(); ++j) blob.push(d.B(i, j));
  }
  nlohmann::json manifest = {{"id", a.id.str()},   {"r", a.rank},          {"alpha", a.alpha},
                             {"hintable", a.hintable}, {"metadata", a.metadata}, {"layers", std::move(layers)}};
  return detail::encode_container(detail::kAdapterMagic, std::move(manifest), blob.bytes());
}

inline LowRankAdapter decode_adapter(std::span<const std::uint8_t> bytes) {
  const auto c = detail::decode_container(detail::kAdapterMagic, bytes);
  const auto& m = c.manifest;
  LowRankAdapter a;
  const auto id = detail::manifest_get<std::string>(m, "id");
  if (!AdapterId::is_valid(id)) throw Error(ErrorCode::kCorruptFile, "bad adapter id '" + id + "'");
  a.id = AdapterId(id);
  a.rank = detail::manifest_get<std::size_t>(m, "r");
  a.alpha = detail::manifest_get<double>(m, "alpha");
  a.hintable = detail::manifest_get<bool>(m, "hintable");
  a.metadata = detail::manifest_get<std::map<std::string, std::string>>(m, "metadata");
  detail::FloatCursor cursor(c.blob);
  for (const auto& l : m.at("layers")) {
    LowRankLayerDelta d;
    d.layer_index = detail::manifest_get<std::size_t>(l, "layer_index");
    const auto d_in = detail::manifest_get<Eigen::Index>(l, "d_in");
    const auto d_out = detail::manifest_get<Eigen::Index>(l, "d_out");
    const auto r = static_cast<Eigen::Index>(a.rank);
    if (d_in <= 0 || d_out <= 0 || r <= 0) throw Error(ErrorCode::kCorruptFile, "non-positive layer dims");
    d.A.resize(r, d_in);
    d.B.resize(d_out, r);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < d_in; ++j) d.A(i, j) = cursor.next();
    for (Eigen::Index i = 0; i < d_out; ++i)
      for (Eigen::Index j = 0; j < r; ++j) d.B(i, j) = cursor.next();
    a.deltas.push_back(std::move(d));
  }
  if (!cursor.exhausted()) throw Error(ErrorCode::kCorruptFile, "trailing bytes in adapter blob");
  return a;
}

inline void save_adapter(const LowRankAdapter& a, const std::filesystem::path& path) {
  detail::write_file_atomic(path, encode_adapter(a));
}

inline LowRankAdapter load_adapter(const std::filesystem::path& path) { return decode_adapter(detail::read_file(path)); }

inline constexpr std::string_view kAdapterExtension = ".acadapter";

/// Seeded adapter over the given layers. Entries are drawn uniformly from
/// [-init_scale, init_scale) and are exactly representable as float32, so the
/// adapter survives a save/load round trip unchanged.
inline LowRankAdapter make_random_adapter(const AdapterId& id, const ModelSignature& signature,
                                          const std::vector<std::size_t>& layers, std::size_t rank, double alpha,
                                          std::uint64_t seed, float init_scale = 0.125F) {
  detail::Xorshift64Star rng(seed);
  LowRankAdapter a;
  a.id = id;
  a.rank = rank;
  a.alpha = alpha;
  const auto draw = [&] { return static_cast<double>(rng.uniform_symmetric() * init_scale); };
  for (const std::size_t l : layers) {
    if (l >= signature.size()) throw Error(ErrorCode::kShapeMismatch, "layer index out of range");
    LowRankLayerDelta d;
    d.layer_index = l;
    d.A = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(rank),
                                       static_cast<Eigen::Index>(signature[l].d_in), draw);
    d.B = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(signature[l].d_out),
                                       static_cast<Eigen::Index>(rank), draw);
    a.deltas.push_back(std::move(d));
  }
  return a;
}

using AdapterPtr = std::shared_ptr<const LowRankAdapter>;

/// Registry of adapters validated against one model signature. Stored
/// adapters are immutable; callers hold shared snapshots, so unregistering
/// never disturbs a forward pass already in flight.
class AdapterRegistry {
 public:
  explicit AdapterRegistry(ModelSignature signature) : signature_(std::move(signature)) {}

  AdapterRegistry(AdapterRegistry&& other) noexcept {
    std::unique_lock lock(other.mu_);
    signature_ = std::move(other.signature_);
    adapters_ = std::move(other.adapters_);
  }

  const ModelSignature& signature() const { return signature_; }

  void register_adapter(LowRankAdapter adapter) {
    adapter.validate(signature_);
    auto ptr = std::make_shared<const LowRankAdapter>(std::move(adapter));
    std::unique_lock lock(mu_);
    if (adapters_.contains(ptr->id)) throw Error(ErrorCode::kDuplicateId, ptr->id.str() + " already registered");
    adapters_.emplace(ptr->id, std::move(ptr));
  }

  void unregister(const AdapterId& id) {
    std::unique_lock lock(mu_);
    if (adapters_.erase(id) == 0) throw Error(ErrorCode::kUnknownId, id.str() + " is not registered");
  }

  /// Null when absent.
  AdapterPtr get(const AdapterId& id) const {
    std::shared_lock lock(mu_);
    auto it = adapters_.find(id);
    return it == adapters_.end() ? nullptr : it->second;
  }

  bool contains(const AdapterId& id) const {
    std::shared_lock lock(mu_);
    return adapters_.contains(id);
  }

  std::size_t size() const {
    std::shared_lock lock(mu_);
    return adapters_.size();
  }

  std::vector<AdapterId> ids() const {
    std::vector<AdapterId> out;
    {
      std::shared_lock lock(mu_);
      out.reserve(adapters_.size());
      for (const auto& [id, _] : adapters_) out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Subset of `wanted` that is currently registered.
  std::set<AdapterId> live_subset(const std::set<AdapterId>& wanted) const {
    std::set<AdapterId> out;
    std::shared_lock lock(mu_);
    for (const auto& id : wanted) {
      if (adapters_.contains(id)) out.insert(id);
    }
    return out;
  }

  void save_directory(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::shared_lock lock(mu_);
    for (const auto& [id, a] : adapters_) save_adapter(*a, dir / (id.str() + std::string(kAdapterExtension)));
  }

  /// Registers every *.acadapter file in `dir`, in file-name order.
  static AdapterRegistry load_directory(const std::filesystem::path& dir, ModelSignature signature) {
    AdapterRegistry reg(std::move(signature));
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == kAdapterExtension) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) reg.register_adapter(load_adapter(f));
    return reg;
  }

 private:
  ModelSignature signature_;
  std::unordered_map<AdapterId, AdapterPtr> adapters_;
  mutable std::shared_mutex mu_;
};

}  // namespace aclora
