// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

// The reference model (a dense tanh MLP) and the three ways of running it
// with adapters: similarity-weighted mixing, output averaging, and weight
// merging.

#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "aclora/adapters.hpp"
#include "aclora/detail/container.hpp"
#include "aclora/detail/xorshift.hpp"

namespace aclora {

struct DenseLayer {
  Eigen::MatrixXd W;  // d_out x d_in
  Eigen::VectorXd b;  // d_out
};

/// Adapters paired with mixing weights. Weights lie in [0, 1] and sum to 1
/// within 1e-9; a plan with no entries is the empty plan (base model only).
class MixPlan {
 public:
  struct Entry {
    AdapterPtr adapter;
    double weight = 0.0;
  };

  static constexpr double kSumTolerance = 1e-9;

  MixPlan() = default;

  explicit MixPlan(std::vector<Entry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) return;
    double sum = 0.0;
    for (const auto& e : entries_) {
      if (!e.adapter) throw Error(ErrorCode::kInvalidPlan, "plan entry without adapter");
      if (!std::isfinite(e.weight) || e.weight < 0.0 || e.weight > 1.0) {
        throw Error(ErrorCode::kInvalidPlan, "weight " + std::to_string(e.weight) + " outside [0, 1]");
      }
      sum += e.weight;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      throw Error(ErrorCode::kInvalidPlan, "weights sum to " + std::to_string(sum));
    }
  }

  static MixPlan uniform(const std::vector<AdapterPtr>& adapters) {
    std::vector<Entry> entries;
    for (const auto& a : adapters) entries.push_back({a, 1.0 / static_cast<double>(adapters.size())});
    return MixPlan(std::move(entries));
  }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

class ReferenceModel {
 public:
  ReferenceModel(std::vector<DenseLayer> layers, std::uint64_t seed = 0) : layers_(std::move(layers)), seed_(seed) {
    if (layers_.empty()) throw Error(ErrorCode::kShapeMismatch, "model needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      if (layer.W.rows() == 0 || layer.W.cols() == 0 || layer.b.size() != layer.W.rows()) {
        throw Error(ErrorCode::kShapeMismatch, "layer " + std::to_string(l) + " has inconsistent W/b");
      }
      if (l > 0 && layer.W.cols() != layers_[l - 1].W.rows()) {
        throw Error(ErrorCode::kShapeMismatch, "layer " + std::to_string(l) + " does not chain");
      }
      if (!layer.W.allFinite() || !layer.b.allFinite()) {
        throw Error(ErrorCode::kShapeMismatch, "layer " + std::to_string(l) + " has non-finite weights");
      }
    }
  }

  /// Seeded initialization: W entries uniform in [-1/sqrt(d_in), 1/sqrt(d_in)),
  /// b uniform in [-0.1, 0.1), all float32-exact.
  static ReferenceModel random(const ModelSignature& signature, std::uint64_t seed) {
    detail::Xorshift64Star rng(seed);
    std::vector<DenseLayer> layers;
    for (const auto& s : signature) {
      const float w_scale = 1.0F / std::sqrt(static_cast<float>(s.d_in));
      DenseLayer layer;
      layer.W = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(s.d_out), static_cast<Eigen::Index>(s.d_in),
                                             [&] { return static_cast<double>(rng.uniform_symmetric() * w_scale); });
      layer.b = Eigen::VectorXd::NullaryExpr(static_cast<Eigen::Index>(s.d_out),
                                             [&] { return static_cast<double>(rng.uniform_symmetric() * 0.1F); });
      layers.push_back(std::move(layer));
    }
    return ReferenceModel(std::move(layers), seed);
  }

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t input_dim() const { return static_cast<std::size_t>(layers_.front().W.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(layers_.back().W.rows()); }

  ModelSignature signature() const {
    ModelSignature sig;
    for (const auto& l : layers_) sig.push_back({static_cast<std::size_t>(l.W.cols()), static_cast<std::size_t>(l.W.rows())});
    return sig;
  }

  Eigen::VectorXd forward_base(const Eigen::VectorXd& x) const {
    check_input(x);
    Eigen::VectorXd h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::VectorXd z = layers_[l].W * h + layers_[l].b;
      h = activate(std::move(z), l);
    }
    return h;
  }

  /// At every layer: z = W h + b + sum_i S_i (alpha_i / r_i) B_i (A_i h),
  /// with tanh between layers. Adapters enter before the nonlinearity, and
  /// only the adapters named in the plan are ever read.
  Eigen::VectorXd forward_mixed(const Eigen::VectorXd& x, const MixPlan& plan) const {
    check_input(x);
    check_plan(plan);
    Eigen::VectorXd h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Eigen::VectorXd z = layers_[l].W * h + layers_[l].b;
      for (const auto& e : plan.entries()) {
        const LowRankLayerDelta* d = e.adapter->find_layer(l);
        if (!d) continue;
        const Eigen::VectorXd down = d->A * h;
        z.noalias() += (e.weight * e.adapter->scale()) * (d->B * down);
      }
      h = activate(std::move(z), l);
    }
    return h;
  }

  /// Training-free baseline: uniform 1/n output averaging.
  Eigen::VectorXd forward_avg_baseline(const Eigen::VectorXd& x, const std::vector<AdapterPtr>& adapters) const {
    if (adapters.empty()) return forward_base(x);
    return forward_mixed(x, MixPlan::uniform(adapters));
  }

  /// Training-free baseline: materializes W + sum_i w_i (alpha_i / r_i) B_i A_i.
  ReferenceModel merge_weights(const MixPlan& plan) const {
    check_plan(plan);
    std::vector<DenseLayer> merged = layers_;
    for (const auto& e : plan.entries()) {
      for (const auto& d : e.adapter->deltas) {
        merged[d.layer_index].W.noalias() += (e.weight * e.adapter->scale()) * (d.B * d.A);
      }
    }
    return ReferenceModel(std::move(merged), seed_);
  }

  ReferenceModel merge_weights(const std::vector<AdapterPtr>& adapters, const std::vector<double>& weights) const {
    if (adapters.size() != weights.size()) throw Error(ErrorCode::kInvalidPlan, "adapter/weight count mismatch");
    std::vector<MixPlan::Entry> entries;
    for (std::size_t i = 0; i < adapters.size(); ++i) entries.push_back({adapters[i], weights[i]});
    return merge_weights(MixPlan(std::move(entries)));
  }

  std::vector<std::uint8_t> encode() const {
    nlohmann::json sig = nlohmann::json::array();
    detail::FloatBlob blob;
    for (const auto& l : layers_) {
      sig.push_back({l.W.cols(), l.W.rows()});
      for (Eigen::Index i = 0; i < l.W.rows(); ++i)
        for (Eigen::Index j = 0; j < l.W.cols(); ++j) blob.push(l.W(i, j));
      for (Eigen::Index i = 0; i < l.b.size(); ++i) blob.push(l.b(i));
    }
    nlohmann::json manifest = {{"signature", std::move(sig)}, {"nonlinearity", "tanh"}, {"seed", seed_}};
    return detail::encode_container(kMagic, std::move(manifest), blob.bytes());
  }

  static ReferenceModel decode(std::span<const std::uint8_t> bytes) {
    const auto c = detail::decode_container(kMagic, bytes);
    if (detail::manifest_get<std::string>(c.manifest, "nonlinearity") != "tanh") {
      throw Error(ErrorCode::kCorruptFile, "unsupported nonlinearity");
    }
    const auto sig = detail::manifest_get<std::vector<std::pair<Eigen::Index, Eigen::Index>>>(c.manifest, "signature");
    detail::FloatCursor cursor(c.blob);
    std::vector<DenseLayer> layers;
    for (const auto& [d_in, d_out] : sig) {
      if (d_in <= 0 || d_out <= 0) throw Error(ErrorCode::kCorruptFile, "non-positive layer dims");
      DenseLayer layer{Eigen::MatrixXd(d_out, d_in), Eigen::VectorXd(d_out)};
      for (Eigen::Index i = 0; i < d_out; ++i)
        for (Eigen::Index j = 0; j < d_in; ++j) layer.W(i, j) = cursor.next();
      for (Eigen::Index i = 0; i < d_out; ++i) layer.b(i) = cursor.next();
      layers.push_back(std::move(layer));
    }
    if (!cursor.exhausted()) throw Error(ErrorCode::kCorruptFile, "trailing bytes in model blob");
    try {
      return ReferenceModel(std::move(layers), detail::manifest_get<std::uint64_t>(c.manifest, "seed"));
    } catch (const Error& e) {
      throw Error(ErrorCode::kCorruptFile, e.what());
    }
  }

  void save(const std::filesystem::path& path) const { detail::write_file_atomic(path, encode()); }
  static ReferenceModel load(const std::filesystem::path& path) { return decode(detail::read_file(path)); }

 private:
  static constexpr std::array<char, 4> kMagic{'A', 'C', 'M', 'D'};

  Eigen::VectorXd activate(Eigen::VectorXd z, std::size_t l) const {
    if (l + 1 < layers_.size()) z = z.array().tanh().matrix();
    return z;
  }

  void check_input(const Eigen::VectorXd& x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "input dim " + std::to_string(x.size()) + " != model input " + std::to_string(input_dim()));
    }
  }

  void check_plan(const MixPlan& plan) const {
    const ModelSignature sig = signature();
    for (const auto& e : plan.entries()) e.adapter->validate(sig);
  }

  std::vector<DenseLayer> layers_;
  std::uint64_t seed_ = 0;
};

/// Single-head self-attention over a token matrix (one row per position),
/// used to check that adapter mixing carries over to non-MLP shapes. Its four
/// d x d projections are adapter layers 0..3: query, key, value, output.
class AttentionBlock {
 public:
  enum Projection : std::size_t { kQuery = 0, kKey = 1, kValue = 2, kOutput = 3 };

  explicit AttentionBlock(std::array<DenseLayer, 4> proj) : proj_(std::move(proj)) {
    const auto d = proj_[0].W.rows();
    for (const auto& p : proj_) {
      if (p.W.rows() != d || p.W.cols() != d || p.b.size() != d || d == 0) {
        throw Error(ErrorCode::kShapeMismatch, "attention projections must all be square with equal size");
      }
    }
  }

  static AttentionBlock random(std::size_t d, std::uint64_t seed) {
    const auto m = ReferenceModel::random(ModelSignature(4, LayerShape{d, d}), seed);
    return AttentionBlock({m.layers()[0], m.layers()[1], m.layers()[2], m.layers()[3]});
  }

  std::size_t dim() const { return static_cast<std::size_t>(proj_[0].W.rows()); }
  ModelSignature signature() const { return ModelSignature(4, LayerShape{dim(), dim()}); }
  const std::array<DenseLayer, 4>& projections() const { return proj_; }

  Eigen::MatrixXd forward_base(const Eigen::MatrixXd& x) const { return forward_mixed(x, MixPlan{}); }

  /// softmax(Q K^T / sqrt(d)) V, then the output projection; every projection
  /// gets the same weighted low-rank terms as a dense layer.
  Eigen::MatrixXd forward_mixed(const Eigen::MatrixXd& x, const MixPlan& plan) const {
    if (static_cast<std::size_t>(x.cols()) != dim() || x.rows() == 0) {
      throw Error(ErrorCode::kDimensionMismatch, "attention input must be T x " + std::to_string(dim()));
    }
    const ModelSignature sig = signature();
    for (const auto& e : plan.entries()) e.adapter->validate(sig);
    const Eigen::MatrixXd q = project(x, kQuery, plan);
    const Eigen::MatrixXd k = project(x, kKey, plan);
    const Eigen::MatrixXd v = project(x, kValue, plan);
    Eigen::MatrixXd a = (q * k.transpose()) / std::sqrt(static_cast<double>(dim()));
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      const double mx = a.row(r).maxCoeff();
      a.row(r) = (a.row(r).array() - mx).exp().matrix();
      a.row(r) /= a.row(r).sum();
    }
    return project(a * v, kOutput, plan);
  }

  AttentionBlock merge_weights(const MixPlan& plan) const {
    const ModelSignature sig = signature();
    std::array<DenseLayer, 4> merged = proj_;
    for (const auto& e : plan.entries()) {
      e.adapter->validate(sig);
      for (const auto& d : e.adapter->deltas) {
        merged[d.layer_index].W.noalias() += (e.weight * e.adapter->scale()) * (d.B * d.A);
      }
    }
    return AttentionBlock(std::move(merged));
  }

 private:
  // Rows are positions: y = x W^T + b^T (+ low-rank terms).
  Eigen::MatrixXd project(const Eigen::MatrixXd& x, std::size_t p, const MixPlan& plan) const {
    Eigen::MatrixXd y = x * proj_[p].W.transpose();
    y.rowwise() += proj_[p].b.transpose();
    for (const auto& e : plan.entries()) {
      const LowRankLayerDelta* d = e.adapter->find_layer(p);
      if (!d) continue;
      y.noalias() += (e.weight * e.adapter->scale()) * ((x * d->A.transpose()) * d->B.transpose());
    }
    return y;
  }

  std::array<DenseLayer, 4> proj_;
};

}  // namespace aclora
