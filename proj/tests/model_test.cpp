// Copyright 2026 The aclora Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "aclora/model.hpp"

namespace aclora {
namespace {

ReferenceModel identity_model(std::size_t layers, std::size_t dim = 2) {
  std::vector<DenseLayer> ls;
  for (std::size_t l = 0; l < layers; ++l) {
    ls.push_back({Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)),
                  Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))});
  }
  return ReferenceModel(std::move(ls));
}

AdapterPtr delta_adapter(const std::string& id, Eigen::MatrixXd A, Eigen::MatrixXd B) {
  auto a = std::make_shared<LowRankAdapter>();
  a->id = AdapterId(id);
  a->rank = static_cast<std::size_t>(A.rows());
  a->alpha = static_cast<double>(a->rank);
  a->deltas.push_back({0, std::move(A), std::move(B)});
  return a;
}

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-12);
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (const double d : v) x(i++) = d;
  return x;
}

TEST(ForwardBase, HandEvaluated) {
  EXPECT_EQ(identity_model(1).forward_base(vec({1, 2})), vec({1, 2}));

  std::vector<DenseLayer> zero{{Eigen::MatrixXd::Zero(2, 2), vec({0.5, -1.5})}};
  EXPECT_EQ(ReferenceModel(zero).forward_base(vec({3, 4})), vec({0.5, -1.5}));

  const auto y = identity_model(2).forward_base(vec({1, 2}));
  EXPECT_NEAR(y(0), std::tanh(1.0), 1e-15);
  EXPECT_NEAR(y(1), std::tanh(2.0), 1e-15);

  EXPECT_THROW(identity_model(1).forward_base(vec({1, 2, 3})), Error);
}

TEST(ReferenceModel, RejectsBrokenChains) {
  std::vector<DenseLayer> ls{{Eigen::MatrixXd::Ones(3, 2), Eigen::VectorXd::Zero(3)},
                             {Eigen::MatrixXd::Ones(2, 4), Eigen::VectorXd::Zero(2)}};
  EXPECT_THROW(ReferenceModel(std::move(ls)), Error);
}

TEST(ForwardMixed, SingleAdapterHandEvaluated) {
  Eigen::MatrixXd A(1, 2), B(2, 1);
  A << 1, 0;
  B << 1, 0;
  const MixPlan plan({{delta_adapter("a", A, B), 1.0}});
  // (I + [[1,0],[0,0]]) [1,2] = [2,2]
  EXPECT_EQ(identity_model(1).forward_mixed(vec({1, 2}), plan), vec({2, 2}));
}

TEST(ForwardMixed, EmptyPlanIsBitIdenticalToBase) {
  const auto model = ReferenceModel::random({{8, 6}, {6, 6}, {6, 3}}, 5);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd x = Eigen::VectorXd::Random(8);
    EXPECT_EQ(model.forward_mixed(x, MixPlan{}), model.forward_base(x));
  }
}

TEST(ForwardMixed, HalfHalfEqualsAveragedAdapter) {
  const auto model = identity_model(1, 3);
  std::mt19937 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd A1 = Eigen::MatrixXd::Random(1, 3), B1 = Eigen::MatrixXd::Random(3, 1);
    const Eigen::MatrixXd A2 = Eigen::MatrixXd::Random(1, 3), B2 = Eigen::MatrixXd::Random(3, 1);
    const auto a1 = delta_adapter("a1", A1, B1), a2 = delta_adapter("a2", A2, B2);
    // Rank-2 adapter whose B*A is (B1 A1 + B2 A2) / 2.
    Eigen::MatrixXd A(2, 3), B(3, 2);
    A << A1, A2;
    B << B1 / 2, B2 / 2;
    const auto avg = delta_adapter("avg", A, B);
    const Eigen::VectorXd x = Eigen::VectorXd::Random(3);
    const auto mixed = model.forward_mixed(x, MixPlan({{a1, 0.5}, {a2, 0.5}}));
    const auto single = model.forward_mixed(x, MixPlan({{avg, 1.0}}));
    EXPECT_LE(rel_err(mixed, single), 1e-12);
  }
}

TEST(MixPlan, Validation) {
  const auto a = delta_adapter("a", Eigen::MatrixXd::Ones(1, 2), Eigen::MatrixXd::Ones(2, 1));
  EXPECT_THROW(MixPlan({{a, 0.7}}), Error);
  EXPECT_THROW(MixPlan({{a, 1.2}, {a, -0.2}}), Error);
  EXPECT_THROW(MixPlan({{nullptr, 1.0}}), Error);
  EXPECT_NO_THROW(MixPlan({{a, 1.0}, {a, 0.0}}));  // zero weight kept
  EXPECT_TRUE(MixPlan(std::vector<MixPlan::Entry>{}).empty());
}

TEST(ForwardMixed, PlanMustFitTheModel) {
  const auto a = delta_adapter("a", Eigen::MatrixXd::Ones(1, 3), Eigen::MatrixXd::Ones(3, 1));
  EXPECT_THROW(identity_model(1, 2).forward_mixed(vec({1, 2}), MixPlan({{a, 1.0}})), Error);
}

TEST(AvgBaseline, Definitions) {
  const ModelSignature sig{{5, 4}, {4, 4}};
  const auto model = ReferenceModel::random(sig, 3);
  const AdapterPtr a = std::make_shared<LowRankAdapter>(make_random_adapter(AdapterId("a"), sig, {0, 1}, 2, 4, 1));
  const AdapterPtr b = std::make_shared<LowRankAdapter>(make_random_adapter(AdapterId("b"), sig, {1}, 3, 3, 2));
  const Eigen::VectorXd x = Eigen::VectorXd::Random(5);
  EXPECT_EQ(model.forward_avg_baseline(x, {}), model.forward_base(x));
  EXPECT_EQ(model.forward_avg_baseline(x, {a}), model.forward_mixed(x, MixPlan({{a, 1.0}})));
  EXPECT_EQ(model.forward_avg_baseline(x, {a, b}), model.forward_mixed(x, MixPlan({{a, 0.5}, {b, 0.5}})));
}

TEST(MergeWeights, Definitions) {
  const ModelSignature sig{{6, 6}, {6, 6}, {6, 2}};
  const auto model = ReferenceModel::random(sig, 9);
  const AdapterPtr a = std::make_shared<LowRankAdapter>(make_random_adapter(AdapterId("a"), sig, {0, 2}, 2, 2, 4));

  const Eigen::VectorXd x = Eigen::VectorXd::Random(6);
  const auto merged = model.merge_weights({a}, {1.0});
  EXPECT_LE(rel_err(merged.forward_base(x), model.forward_mixed(x, MixPlan({{a, 1.0}}))), 1e-6);

  auto zero = std::make_shared<LowRankAdapter>(*a);
  zero->id = AdapterId("zero");
  for (auto& d : zero->deltas) d.A.setZero();
  const auto unchanged = model.merge_weights({zero}, {1.0});
  for (std::size_t l = 0; l < sig.size(); ++l) EXPECT_EQ(unchanged.layers()[l].W, model.layers()[l].W);

  EXPECT_THROW(model.merge_weights({a}, {0.5}), Error);
}

TEST(MergeWeights, MatchesMixingOnRandomInputs) {
  const ModelSignature sig{{10, 8}, {8, 8}, {8, 4}};
  const auto model = ReferenceModel::random(sig, 17);
  std::vector<AdapterPtr> adapters;
  for (int i = 0; i < 3; ++i) {
    adapters.push_back(std::make_shared<LowRankAdapter>(
        make_random_adapter(AdapterId("m" + std::to_string(i)), sig, {static_cast<std::size_t>(i % 2), 2}, 2, 8, 100 + i)));
  }
  const MixPlan plan({{adapters[0], 0.5}, {adapters[1], 0.3}, {adapters[2], 0.2}});
  const auto merged = model.merge_weights(plan);
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd x = Eigen::VectorXd::Random(10);
    EXPECT_LE(rel_err(merged.forward_base(x), model.forward_mixed(x, plan)), 1e-6);
  }
}

TEST(ForwardMixed, IsolatedFromAdaptersOutsideThePlan) {
  const ModelSignature sig{{6, 6}, {6, 3}};
  const auto model = ReferenceModel::random(sig, 2);
  AdapterRegistry reg(sig);
  for (int i = 0; i < 4; ++i) {
    reg.register_adapter(make_random_adapter(AdapterId("z" + std::to_string(i)), sig, {0, 1}, 2, 2, 50 + i));
  }
  const MixPlan plan({{reg.get(AdapterId("z0")), 0.6}, {reg.get(AdapterId("z1")), 0.4}});
  const Eigen::VectorXd x = Eigen::VectorXd::Random(6);
  const auto before = model.forward_mixed(x, plan);
  reg.unregister(AdapterId("z2"));
  reg.register_adapter(make_random_adapter(AdapterId("z9"), sig, {0}, 3, 9, 999));
  EXPECT_EQ(model.forward_mixed(x, plan), before);
}

// Forward-mode derivative of the mixed forward pass with respect to the
// weights, built only from effective deltas (independent of forward_mixed).
Eigen::VectorXd weight_jvp(const ReferenceModel& model, const Eigen::VectorXd& x, const std::vector<AdapterPtr>& adapters,
                           const std::vector<double>& S, const std::vector<double>& dS) {
  Eigen::VectorXd h = x;
  Eigen::VectorXd dh = Eigen::VectorXd::Zero(x.size());
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd W = layers[l].W;
    Eigen::VectorXd dz = Eigen::VectorXd::Zero(W.rows());
    for (std::size_t i = 0; i < adapters.size(); ++i) {
      if (!adapters[i]->find_layer(l)) continue;
      const Eigen::MatrixXd delta = effective_delta(*adapters[i], l).delta;
      W += S[i] * delta;
      dz += dS[i] * (delta * h);
    }
    Eigen::VectorXd z = W * h + layers[l].b;
    dz += W * dh;
    if (l + 1 < layers.size()) {
      const Eigen::ArrayXd t = z.array().tanh();
      dh = ((1.0 - t * t) * dz.array()).matrix();
      h = t.matrix();
    } else {
      dh = dz;
      h = z;
    }
  }
  return dh;
}

TEST(ForwardMixed, WeightContinuityAgainstAnalyticDerivative) {
  const ModelSignature sig{{8, 8}, {8, 8}, {8, 4}};
  const auto model = ReferenceModel::random(sig, 23);
  std::mt19937 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng() % 4;
    std::vector<AdapterPtr> adapters;
    std::vector<double> S(n);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      adapters.push_back(std::make_shared<LowRankAdapter>(make_random_adapter(
          AdapterId("w" + std::to_string(i)), sig, {0, 1, 2}, 1 + rng() % 4, 4.0, rng(), 0.5F)));
      S[i] = 0.1 + std::uniform_real_distribution<double>(0, 1)(rng);
      total += S[i];
    }
    for (auto& s : S) s /= total;
    const std::size_t bumped = rng() % n;
    // Perturb S_bumped by eps and renormalize: d/deps at 0 is (1 - S_i) for
    // the bumped weight and -S_j for the others.
    std::vector<double> dS(n);
    for (std::size_t i = 0; i < n; ++i) dS[i] = (i == bumped ? 1.0 : 0.0) - S[i];
    auto plan_at = [&](double eps) {
      std::vector<MixPlan::Entry> entries;
      for (std::size_t i = 0; i < n; ++i) entries.push_back({adapters[i], (S[i] + (i == bumped ? eps : 0.0)) / (1.0 + eps)});
      return MixPlan(std::move(entries));
    };
    const Eigen::VectorXd x = Eigen::VectorXd::Random(8);
    const double eps = 1e-6;
    const Eigen::VectorXd fd = (model.forward_mixed(x, plan_at(eps)) - model.forward_mixed(x, plan_at(-eps))) / (2 * eps);
    const Eigen::VectorXd analytic = weight_jvp(model, x, adapters, S, dS);
    if (analytic.norm() < 1e-8) continue;
    EXPECT_LE(rel_err(fd, analytic), 1e-4) << "trial " << trial;
  }
}

TEST(ReferenceModel, PersistenceRoundTrip) {
  const auto model = ReferenceModel::random({{7, 5}, {5, 3}}, 77);
  const auto bytes = model.encode();
  const auto back = ReferenceModel::decode(bytes);
  EXPECT_EQ(back.seed(), 77U);
  EXPECT_EQ(back.signature(), model.signature());
  const Eigen::VectorXd x = Eigen::VectorXd::Random(7);
  EXPECT_EQ(back.forward_base(x), model.forward_base(x));
  auto bad = bytes;
  bad[bad.size() - 5] ^= 1;
  EXPECT_THROW(ReferenceModel::decode(bad), Error);
}

TEST(ReferenceModel, SeededInitIsReproducible) {
  const ModelSignature sig{{4, 3}};
  EXPECT_EQ(ReferenceModel::random(sig, 1).layers()[0].W, ReferenceModel::random(sig, 1).layers()[0].W);
  EXPECT_NE(ReferenceModel::random(sig, 1).layers()[0].W, ReferenceModel::random(sig, 2).layers()[0].W);
}

TEST(AttentionBlock, SinglePositionIsOutputOfValue) {
  const auto block = AttentionBlock::random(6, 3);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(1, 6);
  const auto& p = block.projections();
  const Eigen::VectorXd v = p[AttentionBlock::kValue].W * x.row(0).transpose() + p[AttentionBlock::kValue].b;
  const Eigen::VectorXd expected = p[AttentionBlock::kOutput].W * v + p[AttentionBlock::kOutput].b;
  EXPECT_LT((block.forward_base(x).row(0).transpose() - expected).norm(), 1e-12);
}

TEST(AttentionBlock, PermutationEquivariant) {
  const auto block = AttentionBlock::random(5, 4);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 5);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(4);
  perm.indices() << 2, 0, 3, 1;
  const Eigen::MatrixXd a = perm * block.forward_base(x);
  const Eigen::MatrixXd b = block.forward_base(perm * x);
  EXPECT_LT((a - b).norm(), 1e-12);
}

TEST(AttentionBlock, MixingEqualsMerging) {
  std::mt19937 rng(5);
  const auto block = AttentionBlock::random(8, 9);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<MixPlan::Entry> entries;
    const int n = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) {
      std::vector<std::size_t> layers{rng() % 4};
      if (layers[0] != 3 && rng() % 2) layers.push_back(3);
      entries.push_back({std::make_shared<const LowRankAdapter>(make_random_adapter(
                             AdapterId("at" + std::to_string(i)), block.signature(), layers, 2, 4.0, rng(), 0.5F)),
                         1.0 / n});
    }
    const MixPlan plan(std::move(entries));
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 8);
    const Eigen::MatrixXd mixed = block.forward_mixed(x, plan);
    EXPECT_LT((mixed - block.merge_weights(plan).forward_base(x)).norm(), 1e-9 * mixed.norm());
    EXPECT_GT((mixed - block.forward_base(x)).norm(), 0.0);
  }
  EXPECT_THROW(block.forward_base(Eigen::MatrixXd::Random(2, 7)), Error);
  const auto wrong = std::make_shared<const LowRankAdapter>(
      make_random_adapter(AdapterId("w"), ModelSignature{{4, 4}}, {0}, 1, 1.0, 1));
  EXPECT_THROW(block.forward_mixed(Eigen::MatrixXd::Random(2, 8), MixPlan({{wrong, 1.0}})), Error);
}

}  // namespace
}  // namespace aclora
