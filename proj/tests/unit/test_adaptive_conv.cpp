// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <mwgnn/adaptive_conv.hpp>
#include <mwgnn/error.hpp>
#include <mwgnn/meta_weight.hpp>

#include "test_support.hpp"

namespace mwgnn {
namespace {

using ad::EdgeIndex;
using ad::ParamStore;
using ad::Tape;
using ad::Var;
using testing::random_matrix;

Matrix dense_from_edges(const EdgeIndex& idx, const Matrix& w) {
  const auto n = static_cast<Eigen::Index>(idx.num_nodes);
  Matrix p = Matrix::Zero(n, n);
  for (std::size_t e = 0; e < idx.num_edges(); ++e) p(idx.dst[e], idx.src[e]) += w(static_cast<Eigen::Index>(e), 0);
  return p;
}

Matrix row_normalized(Matrix a) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double s = a.row(i).sum();
    if (s > 0.0) a.row(i) /= s;
  }
  return a;
}

Matrix relu_of(const Matrix& m) { return m.cwiseMax(0.0); }

struct ScoreFixture {
  GraphBundle bundle;
  EdgeIndex idx;
  Matrix meta, ldp;
  ParamStore store{5};

  explicit ScoreFixture(std::size_t n, std::uint64_t seed, double p = 0.2)
      : bundle(testing::random_bundle(n, 4, 3, p, seed)), idx(EdgeIndex::from_graph(bundle.graph)) {
    meta = random_matrix(static_cast<Eigen::Index>(n), 6, seed + 1);
    ldp = standardize_columns(local_degree_profile(bundle.graph).to_matrix());
    add_edge_scorer_params(store, "conv.psi_f", 6, 4, 8);
    add_edge_scorer_params(store, "conv.psi_t", 6, 5, 8);
    store.get("conv.psi_f.b").value = random_matrix(1, 8, seed + 2, 0.2);
  }

  EdgeScores scores(Tape& t) {
    Var w = t.constant(meta);
    return decoupled_edge_weights(t, store, idx, w, t.constant(bundle.features), w, t.constant(ldp));
  }
};

TEST(EdgeWeights, ZeroScorerGivesUniformInverseDegree) {
  ScoreFixture f(30, 1);
  f.store.get("conv.psi_f.v").value.setZero();
  f.store.get("conv.psi_t.v").value.setZero();
  Tape t;
  const auto s = f.scores(t);
  for (std::size_t e = 0; e < f.idx.num_edges(); ++e) {
    const double expect = 1.0 / static_cast<double>(f.bundle.graph.degree(f.idx.dst[e]));
    EXPECT_NEAR(s.s_f.value()(static_cast<Eigen::Index>(e), 0), expect, 1e-15);
    EXPECT_NEAR(s.s_t.value()(static_cast<Eigen::Index>(e), 0), expect, 1e-15);
  }
}

TEST(EdgeWeights, RowsSumToOneOnAdjacencySupport) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ScoreFixture f(40, seed);
    Tape t;
    const auto s = f.scores(t);
    const Matrix a = testing::dense_adjacency(f.bundle.graph);
    for (const Matrix* w : {&s.s_f.value(), &s.s_t.value()}) {
      const Matrix p = dense_from_edges(f.idx, *w);
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        if (a.row(i).sum() > 0) {
          EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-9);
        }
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
          if (a(i, j) == 0.0) {
            EXPECT_EQ(p(i, j), 0.0);
          } else {
            EXPECT_GT(p(i, j), 0.0);
          }
        }
      }
    }
  }
}

TEST(EdgeWeights, WidthMismatchThrows) {
  ScoreFixture f(10, 2);
  Tape t;
  Var bad = t.constant(Matrix::Zero(10, 3));
  EXPECT_THROW(decoupled_edge_weights(t, f.store, f.idx, bad, t.constant(f.bundle.features), bad, t.constant(f.ldp)),
               InvalidArgument);
}

TEST(FuseWeights, EndpointsMidpointAndRange) {
  Tape t;
  Matrix sf(3, 1), st(3, 1);
  sf << 0.2, 0.5, 0.9;
  st << 0.6, 0.5, 0.1;
  EdgeScores s{t.constant(sf), t.constant(st), {}};
  EXPECT_EQ(fuse_weights(s, 1.0).s.value(), sf);
  EXPECT_EQ(fuse_weights(s, 0.0).s.value(), st);
  EXPECT_NEAR(fuse_weights(s, 0.5).s.value()(0, 0), 0.4, 1e-15);
  EXPECT_THROW(fuse_weights(s, -0.01), InvalidArgument);
  EXPECT_THROW(fuse_weights(s, 1.01), InvalidArgument);
  EXPECT_THROW(fuse_weights(s, std::nan("")), InvalidArgument);
}

TEST(FuseWeights, ConvexCombinationBound) {
  ScoreFixture f(35, 7);
  for (double alpha : {0.0, 0.13, 0.5, 0.77, 1.0}) {
    Tape t;
    const auto s = fuse_weights(f.scores(t), alpha);
    for (Eigen::Index e = 0; e < s.s.rows(); ++e) {
      const double lo = std::min(s.s_f.value()(e, 0), s.s_t.value()(e, 0));
      const double hi = std::max(s.s_f.value()(e, 0), s.s_t.value()(e, 0));
      EXPECT_GE(s.s.value()(e, 0), lo - 1e-15);
      EXPECT_LE(s.s.value()(e, 0), hi + 1e-15);
    }
  }
}

struct ChannelFixture {
  GraphBundle bundle;
  EdgeIndex idx;
  ParamStore store{9};

  ChannelFixture(GraphBundle b, std::size_t hidden) : bundle(std::move(b)), idx(EdgeIndex::from_graph(bundle.graph)) {
    add_channel_params(store, "chan", bundle.feature_dim(), bundle.num_nodes(), hidden);
    store.get("chan.b_f").value = random_matrix(1, static_cast<Eigen::Index>(hidden), 3, 0.5);
    store.get("chan.b_t").value = random_matrix(1, static_cast<Eigen::Index>(hidden), 4, 0.5);
  }

  ChannelEmbeddings embed(Tape& t) {
    return init_channel_embeddings(
        t, store, idx, t.constant(bundle.features),
        t.constant(Matrix::Ones(static_cast<Eigen::Index>(idx.num_edges()), 1)));
  }
};

TEST(Channels, ZeroWeightsGiveZeroEmbeddings) {
  ChannelFixture f(testing::random_bundle(20, 5, 2, 0.2, 3), 6);
  for (auto& [name, p] : f.store.items()) p.value.setZero();
  Tape t;
  const auto ch = f.embed(t);
  EXPECT_TRUE(ch.h_f0.value().isZero(0.0));
  EXPECT_TRUE(ch.h_t0.value().isZero(0.0));
}

TEST(Channels, DenseOracleAndIsolatedNodes) {
  GraphBundle b = testing::random_bundle(25, 5, 2, 0.1, 8, false);
  std::vector<Edge> edges;
  for (auto e : b.graph.edges()) {
    if (e.first != 4 && e.second != 4) edges.push_back(e);
  }
  b.graph = build_graph(edges, 25);
  ChannelFixture f(b, 7);
  Tape t;
  const auto ch = f.embed(t);
  const Matrix a = testing::dense_adjacency(f.bundle.graph);
  Matrix ht = a * f.store.get("chan.fc_t").value;
  ht.rowwise() += f.store.get("chan.b_t").value.row(0);
  EXPECT_LE((ch.h_t0.value() - ht.array().tanh().matrix()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((ch.h_t0.value().row(4) - f.store.get("chan.b_t").value.array().tanh().matrix()).cwiseAbs().maxCoeff(),
            1e-15);
  Matrix hf = f.bundle.features * f.store.get("chan.fc_f").value;
  hf.rowwise() += f.store.get("chan.b_f").value.row(0);
  EXPECT_LE((ch.h_f0.value() - hf.array().tanh().matrix()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Channels, IdenticalFeaturesGiveIdenticalRows) {
  GraphBundle b = testing::random_bundle(15, 4, 2, 0.2, 2);
  b.features.row(9) = b.features.row(2);
  ChannelFixture f(b, 5);
  Tape t;
  const auto ch = f.embed(t);
  EXPECT_EQ(ch.h_f0.value().row(9), ch.h_f0.value().row(2));
}

TEST(Channels, WidthMismatchThrows) {
  ChannelFixture f(testing::random_bundle(15, 4, 2, 0.2, 2), 5);
  Tape t;
  EXPECT_THROW(init_channel_embeddings(t, f.store, f.idx, t.constant(Matrix::Zero(15, 3)),
                                       t.constant(Matrix::Ones(static_cast<Eigen::Index>(f.idx.num_edges()), 1))),
               InvalidArgument);
}

struct LayerFixture {
  GraphBundle bundle;
  EdgeIndex idx;
  Matrix h, hf, ht, w, s;

  LayerFixture(std::size_t n, std::uint64_t seed, Eigen::Index d = 6)
      : bundle(testing::random_bundle(n, 3, 2, 0.15, seed)), idx(EdgeIndex::from_graph(bundle.graph)) {
    const auto rows = static_cast<Eigen::Index>(n);
    h = random_matrix(rows, d, seed + 1);
    hf = random_matrix(rows, d, seed + 2);
    ht = random_matrix(rows, d, seed + 3);
    w = random_matrix(d, d, seed + 4, 0.5);
    s = Matrix(static_cast<Eigen::Index>(idx.num_edges()), 1);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (Eigen::Index e = 0; e < s.rows(); ++e) s(e, 0) = u(rng);
  }

  Matrix run(const ConvLayerConfig& cfg, Activation act, const Matrix* scores = nullptr) {
    Tape t;
    ChannelEmbeddings ch{t.constant(hf), t.constant(ht)};
    return adaptive_layer(idx, t.constant(h), t.constant(scores ? *scores : s), ch, t.constant(w), cfg, act).value();
  }

  Matrix propagation() const { return dense_from_edges(idx, s); }
};

TEST(AdaptiveLayer, NoChannelsFullTransformIsPlainPropagation) {
  LayerFixture f(30, 1);
  const Matrix got = f.run({.lambda_feature = 0.0, .lambda_topology = 0.0, .beta = 1.0}, Activation::kRelu);
  EXPECT_LE((got - relu_of(f.propagation() * f.h * f.w)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AdaptiveLayer, BetaZeroSkipsTransform) {
  LayerFixture f(30, 2);
  const ConvLayerConfig cfg{.lambda_feature = 0.2, .lambda_topology = 0.3, .beta = 0.0};
  const Matrix m = 0.5 * (f.propagation() * f.h) + 0.2 * f.hf + 0.3 * f.ht;
  EXPECT_LE((f.run(cfg, Activation::kIdentity) - m).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((f.run(cfg, Activation::kRelu) - relu_of(m)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(AdaptiveLayer, FeatureChannelDominatesNearOne) {
  LayerFixture f(30, 3);
  const double eps = 0.01;
  const ConvLayerConfig cfg{.lambda_feature = 1.0 - eps, .lambda_topology = 0.0, .beta = 0.5};
  const Matrix m = eps * (f.propagation() * f.h) + (1.0 - eps) * f.hf;
  const Matrix d = 0.5 * Matrix::Identity(f.w.rows(), f.w.cols()) + 0.5 * f.w;
  const Matrix got = f.run(cfg, Activation::kIdentity);
  EXPECT_LE((got - m * d).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((got - f.hf * d).cwiseAbs().maxCoeff(), 0.05 * (f.h.cwiseAbs().maxCoeff() + f.hf.cwiseAbs().maxCoeff()) *
                                                       d.cwiseAbs().rowwise().sum().maxCoeff());
}

TEST(AdaptiveLayer, UniformScoresMatchRowNormalizedAdjacency) {
  LayerFixture f(50, 4);
  Matrix uniform(static_cast<Eigen::Index>(f.idx.num_edges()), 1);
  for (std::size_t e = 0; e < f.idx.num_edges(); ++e) {
    uniform(static_cast<Eigen::Index>(e), 0) = 1.0 / static_cast<double>(f.bundle.graph.degree(f.idx.dst[e]));
  }
  const Matrix got = f.run({.lambda_feature = 0.0, .lambda_topology = 0.0, .beta = 0.0}, Activation::kIdentity, &uniform);
  EXPECT_LE((got - row_normalized(testing::dense_adjacency(f.bundle.graph)) * f.h).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(AdaptiveLayer, NonNeighborsDoNotLeakIntoAggregation) {
  LayerFixture f(40, 5);
  const ConvLayerConfig cfg{.lambda_feature = 0.0, .lambda_topology = 0.0, .beta = 0.0};
  const Matrix before = f.run(cfg, Activation::kIdentity);
  const Matrix a = testing::dense_adjacency(f.bundle.graph);
  for (NodeId j = 0; j < 40; j += 7) {
    LayerFixture g = f;
    g.h.row(j).array() += 10.0;
    const Matrix after = g.run(cfg, Activation::kIdentity);
    for (Eigen::Index i = 0; i < 40; ++i) {
      if (a(i, j) == 0.0) {
        EXPECT_EQ(after.row(i), before.row(i)) << i << " " << j;
      }
    }
  }
}

TEST(AdaptiveLayer, RejectsInvalidConfiguration) {
  LayerFixture f(10, 6);
  EXPECT_THROW(f.run({.lambda_feature = 0.6, .lambda_topology = 0.4, .beta = 0.5}, Activation::kRelu), InvalidArgument);
  EXPECT_THROW(f.run({.lambda_feature = -0.1, .lambda_topology = 0.1, .beta = 0.5}, Activation::kRelu), InvalidArgument);
  EXPECT_THROW(f.run({.lambda_feature = 0.1, .lambda_topology = 0.1, .beta = 1.5}, Activation::kRelu), InvalidArgument);
  f.w = Matrix::Zero(6, 5);
  EXPECT_THROW(f.run({}, Activation::kRelu), InvalidArgument);
}

TEST(AdaptiveLayer, JointGradientMatchesFiniteDifferences) {
  const auto b = testing::random_bundle(14, 3, 2, 0.25, 12);
  const auto st = prepare_structure(b, 2);
  ParamStore store(21);
  const std::size_t d_meta = 4, hidden = 5;
  add_gru_params(store, "meta.gru_t", 5, d_meta);
  add_feature_params(store, "meta.feat", FeatureMode::kAverage, 3, d_meta);
  add_position_params(store, "meta.phi", 14, 6, d_meta);
  add_attention_params(store, "meta.att", d_meta, 3);
  add_edge_scorer_params(store, "conv.psi_f", d_meta, 3, 6);
  add_edge_scorer_params(store, "conv.psi_t", d_meta, 5, 6);
  add_channel_params(store, "chan", 3, 14, hidden);
  store.add_glorot("conv.layer0.w", hidden, hidden);
  store.add_glorot("conv.layer1.w", hidden, hidden);
  for (auto& [name, p] : store.items()) {
    if (p.value.isZero(0.0)) p.value = random_matrix(p.value.rows(), p.value.cols(), name.size() + 3, 0.3);
  }
  const ConvLayerConfig cfg;
  auto loss = [&](Tape& t) {
    Var x = t.constant(b.features);
    auto meta = attention_integrate(t, store,
                                    {topo_distribution(t, store, st),
                                     feature_distribution(t, store, st, b.features, FeatureMode::kAverage),
                                     position_distribution(t, store, st)});
    auto s = fuse_weights(
        decoupled_edge_weights(t, store, st.edges, meta.fused, x, meta.fused, t.constant(st.ldp_normalized)), 0.5);
    auto ch = init_channel_embeddings(t, store, st.edges, x,
                                      t.constant(Matrix::Ones(static_cast<Eigen::Index>(st.edges.num_edges()), 1)));
    Var h = adaptive_layer(st.edges, ch.h_f0, s.s, ch, t.param(store, "conv.layer0.w"), cfg, Activation::kRelu);
    h = adaptive_layer(st.edges, h, s.s, ch, t.param(store, "conv.layer1.w"), cfg, Activation::kIdentity);
    return testing::probe_loss(t, h);
  };
  const auto r = testing::check_param_gradients(store, loss, 120, 17);
  EXPECT_LE(r.max_rel_error, 1e-4);
  EXPECT_EQ(r.probes, 120u);
}

}  // namespace
}  // namespace mwgnn
