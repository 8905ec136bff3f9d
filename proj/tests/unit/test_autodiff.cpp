// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <mwgnn/adam.hpp>
#include <mwgnn/autodiff.hpp>
#include <mwgnn/error.hpp>

#include "test_support.hpp"

namespace mwgnn::ad {
namespace {

using testing::check_input_gradients;
using testing::check_param_gradients;
using testing::probe_loss;
using testing::random_matrix;

constexpr double kTol = 1e-4;
constexpr std::size_t kProbes = 24;

// Each unary/binary op is checked against central differences on its inputs.
struct OpCase {
  const char* name;
  Eigen::Index rows, cols;
  std::function<Var(Tape&, Var)> fn;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const auto& c = GetParam();
  Matrix x = random_matrix(c.rows, c.cols, 17, 0.8);
  const auto r = check_input_gradients(
      x, [&](Tape& t, Var v) { return probe_loss(t, c.fn(t, v)); }, kProbes, 3);
  EXPECT_LE(r.max_rel_error, kTol) << c.name;
  EXPECT_GE(r.probes, std::min<std::size_t>(kProbes, static_cast<std::size_t>(c.rows * c.cols)));
}

const EdgeIndex& fixed_edges() {
  static const Graph g = testing::random_graph(8, 0.4, 21, true);
  static const EdgeIndex idx = EdgeIndex::from_graph(g);
  return idx;
}

INSTANTIATE_TEST_SUITE_P(
    Ops, OpGradient,
    ::testing::Values(
        OpCase{"matmul_left", 5, 4, [](Tape& t, Var x) { return matmul(x, t.constant(random_matrix(4, 3, 1))); }},
        OpCase{"matmul_right", 4, 3, [](Tape& t, Var x) { return matmul(t.constant(random_matrix(5, 4, 2)), x); }},
        OpCase{"add_broadcast", 1, 4,
               [](Tape& t, Var x) { return add(t.constant(random_matrix(6, 4, 3)), x); }},
        OpCase{"sub", 3, 4, [](Tape& t, Var x) { return sub(t.constant(random_matrix(3, 4, 4)), x); }},
        OpCase{"hadamard", 3, 4, [](Tape&, Var x) { return hadamard(x, x); }},
        OpCase{"scale", 3, 4, [](Tape&, Var x) { return scale(x, -1.7); }},
        OpCase{"transpose", 3, 5, [](Tape&, Var x) { return transpose(x); }},
        OpCase{"tanh", 4, 6, [](Tape&, Var x) { return tanh(x); }},
        OpCase{"sigmoid", 4, 6, [](Tape&, Var x) { return sigmoid(x); }},
        OpCase{"relu", 4, 6, [](Tape&, Var x) { return relu(x); }},
        OpCase{"row_softmax", 4, 5, [](Tape&, Var x) { return row_softmax(x); }},
        OpCase{"concat_cols", 4, 3, [](Tape& t, Var x) { return concat_cols({x, t.constant(random_matrix(4, 2, 5)), x}); }},
        OpCase{"gather_rows", 5, 3,
               [](Tape&, Var x) {
                 static const std::vector<NodeId> rows{4, 0, 0, 2, 4, 1};
                 return gather_rows(x, rows);
               }},
        OpCase{"column", 4, 3, [](Tape&, Var x) { return column(x, 1); }},
        OpCase{"row_scale_matrix", 4, 3,
               [](Tape& t, Var x) { return row_scale(x, t.constant(random_matrix(4, 1, 6))); }},
        OpCase{"row_scale_factor", 4, 1,
               [](Tape& t, Var x) { return row_scale(t.constant(random_matrix(4, 3, 7)), x); }},
        OpCase{"row_mean", 5, 3, [](Tape&, Var x) { return row_mean(x); }},
        OpCase{"sum", 3, 3, [](Tape&, Var x) { return sum(x); }},
        OpCase{"masked_cross_entropy", 6, 4,
               [](Tape&, Var x) {
                 static const std::vector<std::int32_t> labels{0, 3, 1, 1, 2, 0};
                 static const std::vector<NodeId> rows{0, 2, 3, 5};
                 return masked_cross_entropy(x, labels, rows);
               }},
        OpCase{"edge_aggregate_h", 8, 3,
               [](Tape& t, Var x) {
                 const auto& idx = fixed_edges();
                 return edge_aggregate(idx, t.constant(random_matrix(static_cast<Eigen::Index>(idx.num_edges()), 1, 8)), x);
               }},
        OpCase{"edge_aggregate_w", static_cast<Eigen::Index>(fixed_edges().num_edges()), 1,
               [](Tape& t, Var x) { return edge_aggregate(fixed_edges(), x, t.constant(random_matrix(8, 3, 9))); }},
        OpCase{"segment_softmax", static_cast<Eigen::Index>(fixed_edges().num_edges()), 1,
               [](Tape&, Var x) { return segment_softmax(fixed_edges(), x); }},
        OpCase{"edge_pair_score_dst", 8, 4,
               [](Tape& t, Var x) {
                 return edge_pair_score(fixed_edges(), x, t.constant(random_matrix(8, 4, 10)),
                                        t.constant(random_matrix(1, 4, 11)), t.constant(random_matrix(4, 1, 12)));
               }},
        OpCase{"edge_pair_score_src", 8, 4,
               [](Tape& t, Var x) {
                 return edge_pair_score(fixed_edges(), t.constant(random_matrix(8, 4, 10)), x,
                                        t.constant(random_matrix(1, 4, 11)), t.constant(random_matrix(4, 1, 12)));
               }},
        OpCase{"edge_pair_score_v", 4, 1,
               [](Tape& t, Var x) {
                 return edge_pair_score(fixed_edges(), t.constant(random_matrix(8, 4, 10)),
                                        t.constant(random_matrix(8, 4, 13)), t.constant(random_matrix(1, 4, 11)), x);
               }}),
    [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });

TEST(Ops, RowSoftmaxRowsSumToOne) {
  Tape t;
  const Matrix y = row_softmax(t.constant(random_matrix(20, 7, 4, 5.0))).value();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    EXPECT_NEAR(y.row(i).sum(), 1.0, 1e-12);
    EXPECT_TRUE((y.row(i).array() >= 0.0).all());
  }
}

TEST(Ops, TanhOfZeroIsZero) {
  Tape t;
  EXPECT_EQ(tanh(t.constant(Matrix::Zero(3, 4))).value(), Matrix::Zero(3, 4));
}

TEST(Ops, TanhSaturatesWithoutNan) {
  Tape t;
  Matrix x(1, 4);
  x << -800.0, -20.0, 20.0, 800.0;
  const Matrix y = tanh(t.constant(x)).value();
  EXPECT_EQ(y(0, 0), -1.0);
  EXPECT_EQ(y(0, 3), 1.0);
  EXPECT_NEAR(y(0, 1), std::tanh(-20.0), 1e-15);
}

TEST(Ops, EdgeAggregateMatchesRowNormalizedAdjacency) {
  std::vector<Edge> path;
  for (NodeId i = 0; i + 1 < 6; ++i) path.emplace_back(i, i + 1);
  const Graph g = build_graph(path, 6);
  const auto idx = EdgeIndex::from_graph(g);
  Matrix w(static_cast<Eigen::Index>(idx.num_edges()), 1);
  for (std::size_t e = 0; e < idx.num_edges(); ++e) w(static_cast<Eigen::Index>(e), 0) = 1.0 / static_cast<double>(g.degree(idx.dst[e]));
  const Matrix h = random_matrix(6, 3, 5);
  Matrix a = testing::dense_adjacency(g);
  for (Eigen::Index i = 0; i < 6; ++i) a.row(i) /= a.row(i).sum();
  Tape t;
  const Matrix got = edge_aggregate(idx, t.constant(w), t.constant(h)).value();
  EXPECT_LE((got - a * h).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Ops, EdgeAggregateIsolatedRowsAreZero) {
  const std::vector<Edge> e{{0, 1}, {1, 2}};
  const auto idx = EdgeIndex::from_graph(build_graph(e, 5));
  Tape t;
  const Matrix out = edge_aggregate(idx, t.constant(Matrix::Ones(4, 1)), t.constant(random_matrix(5, 2, 1))).value();
  EXPECT_TRUE(out.row(3).isZero(0.0));
  EXPECT_TRUE(out.row(4).isZero(0.0));
}

TEST(Ops, SelfLoopsAreAppendedPerDestination) {
  const std::vector<Edge> e{{0, 1}};
  const auto idx = EdgeIndex::from_graph(build_graph(e, 3), true);
  EXPECT_EQ(idx.num_edges(), 5u);
  EXPECT_EQ(idx.offsets, (std::vector<std::size_t>{0, 2, 4, 5}));
  EXPECT_EQ(idx.src[1], 0u);
  EXPECT_EQ(idx.src[4], 2u);
}

TEST(Ops, ShapeAndFinitenessErrors) {
  Tape t;
  EXPECT_THROW(matmul(t.constant(Matrix::Ones(2, 3)), t.constant(Matrix::Ones(2, 3))), InvalidArgument);
  EXPECT_THROW(add(t.constant(Matrix::Ones(2, 3)), t.constant(Matrix::Ones(2, 2))), InvalidArgument);
  Matrix bad = Matrix::Ones(1, 1);
  bad(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(t.constant(bad), NumericError);
  EXPECT_THROW(scale(t.constant(Matrix::Constant(1, 1, 1e300)), 1e300), NumericError);
  Tape other;
  EXPECT_THROW(add(t.constant(Matrix::Ones(1, 1)), other.constant(Matrix::Ones(1, 1))), InvalidArgument);
}

TEST(Backward, LinearCaseIsOuterProduct) {
  ParamStore store(1);
  store.add("w", random_matrix(3, 4, 2));
  const Matrix x = random_matrix(4, 1, 3);
  Tape t;
  t.backward(sum(matmul(t.param(store, "w"), t.constant(x))));
  const Matrix expect = Matrix::Ones(3, 1) * x.transpose();
  EXPECT_LE((store.get("w").grad - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Backward, UnusedParameterHasZeroGrad) {
  ParamStore store(1);
  store.add_glorot("used", 2, 2);
  store.add_glorot("unused", 2, 2);
  Tape t;
  t.backward(sum(tanh(t.param(store, "used"))));
  EXPECT_TRUE(store.get("unused").grad.isZero(0.0));
  EXPECT_FALSE(store.get("used").grad.isZero(0.0));
}

TEST(Backward, RejectsNonScalarAndRepeats) {
  ParamStore store(1);
  store.add_glorot("w", 2, 2);
  Tape t;
  Var w = t.param(store, "w");
  EXPECT_THROW(t.backward(w), InvalidArgument);
  Var loss = sum(w);
  t.backward(loss);
  EXPECT_THROW(t.backward(loss), StateError);
}

TEST(Backward, ThreeLayerMlpMatchesFiniteDifferences) {
  ParamStore store(11);
  store.add_glorot("w1", 6, 8);
  store.add_glorot("b1", 1, 8);
  store.add_glorot("w2", 8, 8);
  store.add_glorot("b2", 1, 8);
  store.add_glorot("w3", 8, 3);
  const Matrix x = random_matrix(10, 6, 1);
  const std::vector<std::int32_t> labels{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
  const std::vector<NodeId> rows{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto loss = [&](Tape& t) {
    Var h = tanh(add(matmul(t.constant(x), t.param(store, "w1")), t.param(store, "b1")));
    h = sigmoid(add(matmul(h, t.param(store, "w2")), t.param(store, "b2")));
    return masked_cross_entropy(matmul(h, t.param(store, "w3")), labels, rows);
  };
  const auto r = check_param_gradients(store, loss, 40, 5);
  EXPECT_LE(r.max_rel_error, kTol);
  EXPECT_EQ(r.probes, 40u);
}

TEST(Backward, DeterministicForSameSeed) {
  auto run = [] {
    ParamStore store(77);
    store.add_glorot("w", 5, 5);
    Tape t;
    Var y = tanh(matmul(t.constant(random_matrix(4, 5, 1)), t.param(store, "w")));
    t.backward(sum(hadamard(y, y)));
    return std::make_pair(y.value(), store.get("w").grad);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(ParamStoreTest, InitializationAndNames) {
  ParamStore s(3);
  const auto& w = s.add_glorot("w", 10, 30).value;
  const double bound = std::sqrt(6.0 / 40.0);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
  EXPECT_TRUE(s.add_zeros("b", 1, 4).value.isZero(0.0));
  EXPECT_THROW(s.add_zeros("b", 1, 4), InvalidArgument);
  EXPECT_THROW(s.get("nope"), InvalidArgument);
  EXPECT_EQ(s.num_scalars(), 304u);
  ParamStore t(3);
  EXPECT_EQ(t.add_glorot("w", 10, 30).value, w);
}

// ------------------------------------------------------------------ GRU

GruVars register_gru(Tape& t, ParamStore& s) {
  return {t.param(s, "wu"), t.param(s, "wr"), t.param(s, "wc"), t.param(s, "bu"), t.param(s, "br"), t.param(s, "bc")};
}

ParamStore gru_store(Eigen::Index hidden, Eigen::Index in, std::uint64_t seed, bool zero_bias = false) {
  ParamStore s(seed);
  for (const char* n : {"wu", "wr", "wc"}) s.add_glorot(n, hidden, hidden + in);
  for (const char* n : {"bu", "br", "bc"}) {
    if (zero_bias) {
      s.add_zeros(n, 1, hidden);
    } else {
      s.add(n, random_matrix(1, hidden, seed + 1, 0.3));
    }
  }
  return s;
}

// Direct single-sequence recurrence, used as an oracle.
Vector reference_gru(const ParamStore& s, const Matrix& seq) {
  const Eigen::Index hdim = s.get("wu").value.rows();
  Vector h = Vector::Zero(hdim);
  auto sig = [](const Vector& v) { return (1.0 / (1.0 + (-v.array()).exp())).matrix().eval(); };
  for (Eigen::Index step = 0; step < seq.rows(); ++step) {
    Vector hx(hdim + seq.cols());
    hx << h, seq.row(step).transpose();
    const Vector u = sig(s.get("wu").value * hx + s.get("bu").value.row(0).transpose());
    const Vector r = sig(s.get("wr").value * hx + s.get("br").value.row(0).transpose());
    Vector rx(hdim + seq.cols());
    rx << r.cwiseProduct(h), seq.row(step).transpose();
    const Vector c = (s.get("wc").value * rx + s.get("bc").value.row(0).transpose()).array().tanh().matrix();
    h = (1.0 - u.array()).matrix().cwiseProduct(h) + u.cwiseProduct(c);
  }
  return h;
}

TEST(Gru, MatchesReferenceRecurrenceWithPadding) {
  const Matrix inputs = random_matrix(7, 3, 2);
  ParamStore s = gru_store(4, 3, 5);
  const std::vector<std::vector<NodeId>> seqs{{0, 1, 2, 3}, {4}, {}, {6, 5, 4, 3, 2, 1}};
  Tape t;
  const Matrix out = gru_sequence(SequenceBatch::from_sequences(seqs), inputs, register_gru(t, s)).value();
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    Matrix seq(static_cast<Eigen::Index>(seqs[b].size()), 3);
    for (std::size_t i = 0; i < seqs[b].size(); ++i) seq.row(static_cast<Eigen::Index>(i)) = inputs.row(seqs[b][i]);
    const Vector expect = reference_gru(s, seq);
    EXPECT_LE((out.row(static_cast<Eigen::Index>(b)).transpose() - expect).cwiseAbs().maxCoeff(), 1e-12) << b;
  }
}

TEST(Gru, ZeroInputsZeroBiasStayAtZero) {
  ParamStore s = gru_store(5, 2, 1, true);
  Tape t;
  const Matrix out = gru_sequence(SequenceBatch::from_sequences({{0, 1, 0, 1}}), Matrix::Zero(2, 2), register_gru(t, s)).value();
  EXPECT_TRUE(out.isZero(0.0));
}

TEST(Gru, HiddenStateStaysInOpenUnitInterval) {
  ParamStore s = gru_store(6, 3, 9);
  for (auto& [n, p] : s.items()) p.value *= 4.0;
  Tape t;
  const Matrix out =
      gru_sequence(SequenceBatch::from_sequences({{0, 1, 2, 3, 4, 0, 1}}), random_matrix(5, 3, 3, 5.0), register_gru(t, s))
          .value();
  EXPECT_TRUE((out.array().abs() < 1.0).all());
}

TEST(Gru, GradientsMatchFiniteDifferences) {
  const Matrix inputs = random_matrix(6, 3, 4);
  const auto batch = SequenceBatch::from_sequences({{0, 1, 2, 3}, {5, 4}, {2}, {}});
  ParamStore s = gru_store(4, 3, 12);
  const auto r = check_param_gradients(
      s, [&](Tape& t) { return probe_loss(t, gru_sequence(batch, inputs, register_gru(t, s))); }, 60, 8);
  EXPECT_LE(r.max_rel_error, kTol);
  EXPECT_GE(r.probes, 20u);
}

TEST(Gru, RejectsBadShapes) {
  ParamStore s = gru_store(4, 3, 1);
  Tape t;
  EXPECT_THROW(gru_sequence(SequenceBatch::from_sequences({{0}}), Matrix::Zero(2, 2), register_gru(t, s)),
               InvalidArgument);
  EXPECT_THROW(gru_sequence(SequenceBatch::from_sequences({{5}}), Matrix::Zero(2, 3), register_gru(t, s)),
               InvalidArgument);
}

// ------------------------------------------------------------------ Adam

TEST(AdamTest, ZeroGradZeroDecayLeavesParams) {
  ParamStore s(1);
  s.add_glorot("w", 3, 3);
  const Matrix before = s.get("w").value;
  Adam opt({.weight_decay = 0.0});
  Tape t;
  t.backward(scale(sum(t.param(s, "w")), 0.0));
  opt.step(s);
  EXPECT_EQ(s.get("w").value, before);
}

TEST(AdamTest, ConvergesOnQuadratic) {
  ParamStore s(1);
  s.add("x", Matrix::Zero(1, 1));
  Adam opt({.lr = 0.1, .weight_decay = 0.0});
  for (int i = 0; i < 500; ++i) {
    s.zero_grad();
    Tape t;
    Var d = sub(t.param(s, "x"), t.constant(Matrix::Constant(1, 1, 3.0)));
    t.backward(sum(hadamard(d, d)));
    opt.step(s);
  }
  EXPECT_NEAR(s.get("x").value(0, 0), 3.0, 1e-3);
}

TEST(AdamTest, WeightDecayAloneShrinksNorm) {
  ParamStore s(4);
  s.add_glorot("w", 4, 4);
  Adam opt({.lr = 1e-2, .weight_decay = 0.1});
  double norm = s.get("w").value.norm();
  for (int i = 0; i < 20; ++i) {
    s.zero_grad();
    Tape t;
    t.backward(scale(sum(t.param(s, "w")), 0.0));
    opt.step(s);
    const double next = s.get("w").value.norm();
    EXPECT_LT(next, norm);
    norm = next;
  }
}

TEST(AdamTest, StepBeforeBackwardThrows) {
  ParamStore s(1);
  s.add_glorot("w", 2, 2);
  Adam opt;
  EXPECT_THROW(opt.step(s), StateError);
  Tape t;
  t.backward(sum(t.param(s, "w")));
  opt.step(s);
  EXPECT_THROW(opt.step(s), StateError);
  EXPECT_EQ(opt.steps(), 1u);
}

}  // namespace
}  // namespace mwgnn::ad
