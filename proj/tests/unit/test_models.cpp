// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <mwgnn/error.hpp>
#include <mwgnn/models.hpp>
#include <mwgnn/synthgen.hpp>

#include "test_support.hpp"

namespace mwgnn {
namespace {

using ad::Tape;

MwgnnConfig small_config() {
  MwgnnConfig c;
  c.d_meta = 6;
  c.d_hidden = 8;
  c.d_q = 4;
  c.psi_hidden = 6;
  return c;
}

Matrix logits_of(Model& m) {
  Tape t;
  return m.forward(t).value();
}

GraphBundle synthetic(std::size_t n, double h, std::uint64_t seed, double gap = 1.0, double var = 1.0,
                      std::size_t features = 20) {
  return generate_graph(make_synthetic_spec(n, 5, features, block_matrix_for_target_h(5, 0.05, h), seed, gap, var));
}

TEST(Names, RoundTrip) {
  for (Ablation a : {Ablation::kNone, Ablation::kNoMeta, Ablation::kNoDf, Ablation::kNoDt, Ablation::kNoDp,
                     Ablation::kNoChannels}) {
    EXPECT_EQ(parse_ablation(to_string(a)), a);
  }
  for (ModelKind k : {ModelKind::kMwgnn, ModelKind::kGcn, ModelKind::kMlp}) EXPECT_EQ(parse_model_kind(to_string(k)), k);
  EXPECT_THROW(parse_ablation("no_everything"), InvalidArgument);
  EXPECT_THROW(parse_model_kind("gat"), InvalidArgument);
}

TEST(Config, ValidationNamesTheField) {
  auto expect_field = [](MwgnnConfig c, const std::string& field) {
    try {
      validate(c);
      ADD_FAILURE() << field << " accepted";
    } catch (const InvalidArgument& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  auto c = small_config();
  c.num_layers = 0;
  expect_field(c, "num_layers");
  c = small_config();
  c.alpha = 1.5;
  expect_field(c, "alpha");
  c = small_config();
  c.lambda1 = 0.6;
  c.lambda2 = 0.4;
  expect_field(c, "lambda");
  c = small_config();
  c.d_meta = 0;
  expect_field(c, "d_meta");
  c = small_config();
  c.beta = -0.1;
  expect_field(c, "beta");
  EXPECT_NO_THROW(validate(small_config()));

  TrainConfig t;
  t.lr = 0.0;
  EXPECT_THROW(validate(t), InvalidArgument);
  t = {};
  t.max_epochs = 0;
  EXPECT_THROW(validate(t), InvalidArgument);
}

TEST(Forward, ShapesForEveryModel) {
  const auto b = testing::random_bundle(30, 5, 3, 0.15, 1);
  for (ModelKind kind : {ModelKind::kMwgnn, ModelKind::kGcn, ModelKind::kMlp}) {
    auto m = make_model(kind, b, small_config(), 3);
    const Matrix y = logits_of(*m);
    EXPECT_EQ(y.rows(), 30);
    EXPECT_EQ(y.cols(), 3);
    EXPECT_TRUE(y.allFinite());
  }
  for (Ablation a : {Ablation::kNoMeta, Ablation::kNoDf, Ablation::kNoDt, Ablation::kNoDp, Ablation::kNoChannels}) {
    auto c = small_config();
    c.ablation = a;
    MwgnnModel m(b, c, 2);
    EXPECT_EQ(logits_of(m).cols(), 3) << to_string(a);
  }
}

TEST(Forward, NoChannelsEqualsManualSettings) {
  const auto b = testing::random_bundle(25, 4, 2, 0.2, 4);
  auto ablated = small_config();
  ablated.ablation = Ablation::kNoChannels;
  auto manual = small_config();
  manual.lambda1 = 0.0;
  manual.lambda2 = 0.0;
  manual.beta = 1.0;
  MwgnnModel a(b, ablated, 7), m(b, manual, 7);
  EXPECT_EQ(logits_of(a), logits_of(m));
  TrainConfig t;
  t.max_epochs = 8;
  EXPECT_TRUE(train(a, b, t).same_outcome(train(m, b, t)));
}

TEST(Forward, AblationsDropTheirDistributions) {
  const auto b = testing::random_bundle(20, 4, 2, 0.2, 4);
  auto c = small_config();
  MwgnnTrace tr;
  {
    MwgnnModel m(b, c, 1);
    Tape t;
    m.forward(t, &tr);
    EXPECT_TRUE(tr.d_t && tr.d_f && tr.d_p && tr.attention && tr.meta_weight);
    EXPECT_EQ(tr.attention->cols(), 3);
    for (Eigen::Index i = 0; i < 20; ++i) EXPECT_NEAR(tr.attention->value().row(i).sum(), 1.0, 1e-9);
  }
  c.ablation = Ablation::kNoDp;
  {
    MwgnnModel m(b, c, 1);
    EXPECT_FALSE(m.params().contains("meta.phi.w1"));
    Tape t;
    MwgnnTrace tp;
    m.forward(t, &tp);
    EXPECT_FALSE(tp.d_p.has_value());
    EXPECT_EQ(tp.attention->cols(), 2);
  }
  c.ablation = Ablation::kNoMeta;
  {
    MwgnnModel m(b, c, 1);
    EXPECT_FALSE(m.params().contains("meta.att.q"));
    EXPECT_EQ(m.params().get("conv.psi_f.w_dst").value.rows(), 4);
    EXPECT_EQ(m.params().get("conv.psi_t.w_dst").value.rows(), 5);
    Tape t;
    MwgnnTrace tn;
    m.forward(t, &tn);
    EXPECT_FALSE(tn.meta_weight.has_value());
  }
}

TEST(Forward, FullModelGradientMatchesFiniteDifferences) {
  const auto b = testing::random_bundle(20, 4, 3, 0.2, 9);
  for (FeatureMode mode : {FeatureMode::kAverage, FeatureMode::kGru}) {
    auto c = small_config();
    c.feature_mode = mode;
    MwgnnModel m(b, c, 5);
    const auto rows = mask_indices(b.masks.train);
    auto loss = [&](Tape& t) { return ad::masked_cross_entropy(m.forward(t), b.labels, rows); };
    const auto r = testing::check_param_gradients(m.params(), loss, 150, 21);
    EXPECT_LE(r.max_rel_error, 1e-4);
    EXPECT_EQ(r.probes, 150u);
  }
}

TEST(Gcn, PropagationMatchesDenseRenormalization) {
  const auto b = testing::random_bundle(40, 3, 2, 0.1, 2, false);
  GcnModel m(b, 2, 8, 1);
  const Matrix a = testing::dense_adjacency(b.graph) + Matrix::Identity(40, 40);
  const Vector d = a.rowwise().sum().array().rsqrt().matrix();
  const Matrix a_hat = d.asDiagonal() * a * d.asDiagonal();
  Matrix got = Matrix::Zero(40, 40);
  const auto& idx = m.propagation();
  for (std::size_t e = 0; e < idx.num_edges(); ++e) {
    got(idx.dst[e], idx.src[e]) += m.propagation_weights()(static_cast<Eigen::Index>(e), 0);
  }
  EXPECT_LE((got - a_hat).cwiseAbs().maxCoeff(), 1e-15);
  Tape t;
  const Matrix ones = ad::edge_aggregate(idx, t.constant(m.propagation_weights()), t.constant(Matrix::Ones(40, 1))).value();
  EXPECT_LE((ones - a_hat.rowwise().sum()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Gcn, VertexTransitiveGraphGivesEqualLogits) {
  GraphBundle b = testing::random_bundle(12, 3, 2, 0.0, 3);
  std::vector<Edge> cycle;
  for (NodeId i = 0; i < 12; ++i) cycle.emplace_back(i, (i + 1) % 12);
  b.graph = build_graph(cycle, 12);
  b.features = Matrix::Constant(12, 3, 0.7);
  GcnModel m(b, 2, 8, 4);
  const Matrix y = logits_of(m);
  for (Eigen::Index i = 1; i < 12; ++i) EXPECT_LE((y.row(i) - y.row(0)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Mlp, IgnoresEdges) {
  GraphBundle b = testing::random_bundle(30, 5, 3, 0.2, 6);
  MlpModel with(b, 2, 8, 3);
  const Matrix y = logits_of(with);
  GraphBundle bare = b;
  bare.graph = build_graph(std::vector<Edge>{}, 30);
  MlpModel without(bare, 2, 8, 3);
  EXPECT_EQ(logits_of(without), y);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  const auto b = testing::random_bundle(20, 4, 3, 0.2, 9);
  MlpModel m(b, 2, 6, 5);
  const auto rows = mask_indices(b.masks.train);
  const auto r = testing::check_param_gradients(
      m.params(), [&](Tape& t) { return ad::masked_cross_entropy(m.forward(t), b.labels, rows); }, 60, 2);
  EXPECT_LE(r.max_rel_error, 1e-4);
}

TEST(Evaluate, Examples) {
  const std::vector<std::int32_t> labels{0, 2, 1, 1, 0};
  Matrix onehot = Matrix::Zero(5, 3);
  for (Eigen::Index i = 0; i < 5; ++i) onehot(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  const std::vector<std::uint8_t> all(5, 1);
  EXPECT_DOUBLE_EQ(evaluate(onehot, labels, all), 1.0);
  EXPECT_DOUBLE_EQ(evaluate(Matrix::Constant(5, 3, 0.3), labels, all), 2.0 / 5.0);
  const std::vector<std::uint8_t> some{0, 1, 0, 1, 1};
  EXPECT_DOUBLE_EQ(evaluate(Matrix::Constant(5, 3, 0.3), labels, some), 1.0 / 3.0);
  EXPECT_THROW(evaluate(onehot, labels, std::vector<std::uint8_t>(5, 0)), InvalidArgument);
  EXPECT_EQ(argmax_rows(Matrix::Zero(2, 4)), (std::vector<std::int32_t>{0, 0}));
}

TEST(Evaluate, RandomLogitsAreNearChance) {
  const std::size_t n = 4000;
  std::mt19937_64 rng(12);
  std::vector<std::int32_t> labels(n);
  for (auto& y : labels) y = static_cast<std::int32_t>(rng() % 2);
  const double acc = evaluate(testing::random_matrix(static_cast<Eigen::Index>(n), 2, 5), labels,
                              std::vector<std::uint8_t>(n, 1));
  EXPECT_NEAR(acc, 0.5, 0.1);
}

TEST(Train, DeterministicForIdenticalInputs) {
  const auto b = synthetic(150, 0.3, 1);
  TrainConfig t;
  t.max_epochs = 15;
  t.seed = 4;
  for (ModelKind kind : {ModelKind::kMwgnn, ModelKind::kGcn, ModelKind::kMlp}) {
    const auto r1 = train(kind, b, small_config(), t);
    const auto r2 = train(kind, b, small_config(), t);
    EXPECT_TRUE(r1.same_outcome(r2)) << to_string(kind);
  }
}

TEST(Train, ReportReplaysBestValidationEpoch) {
  const auto b = synthetic(200, 0.5, 3);
  TrainConfig t;
  t.max_epochs = 60;
  t.patience = 10;
  MwgnnModel m(b, small_config(), 1);
  const auto r = train(m, b, t);
  ASSERT_EQ(r.val_acc_history.size(), r.epochs_run);
  ASSERT_EQ(r.test_acc_history.size(), r.epochs_run);
  ASSERT_EQ(r.train_loss_history.size(), r.epochs_run);
  const auto best = std::max_element(r.val_acc_history.begin(), r.val_acc_history.end());
  EXPECT_EQ(static_cast<std::size_t>(best - r.val_acc_history.begin()), r.best_epoch);
  EXPECT_EQ(r.best_val_acc, *best);
  EXPECT_EQ(r.test_acc, r.test_acc_history[r.best_epoch]);
  EXPECT_LE(r.epochs_run, t.max_epochs);
  if (r.epochs_run < t.max_epochs) {
    EXPECT_EQ(r.epochs_run, r.best_epoch + t.patience + 1);
  }
  // The model is left at the best checkpoint.
  const Matrix y = logits_of(m);
  EXPECT_EQ(evaluate(y, b.labels, b.masks.val), r.best_val_acc);
  EXPECT_EQ(evaluate(y, b.labels, b.masks.test), r.test_acc);
}

TEST(Train, NeverExceedsMaxEpochs) {
  const auto b = synthetic(120, 0.5, 2);
  for (std::size_t cap : {1u, 3u, 7u}) {
    TrainConfig t;
    t.max_epochs = cap;
    t.patience = 1000;
    const auto r = train(ModelKind::kGcn, b, small_config(), t);
    EXPECT_EQ(r.epochs_run, cap);
    EXPECT_LT(r.best_epoch, cap);
  }
}

TEST(Train, SeparableFeaturesAreLearnedByMlp) {
  const auto b = synthetic(1000, 0.5, 7, 5.0, 0.1);
  // Nearest-class-mean oracle on the training nodes.
  const auto train_rows = mask_indices(b.masks.train);
  Matrix means = Matrix::Zero(5, b.features.cols());
  Vector counts = Vector::Zero(5);
  for (NodeId i : train_rows) {
    means.row(b.labels[i]) += b.features.row(i);
    counts(b.labels[i]) += 1.0;
  }
  for (Eigen::Index c = 0; c < 5; ++c) means.row(c) /= counts(c);
  Matrix scores(static_cast<Eigen::Index>(b.num_nodes()), 5);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    for (Eigen::Index c = 0; c < 5; ++c) scores(i, c) = -(b.features.row(i) - means.row(c)).squaredNorm();
  }
  EXPECT_GE(evaluate(scores, b.labels, b.masks.test), 0.95);

  TrainConfig t;
  const auto r = train(ModelKind::kMlp, b, small_config(), t);
  EXPECT_GE(r.test_acc, 0.95);
}

TEST(Train, LossFallsOverFirstTenEpochs) {
  for (double h : {0.1, 0.5, 0.9}) {
    double first = 0.0, tenth = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto b = synthetic(200, h, seed);
      TrainConfig t;
      t.max_epochs = 10;
      t.patience = 100;
      t.seed = seed;
      const auto r = train(ModelKind::kMwgnn, b, small_config(), t);
      first += r.train_loss_history.front();
      tenth += r.train_loss_history.back();
    }
    EXPECT_LT(tenth, first) << h;
  }
}

TEST(Train, RejectsEmptyMasksAndDivergence) {
  auto b = testing::random_bundle(30, 3, 2, 0.2, 1);
  auto no_train = b;
  std::fill(no_train.masks.train.begin(), no_train.masks.train.end(), 0);
  EXPECT_THROW(train(ModelKind::kMlp, no_train, small_config(), {}), InvalidArgument);
  auto no_val = b;
  std::fill(no_val.masks.val.begin(), no_val.masks.val.end(), 0);
  EXPECT_THROW(train(ModelKind::kMlp, no_val, small_config(), {}), InvalidArgument);
  auto huge = b;
  huge.features *= 1e200;
  TrainConfig t;
  t.lr = 1e100;
  EXPECT_THROW(train(ModelKind::kMlp, huge, small_config(), t), NumericError);
}

TEST(Ablation, EveryVariantIsSeedReproducible) {
  const auto b = synthetic(120, 0.3, 5);
  TrainConfig t;
  t.max_epochs = 6;
  const std::vector<std::uint64_t> seeds{1, 2};
  for (Ablation a : {Ablation::kNone, Ablation::kNoMeta, Ablation::kNoDf, Ablation::kNoDt, Ablation::kNoDp,
                     Ablation::kNoChannels}) {
    const auto r1 = run_ablation(b, a, small_config(), t, seeds);
    const auto r2 = run_ablation(b, a, small_config(), t, seeds);
    EXPECT_EQ(r1.test_accs, r2.test_accs) << to_string(a);
    ASSERT_EQ(r1.test_accs.size(), 2u);
    const double mean = (r1.test_accs[0] + r1.test_accs[1]) / 2.0;
    EXPECT_NEAR(r1.mean, mean, 1e-15);
    EXPECT_NEAR(r1.stddev, std::abs(r1.test_accs[0] - r1.test_accs[1]) / 2.0, 1e-15);
    EXPECT_EQ(r1.variant, a);
  }
  EXPECT_THROW(run_ablation(b, Ablation::kNone, small_config(), t, {}), InvalidArgument);
}

}  // namespace
}  // namespace mwgnn
