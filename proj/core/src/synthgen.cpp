// SPDX-License-Identifier: Apache-2.0
#include "mwgnn/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "mwgnn/error.hpp"

namespace mwgnn {

namespace {

// Independent engine per generation phase so that, e.g., the edge draw does
// not depend on how many normals the feature phase consumed.
enum class Phase : std::uint32_t { kLabels = 1, kFeatures = 2, kEdges = 3, kSplit = 4, kCross = 5 };

std::mt19937_64 stream(std::uint64_t seed, Phase phase) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(phase), 0x6d77u};
  return std::mt19937_64(seq);
}

}  // namespace

Matrix block_class_means(std::size_t num_classes, std::size_t feature_dim, double mu_gap) {
  Matrix m = Matrix::Zero(num_classes, feature_dim);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t lo = c * feature_dim / num_classes;
    const std::size_t hi = (c + 1) * feature_dim / num_classes;
    for (std::size_t f = lo; f < hi; ++f) m(c, f) = mu_gap;
  }
  return m;
}

SyntheticSpec make_synthetic_spec(std::size_t num_nodes, std::size_t num_classes, std::size_t feature_dim,
                                  Matrix block_matrix, std::uint64_t seed, double mu_gap,
                                  double noise_variance) {
  SyntheticSpec s;
  s.num_nodes = num_nodes;
  s.num_classes = num_classes;
  s.feature_dim = feature_dim;
  s.class_means = block_class_means(num_classes, feature_dim, mu_gap);
  s.variances = Vector::Constant(feature_dim, noise_variance);
  s.block_matrix = std::move(block_matrix);
  s.seed = seed;
  return s;
}

void validate(const SyntheticSpec& s) {
  if (s.num_nodes == 0 || s.num_classes == 0 || s.feature_dim == 0) {
    throw InvalidArgument("synthetic spec: num_nodes, num_classes and feature_dim must be positive");
  }
  if (s.num_classes > s.num_nodes) throw InvalidArgument("synthetic spec: more classes than nodes");
  const auto c = static_cast<Eigen::Index>(s.num_classes);
  const auto f = static_cast<Eigen::Index>(s.feature_dim);
  if (s.class_means.rows() != c || s.class_means.cols() != f) {
    throw InvalidArgument("synthetic spec: class_means must be C x F");
  }
  if (s.variances.size() != f) throw InvalidArgument("synthetic spec: variances must have F entries");
  if ((s.variances.array() <= 0.0).any() || !s.variances.allFinite()) {
    throw InvalidArgument("synthetic spec: variances must be positive");
  }
  if (s.block_matrix.rows() != c || s.block_matrix.cols() != c) {
    throw InvalidArgument("synthetic spec: block_matrix must be C x C");
  }
  for (Eigen::Index a = 0; a < c; ++a) {
    for (Eigen::Index b = 0; b < c; ++b) {
      const double p = s.block_matrix(a, b);
      if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("synthetic spec: block entries must lie in [0,1]");
      if (p != s.block_matrix(b, a)) throw InvalidArgument("synthetic spec: block_matrix must be symmetric");
    }
    for (Eigen::Index b = a + 1; b < c; ++b) {
      if (s.class_means.row(a) == s.class_means.row(b)) {
        throw InvalidArgument("synthetic spec: class means must be pairwise distinct");
      }
    }
  }
}

Masks make_split(std::span<const std::int32_t> labels, std::size_t num_classes, std::uint64_t seed) {
  auto rng = stream(seed, Phase::kSplit);
  const std::size_t n = labels.size();
  Masks m{std::vector<std::uint8_t>(n, 0), std::vector<std::uint8_t>(n, 0), std::vector<std::uint8_t>(n, 0)};

  std::vector<std::vector<NodeId>> by_class(num_classes);
  for (NodeId i = 0; i < n; ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);

  std::vector<NodeId> rest;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    const std::size_t take = std::min<std::size_t>(20, members.size() / 2);
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (i < take) {
        m.train[members[i]] = 1;
      } else {
        rest.push_back(members[i]);
      }
    }
  }
  std::sort(rest.begin(), rest.end());
  std::shuffle(rest.begin(), rest.end(), rng);
  const std::size_t n_val = std::min<std::size_t>(500, rest.size() / 3);
  const std::size_t n_test = std::min<std::size_t>(1000, rest.size() - n_val);
  for (std::size_t i = 0; i < n_val; ++i) m.val[rest[i]] = 1;
  for (std::size_t i = n_val; i < n_val + n_test; ++i) m.test[rest[i]] = 1;
  return m;
}

GraphBundle generate_graph(const SyntheticSpec& s) {
  validate(s);
  const std::size_t n = s.num_nodes;
  GraphBundle b;
  b.num_classes = s.num_classes;

  auto label_rng = stream(s.seed, Phase::kLabels);
  std::uniform_int_distribution<std::int32_t> pick(0, static_cast<std::int32_t>(s.num_classes) - 1);
  b.labels.resize(n);
  for (auto& y : b.labels) y = pick(label_rng);

  auto feat_rng = stream(s.seed, Phase::kFeatures);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Vector sd = s.variances.array().sqrt();
  b.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.feature_dim));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < s.feature_dim; ++f) {
      b.features(i, f) = s.class_means(b.labels[i], f) + sd[f] * gauss(feat_rng);
    }
  }

  auto edge_rng = stream(s.seed, Phase::kEdges);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j = i + 1; j < n; ++j) {
      if (unit(edge_rng) < s.block_matrix(b.labels[i], b.labels[j])) edges.emplace_back(i, j);
    }
  }
  b.graph = build_graph(edges, n);
  b.masks = make_split(b.labels, s.num_classes, s.seed);
  return b;
}

GraphBundle combine_graphs(const CombineSpec& c) {
  if (c.first.num_classes != c.second.num_classes || c.first.feature_dim != c.second.feature_dim) {
    throw InvalidArgument("combine_graphs: sub-specs must share num_classes and feature_dim");
  }
  if (!(c.cross_edge_prob >= 0.0 && c.cross_edge_prob <= 1.0)) {
    throw InvalidArgument("combine_graphs: cross_edge_prob must lie in [0,1]");
  }
  const GraphBundle g1 = generate_graph(c.first);
  const GraphBundle g2 = generate_graph(c.second);
  const std::size_t n1 = g1.num_nodes();
  const std::size_t n = n1 + g2.num_nodes();

  std::vector<Edge> edges = g1.graph.edges();
  for (const auto& [u, v] : g2.graph.edges()) {
    edges.emplace_back(static_cast<NodeId>(u + n1), static_cast<NodeId>(v + n1));
  }
  auto rng = stream(c.seed, Phase::kCross);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (c.cross_edge_prob > 0.0) {
    for (NodeId u = 0; u < n1; ++u) {
      for (NodeId v = static_cast<NodeId>(n1); v < n; ++v) {
        if (unit(rng) < c.cross_edge_prob) edges.emplace_back(u, v);
      }
    }
  }

  GraphBundle b;
  b.num_classes = c.first.num_classes;
  b.graph = build_graph(edges, n);
  b.features.resize(static_cast<Eigen::Index>(n), g1.features.cols());
  b.features.topRows(g1.features.rows()) = g1.features;
  b.features.bottomRows(g2.features.rows()) = g2.features;
  b.labels = g1.labels;
  b.labels.insert(b.labels.end(), g2.labels.begin(), g2.labels.end());
  b.masks = make_split(b.labels, b.num_classes, c.seed);
  return b;
}

Matrix block_matrix_for_target_h(std::size_t num_classes, double p_in, double target_h) {
  if (num_classes < 2) throw InvalidArgument("block_matrix_for_target_h: need at least 2 classes");
  if (!(target_h > 0.0 && target_h < 1.0)) {
    throw InvalidArgument("block_matrix_for_target_h: target_h must lie in (0,1)");
  }
  if (!(p_in > 0.0 && p_in <= 1.0)) throw InvalidArgument("block_matrix_for_target_h: p_in must lie in (0,1]");
  const double p_out = p_in * (1.0 - target_h) / (static_cast<double>(num_classes - 1) * target_h);
  if (p_out > 1.0) {
    throw InvalidArgument("block_matrix_for_target_h: infeasible target, off-diagonal probability " +
                          std::to_string(p_out) + " > 1");
  }
  Matrix b = Matrix::Constant(num_classes, num_classes, p_out);
  b.diagonal().setConstant(p_in);
  return b;
}

double expected_edge_count(std::size_t num_nodes, const Matrix& block_matrix) {
  const auto c = static_cast<double>(block_matrix.rows());
  const double per_class = static_cast<double>(num_nodes) / c;
  // Uniform labels: within-class pairs ~ C * m(m-1)/2, cross pairs ~ m^2 per class pair.
  double total = 0.0;
  for (Eigen::Index a = 0; a < block_matrix.rows(); ++a) {
    total += block_matrix(a, a) * per_class * (per_class - 1.0) / 2.0;
    for (Eigen::Index b = a + 1; b < block_matrix.cols(); ++b) total += block_matrix(a, b) * per_class * per_class;
  }
  return total;
}

namespace {

constexpr std::size_t kHalfNodes = 500;
constexpr std::size_t kClasses = 5;
constexpr std::size_t kFeatures = 100;
constexpr double kCrossProb = 0.002;

SyntheticSpec half_spec(double target_h, double target_edges, std::uint64_t seed) {
  // Same shape as block_matrix_for_target_h with p_in = 1, but unclamped.
  Matrix unit = Matrix::Constant(kClasses, kClasses, (1.0 - target_h) / (double(kClasses - 1) * target_h));
  unit.diagonal().setOnes();
  const double p_in = target_edges / expected_edge_count(kHalfNodes, unit);
  return make_synthetic_spec(kHalfNodes, kClasses, kFeatures, block_matrix_for_target_h(kClasses, p_in, target_h),
                             seed);
}

}  // namespace

CombineSpec combined_homophilous_spec(std::uint64_t seed) {
  // 22937 edges in total, ~500 of them cross edges.
  return {half_spec(0.5, 11218.0, seed * 3 + 1), half_spec(0.5, 11218.0, seed * 3 + 2), kCrossProb, seed};
}

CombineSpec combined_mixed_spec(std::uint64_t seed) {
  // Edge counts solve 0.10 E1 + 0.75 E2 + 0.2 E_cross = 0.39 * 22705.
  return {half_spec(0.10, 12152.0, seed * 3 + 1), half_spec(0.75, 10053.0, seed * 3 + 2), kCrossProb, seed};
}

}  // namespace mwgnn
