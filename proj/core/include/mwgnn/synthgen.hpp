// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>

#include "mwgnn/graph.hpp"
#include "mwgnn/matrix.hpp"

namespace mwgnn {

/// Block-model node-classification generator settings.
///
/// Labels are i.i.d. uniform over num_classes; node i gets features
/// N(class_means[y_i], diag(variances)); every unordered pair (i, j) is an
/// edge independently with probability block_matrix(y_i, y_j).
struct SyntheticSpec {
  std::size_t num_nodes = 0;
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  Matrix class_means;     // C x F
  Vector variances;       // F
  Matrix block_matrix;    // C x C, symmetric, entries in [0, 1]
  std::uint64_t seed = 0;
};

struct CombineSpec {
  SyntheticSpec first;
  SyntheticSpec second;
  double cross_edge_prob = 0.0;
  std::uint64_t seed = 0;
};

/// Class c has mean mu_gap on coordinates [cF/C, (c+1)F/C) and 0 elsewhere.
Matrix block_class_means(std::size_t num_classes, std::size_t feature_dim, double mu_gap);

/// Convenience constructor using block_class_means and isotropic noise.
SyntheticSpec make_synthetic_spec(std::size_t num_nodes, std::size_t num_classes, std::size_t feature_dim,
                                  Matrix block_matrix, std::uint64_t seed, double mu_gap = 1.0,
                                  double noise_variance = 1.0);

/// Throws InvalidArgument when a spec invariant fails (including C > N).
void validate(const SyntheticSpec& s);

GraphBundle generate_graph(const SyntheticSpec& s);

/// Disjoint union of the two generated graphs (second offset by |V1|) plus
/// independent cross edges with probability cross_edge_prob. Masks are
/// redrawn over the union.
GraphBundle combine_graphs(const CombineSpec& c);

/// Diagonal p_in, off-diagonal p_in (1 - h) / ((C - 1) h): the expected
/// homophily under uniform classes equals target_h. Throws InvalidArgument
/// if the required off-diagonal exceeds 1.
Matrix block_matrix_for_target_h(std::size_t num_classes, double p_in, double target_h);

/// Expected number of undirected edges under uniform labels.
double expected_edge_count(std::size_t num_nodes, const Matrix& block_matrix);

/// Planetoid-style split: per class min(20, n_c / 2) training nodes, the
/// rest shuffled and divided 1:2 into validation and test, capped at
/// 500 / 1000.
Masks make_split(std::span<const std::int32_t> labels, std::size_t num_classes, std::uint64_t seed);

/// Two-half combined graphs with 1000 nodes, 5 classes and 100 features.
/// Homophilous: both halves at h = 0.5, ~22.9k edges in total.
CombineSpec combined_homophilous_spec(std::uint64_t seed);
/// Mixed: halves at h = 0.10 and h = 0.75, sized so the union sits near h = 0.39.
CombineSpec combined_mixed_spec(std::uint64_t seed);

}  // namespace mwgnn
