// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mwgnn/graph.hpp"

namespace mwgnn {

/// Fraction of undirected edges whose endpoints share a label.
/// Throws InvalidArgument on an edgeless graph.
double global_edge_homophily(const GraphBundle& b);

/// Fraction of v's neighbors sharing v's label; nullopt for isolated nodes.
std::optional<double> local_edge_homophily(const GraphBundle& b, NodeId v);

struct HomophilyReport {
  double global_h = 0.0;
  std::vector<std::optional<double>> local_h;
  /// Counts of defined local_h over equal-width buckets of [0, 1]; the last
  /// bucket is closed on the right.
  std::vector<std::size_t> histogram;
  std::size_t undefined_count = 0;
};

HomophilyReport homophily_report(const GraphBundle& b, std::size_t buckets = 10);

struct KatzOptions {
  double attenuation = 0.1;
  double tol = 1e-10;
  std::size_t max_iter = 1000;
};

/// Raw Katz centrality sum_{m>=1} alpha^m A^m 1 via x <- alpha A (x + 1).
/// Throws NumericError on divergence or when max_iter is exhausted.
std::vector<double> katz_centrality(const Graph& g, const KatzOptions& opts = {});

}  // namespace mwgnn
