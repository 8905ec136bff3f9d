// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mwgnn/matrix.hpp"

namespace mwgnn {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

/// Undirected simple graph in CSR form. Every undirected edge is stored in
/// both directions; neighbor lists are sorted ascending. Immutable once built.
class Graph {
 public:
  Graph() = default;

  std::size_t num_nodes() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  /// Number of undirected edges |E|.
  std::size_t num_edges() const { return neighbors_.size() / 2; }
  /// Number of stored (directed) adjacency entries, 2|E|.
  std::size_t num_directed_edges() const { return neighbors_.size(); }

  std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }
  std::span<const NodeId> neighbors(NodeId v) const {
    return {neighbors_.data() + offsets_[v], degree(v)};
  }
  bool has_edge(NodeId u, NodeId v) const;

  const std::vector<std::size_t>& offsets() const { return offsets_; }
  const std::vector<NodeId>& adjacency() const { return neighbors_; }
  std::vector<std::size_t> degrees() const;

  /// Undirected edge list with u < v, ordered lexicographically.
  std::vector<Edge> edges() const;

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  friend Graph build_graph(std::span<const Edge> edges, std::size_t num_nodes);

  std::vector<std::size_t> offsets_;
  std::vector<NodeId> neighbors_;
};

/// Symmetrizes, deduplicates and drops self-loops. Throws InvalidArgument on
/// num_nodes == 0 or an endpoint >= num_nodes.
Graph build_graph(std::span<const Edge> edges, std::size_t num_nodes);

/// N_{v,k}: every node within k hops of v, v included. Sorted ascending.
std::vector<NodeId> k_hop_neighbors(const Graph& g, NodeId v, std::size_t k);

/// Members of N_{v,k} ordered by ascending degree, ties by ascending id.
std::vector<NodeId> sorted_context(const Graph& g, NodeId v, std::size_t k);

/// Per-node [degree, min, max, mean, std] of neighbor degrees (population std).
/// Isolated nodes get all zeros.
struct LdpMatrix {
  std::vector<std::array<double, 5>> rows;

  std::size_t size() const { return rows.size(); }
  const std::array<double, 5>& operator[](std::size_t i) const { return rows[i]; }
  Matrix to_matrix() const;
};

LdpMatrix local_degree_profile(const Graph& g);

/// Dense all-pairs hop distances. -1 marks a disconnected pair. With a
/// truncation radius r, finite distances above r are stored as r + 1.
class SpdMatrix {
 public:
  static constexpr std::int32_t kDisconnected = -1;

  SpdMatrix() = default;
  SpdMatrix(std::size_t n, std::optional<std::int32_t> truncation)
      : n_(n), truncation_(truncation), entries_(n * n, kDisconnected) {}

  std::size_t size() const { return n_; }
  std::optional<std::int32_t> truncation() const { return truncation_; }
  std::int32_t at(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
  std::int32_t& at(std::size_t i, std::size_t j) { return entries_[i * n_ + j]; }
  std::span<const std::int32_t> row(std::size_t i) const { return {entries_.data() + i * n_, n_}; }

  /// Entries cast to double, row i = X_Position,i.
  Matrix to_matrix() const;

 private:
  std::size_t n_ = 0;
  std::optional<std::int32_t> truncation_;
  std::vector<std::int32_t> entries_;
};

SpdMatrix shortest_path_matrix(const Graph& g, std::optional<std::int32_t> truncation = std::nullopt);

/// Hop distances from a single source; unreachable nodes are -1.
std::vector<std::int32_t> bfs_distances(const Graph& g, NodeId source);

/// Train/validation/test membership flags, one byte per node.
struct Masks {
  std::vector<std::uint8_t> train;
  std::vector<std::uint8_t> val;
  std::vector<std::uint8_t> test;

  friend bool operator==(const Masks&, const Masks&) = default;
};

/// A graph together with node features, labels and the split.
struct GraphBundle {
  Graph graph;
  Matrix features;
  std::vector<std::int32_t> labels;
  std::size_t num_classes = 0;
  Masks masks;

  std::size_t num_nodes() const { return graph.num_nodes(); }
  std::size_t feature_dim() const { return static_cast<std::size_t>(features.cols()); }

  friend bool operator==(const GraphBundle& a, const GraphBundle& b) {
    return a.graph == b.graph && a.features.rows() == b.features.rows() &&
           a.features.cols() == b.features.cols() && a.features == b.features &&
           a.labels == b.labels && a.num_classes == b.num_classes && a.masks == b.masks;
  }
};

/// Throws InvalidArgument if sizes disagree, masks overlap, a label is out of
/// range, or a feature is non-finite.
void validate(const GraphBundle& b);

/// Indices of nodes whose mask byte is set.
std::vector<NodeId> mask_indices(std::span<const std::uint8_t> mask);

}  // namespace mwgnn
