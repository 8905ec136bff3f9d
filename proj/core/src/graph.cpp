// SPDX-License-Identifier: Apache-2.0
#include "mwgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mwgnn/error.hpp"

namespace mwgnn {

Graph build_graph(std::span<const Edge> edges, std::size_t num_nodes) {
  if (num_nodes == 0) throw InvalidArgument("build_graph: num_nodes must be positive");

  std::vector<Edge> directed;
  directed.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u >= num_nodes || v >= num_nodes) {
      throw InvalidArgument("build_graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                            ") out of range for " + std::to_string(num_nodes) + " nodes");
    }
    if (u == v) continue;
    directed.emplace_back(u, v);
    directed.emplace_back(v, u);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  Graph g;
  g.offsets_.assign(num_nodes + 1, 0);
  g.neighbors_.reserve(directed.size());
  for (const auto& [u, v] : directed) {
    ++g.offsets_[u + 1];
    g.neighbors_.push_back(v);
  }
  std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
  return g;
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  auto nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::size_t> Graph::degrees() const {
  std::vector<std::size_t> d(num_nodes());
  for (NodeId v = 0; v < d.size(); ++v) d[v] = degree(v);
  return d;
}

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (NodeId u = 0; u < num_nodes(); ++u) {
    for (NodeId v : neighbors(u)) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

namespace {

void check_node(const Graph& g, NodeId v, const char* who) {
  if (v >= g.num_nodes()) {
    throw InvalidArgument(std::string(who) + ": node " + std::to_string(v) + " out of range");
  }
}

}  // namespace

std::vector<std::int32_t> bfs_distances(const Graph& g, NodeId source) {
  check_node(g, source, "bfs_distances");
  std::vector<std::int32_t> dist(g.num_nodes(), SpdMatrix::kDisconnected);
  std::vector<NodeId> frontier{source};
  std::vector<NodeId> next;
  dist[source] = 0;
  for (std::int32_t level = 1; !frontier.empty(); ++level) {
    next.clear();
    for (NodeId u : frontier) {
      for (NodeId w : g.neighbors(u)) {
        if (dist[w] == SpdMatrix::kDisconnected) {
          dist[w] = level;
          next.push_back(w);
        }
      }
    }
    frontier.swap(next);
  }
  return dist;
}

std::vector<NodeId> k_hop_neighbors(const Graph& g, NodeId v, std::size_t k) {
  check_node(g, v, "k_hop_neighbors");
  std::vector<std::uint8_t> seen(g.num_nodes(), 0);
  std::vector<NodeId> out{v};
  std::vector<NodeId> frontier{v};
  std::vector<NodeId> next;
  seen[v] = 1;
  for (std::size_t hop = 0; hop < k && !frontier.empty(); ++hop) {
    next.clear();
    for (NodeId u : frontier) {
      for (NodeId w : g.neighbors(u)) {
        if (!seen[w]) {
          seen[w] = 1;
          next.push_back(w);
          out.push_back(w);
        }
      }
    }
    frontier.swap(next);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<NodeId> sorted_context(const Graph& g, NodeId v, std::size_t k) {
  auto ctx = k_hop_neighbors(g, v, k);
  // ctx is id-sorted, so a stable sort on degree leaves ties in id order.
  std::stable_sort(ctx.begin(), ctx.end(),
                   [&](NodeId a, NodeId b) { return g.degree(a) < g.degree(b); });
  return ctx;
}

LdpMatrix local_degree_profile(const Graph& g) {
  LdpMatrix ldp;
  ldp.rows.resize(g.num_nodes());
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    auto nb = g.neighbors(v);
    auto& row = ldp.rows[v];
    row = {static_cast<double>(nb.size()), 0.0, 0.0, 0.0, 0.0};
    if (nb.empty()) continue;

    double lo = static_cast<double>(g.degree(nb.front()));
    double hi = lo;
    double sum = 0.0;
    for (NodeId u : nb) {
      const double d = static_cast<double>(g.degree(u));
      lo = std::min(lo, d);
      hi = std::max(hi, d);
      sum += d;
    }
    const double mean = sum / static_cast<double>(nb.size());
    double ss = 0.0;
    for (NodeId u : nb) {
      const double diff = static_cast<double>(g.degree(u)) - mean;
      ss += diff * diff;
    }
    row[1] = lo;
    row[2] = hi;
    // Clamp so that floating error never pushes the mean outside [min, max].
    row[3] = std::clamp(mean, lo, hi);
    row[4] = std::sqrt(ss / static_cast<double>(nb.size()));
  }
  return ldp;
}

Matrix LdpMatrix::to_matrix() const {
  Matrix m(rows.size(), 5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < 5; ++c) m(i, c) = rows[i][c];
  }
  return m;
}

SpdMatrix shortest_path_matrix(const Graph& g, std::optional<std::int32_t> truncation) {
  if (truncation && *truncation < 0) throw InvalidArgument("shortest_path_matrix: negative truncation");
  const std::size_t n = g.num_nodes();
  SpdMatrix spd(n, truncation);
  for (NodeId s = 0; s < n; ++s) {
    auto dist = bfs_distances(g, s);
    for (std::size_t t = 0; t < n; ++t) {
      std::int32_t d = dist[t];
      if (truncation && d > *truncation) d = *truncation + 1;
      spd.at(s, t) = d;
    }
  }
  return spd;
}

Matrix SpdMatrix::to_matrix() const {
  Matrix m(n_, n_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) m(i, j) = static_cast<double>(at(i, j));
  }
  return m;
}

void validate(const GraphBundle& b) {
  const std::size_t n = b.num_nodes();
  if (static_cast<std::size_t>(b.features.rows()) != n) {
    throw InvalidArgument("bundle: feature rows (" + std::to_string(b.features.rows()) +
                          ") != num_nodes (" + std::to_string(n) + ")");
  }
  if (b.labels.size() != n) throw InvalidArgument("bundle: labels length != num_nodes");
  if (b.masks.train.size() != n || b.masks.val.size() != n || b.masks.test.size() != n) {
    throw InvalidArgument("bundle: mask length != num_nodes");
  }
  if (b.num_classes == 0) throw InvalidArgument("bundle: num_classes must be positive");
  for (std::size_t i = 0; i < n; ++i) {
    if (b.labels[i] < 0 || static_cast<std::size_t>(b.labels[i]) >= b.num_classes) {
      throw InvalidArgument("bundle: label of node " + std::to_string(i) + " out of range");
    }
    if (int(b.masks.train[i] != 0) + int(b.masks.val[i] != 0) + int(b.masks.test[i] != 0) > 1) {
      throw InvalidArgument("bundle: masks overlap at node " + std::to_string(i));
    }
  }
  if (!b.features.allFinite()) throw InvalidArgument("bundle: non-finite feature value");
}

std::vector<NodeId> mask_indices(std::span<const std::uint8_t> mask) {
  std::vector<NodeId> idx;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) idx.push_back(static_cast<NodeId>(i));
  }
  return idx;
}

}  // namespace mwgnn
