// SPDX-License-Identifier: Apache-2.0
#include "mwgnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mwgnn/error.hpp"

namespace mwgnn {

double global_edge_homophily(const GraphBundle& b) {
  const auto& g = b.graph;
  if (g.num_edges() == 0) throw InvalidArgument("global_edge_homophily: graph has no edges");
  std::size_t same = 0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    for (NodeId v : g.neighbors(u)) {
      if (u < v && b.labels[u] == b.labels[v]) ++same;
    }
  }
  return static_cast<double>(same) / static_cast<double>(g.num_edges());
}

std::optional<double> local_edge_homophily(const GraphBundle& b, NodeId v) {
  if (v >= b.num_nodes()) {
    throw InvalidArgument("local_edge_homophily: node " + std::to_string(v) + " out of range");
  }
  auto nb = b.graph.neighbors(v);
  if (nb.empty()) return std::nullopt;
  const auto same = std::count_if(nb.begin(), nb.end(), [&](NodeId u) { return b.labels[u] == b.labels[v]; });
  return static_cast<double>(same) / static_cast<double>(nb.size());
}

HomophilyReport homophily_report(const GraphBundle& b, std::size_t buckets) {
  if (buckets == 0) throw InvalidArgument("homophily_report: buckets must be positive");
  HomophilyReport r;
  r.global_h = global_edge_homophily(b);
  r.histogram.assign(buckets, 0);
  r.local_h.reserve(b.num_nodes());
  for (NodeId v = 0; v < b.num_nodes(); ++v) {
    auto h = local_edge_homophily(b, v);
    r.local_h.push_back(h);
    if (!h) {
      ++r.undefined_count;
      continue;
    }
    auto bucket = static_cast<std::size_t>(*h * static_cast<double>(buckets));
    ++r.histogram[std::min(bucket, buckets - 1)];
  }
  return r;
}

std::vector<double> katz_centrality(const Graph& g, const KatzOptions& opts) {
  if (!(opts.attenuation > 0.0)) throw InvalidArgument("katz_centrality: attenuation must be positive");
  const std::size_t n = g.num_nodes();
  std::vector<double> x(n, 0.0), next(n, 0.0);
  // A diverging series has iterates that grow geometrically; the bound
  // below is far above any convergent value for desk-scale graphs.
  constexpr double kBlowUp = 1e12;
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    double delta = 0.0;
    double peak = 0.0;
    for (NodeId v = 0; v < n; ++v) {
      double s = 0.0;
      for (NodeId u : g.neighbors(v)) s += x[u] + 1.0;
      next[v] = opts.attenuation * s;
      delta = std::max(delta, std::abs(next[v] - x[v]));
      peak = std::max(peak, std::abs(next[v]));
    }
    x.swap(next);
    if (!std::isfinite(peak) || peak > kBlowUp) {
      throw NumericError("katz_centrality: iteration diverged (attenuation >= 1/spectral radius?)");
    }
    if (delta <= opts.tol) return x;
  }
  throw NumericError("katz_centrality: no convergence within max_iter");
}

}  // namespace mwgnn
