// SPDX-License-Identifier: Apache-2.0
#include "mwgnn/meta_weight.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mwgnn/error.hpp"

namespace mwgnn {

using ad::Var;

namespace {

using NodeLess = std::function<bool(NodeId, NodeId)>;

// Keeps the ego node plus the last max_len - 1 others of an ordered context.
std::vector<NodeId> cut_context(std::vector<NodeId> ctx, NodeId v, std::size_t max_len, const NodeLess& less) {
  if (max_len == 0) throw InvalidArgument("truncated_context: max_len must be positive");
  if (ctx.size() <= max_len) return ctx;
  std::vector<NodeId> others;
  others.reserve(ctx.size() - 1);
  for (NodeId u : ctx) {
    if (u != v) others.push_back(u);
  }
  std::vector<NodeId> kept(others.end() - static_cast<std::ptrdiff_t>(max_len - 1), others.end());
  kept.push_back(v);
  std::stable_sort(kept.begin(), kept.end(), less);
  return kept;
}

bool row_less(const Matrix& m, NodeId a, NodeId b) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (m(a, c) != m(b, c)) return m(a, c) < m(b, c);
  }
  return false;
}

}  // namespace

std::vector<NodeId> truncated_context(const Graph& g, NodeId v, std::size_t k, std::size_t max_len) {
  return cut_context(sorted_context(g, v, k), v, max_len, [&](NodeId a, NodeId b) {
    if (g.degree(a) != g.degree(b)) return g.degree(a) < g.degree(b);
    return a < b;
  });
}

std::vector<NodeId> encoder_context(const Graph& g, const Matrix& ldp, const Matrix& features, NodeId v,
                                    std::size_t k, std::size_t max_len) {
  const NodeLess less = [&](NodeId a, NodeId b) {
    if (g.degree(a) != g.degree(b)) return g.degree(a) < g.degree(b);
    if (row_less(features, a, b)) return true;
    if (row_less(features, b, a)) return false;
    if (row_less(ldp, a, b)) return true;
    if (row_less(ldp, b, a)) return false;
    return a < b;
  };
  auto ctx = sorted_context(g, v, k);
  std::stable_sort(ctx.begin(), ctx.end(), less);
  return cut_context(std::move(ctx), v, max_len, less);
}

Matrix standardize_columns(const Matrix& m) {
  Matrix out = m;
  if (m.rows() == 0) return out;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double mean = m.col(c).mean();
    const double var = (m.col(c).array() - mean).square().mean();
    const double sd = var > 1e-24 ? std::sqrt(var) : 1.0;
    out.col(c) = ((m.col(c).array() - mean) / sd).matrix();
  }
  return out;
}

StructuralInputs prepare_structure(const GraphBundle& b, std::size_t k, std::size_t max_len) {
  const Graph& g = b.graph;
  const std::size_t n = g.num_nodes();
  StructuralInputs s;
  s.k = k;
  s.ldp = local_degree_profile(g).to_matrix();
  s.ldp_normalized = standardize_columns(s.ldp);

  std::vector<std::vector<NodeId>> seqs(n);
  s.feature_average = Matrix::Zero(static_cast<Eigen::Index>(n), b.features.cols());
  for (NodeId v = 0; v < n; ++v) {
    const auto hood = k_hop_neighbors(g, v, k);
    auto row = s.feature_average.row(v);
    for (NodeId u : hood) row += b.features.row(u);
    row /= static_cast<double>(hood.size());
    seqs[v] = encoder_context(g, s.ldp, b.features, v, k, max_len);
  }
  s.contexts = ad::SequenceBatch::from_sequences(seqs);
  s.positions = shortest_path_matrix(g).to_matrix();
  s.edges = ad::EdgeIndex::from_graph(g);
  return s;
}

void add_gru_params(ad::ParamStore& store, const std::string& prefix, std::size_t input_dim, std::size_t hidden) {
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto cols = static_cast<Eigen::Index>(hidden + input_dim);
  store.add_glorot(prefix + ".w_update", h, cols);
  store.add_glorot(prefix + ".w_reset", h, cols);
  store.add_glorot(prefix + ".w_cand", h, cols);
  store.add_zeros(prefix + ".b_update", 1, h);
  store.add_zeros(prefix + ".b_reset", 1, h);
  store.add_zeros(prefix + ".b_cand", 1, h);
}

ad::GruVars gru_vars(ad::Tape& tape, ad::ParamStore& store, const std::string& prefix) {
  return {tape.param(store, prefix + ".w_update"), tape.param(store, prefix + ".w_reset"),
          tape.param(store, prefix + ".w_cand"),   tape.param(store, prefix + ".b_update"),
          tape.param(store, prefix + ".b_reset"),  tape.param(store, prefix + ".b_cand")};
}

Var gru_encode(ad::Tape& tape, const Matrix& sequence, const ad::GruVars& p) {
  const Eigen::Index hidden = p.w_update.rows();
  if (sequence.rows() == 0) return tape.constant(Matrix::Zero(1, hidden));
  std::vector<NodeId> order(static_cast<std::size_t>(sequence.rows()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<NodeId>(i);
  const auto batch = ad::SequenceBatch::from_sequences({order});
  return ad::gru_sequence(batch, sequence, p);
}

Var topo_distribution(ad::Tape& tape, ad::ParamStore& store, const StructuralInputs& s, const std::string& prefix) {
  const auto p = gru_vars(tape, store, prefix);
  if (p.w_update.cols() - p.w_update.rows() != 5) {
    throw InvalidArgument("topo_distribution: GRU input_dim must be 5 (LDP width)");
  }
  return ad::gru_sequence(s.contexts, s.ldp_normalized, p);
}

void add_feature_params(ad::ParamStore& store, const std::string& prefix, FeatureMode mode,
                        std::size_t feature_dim, std::size_t d_meta) {
  if (mode == FeatureMode::kAverage) {
    store.add_glorot(prefix + ".proj_w", static_cast<Eigen::Index>(feature_dim), static_cast<Eigen::Index>(d_meta));
    store.add_zeros(prefix + ".proj_b", 1, static_cast<Eigen::Index>(d_meta));
  } else {
    add_gru_params(store, prefix, feature_dim, d_meta);
  }
}

Var feature_distribution(ad::Tape& tape, ad::ParamStore& store, const StructuralInputs& s, const Matrix& features,
                         FeatureMode mode, const std::string& prefix) {
  if (mode == FeatureMode::kAverage) {
    if (!store.contains(prefix + ".proj_w")) {
      throw InvalidArgument("feature_distribution: average mode needs " + prefix + ".proj_w");
    }
    Var avg = tape.constant(s.feature_average);
    return ad::add(ad::matmul(avg, tape.param(store, prefix + ".proj_w")), tape.param(store, prefix + ".proj_b"));
  }
  if (!store.contains(prefix + ".w_update")) {
    throw InvalidArgument("feature_distribution: gru mode needs GRU parameters under " + prefix);
  }
  const auto p = gru_vars(tape, store, prefix);
  if (p.w_update.cols() - p.w_update.rows() != features.cols()) {
    throw InvalidArgument("feature_distribution: GRU input_dim must equal the feature width");
  }
  return ad::gru_sequence(s.contexts, features, p);
}

void add_position_params(ad::ParamStore& store, const std::string& prefix, std::size_t num_nodes, std::size_t hidden,
                         std::size_t d_meta) {
  const auto n = static_cast<Eigen::Index>(num_nodes);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto d = static_cast<Eigen::Index>(d_meta);
  store.add_glorot(prefix + ".w1", n, h);
  store.add_zeros(prefix + ".b1", 1, h);
  store.add_glorot(prefix + ".w2", h, d);
  store.add_zeros(prefix + ".b2", 1, d);
}

Var position_distribution(ad::Tape& tape, ad::ParamStore& store, const StructuralInputs& s,
                          const std::string& prefix) {
  Var w1 = tape.param(store, prefix + ".w1");
  if (w1.rows() != s.positions.cols()) {
    throw InvalidArgument("position_distribution: input width " + std::to_string(w1.rows()) +
                          " != num_nodes " + std::to_string(s.positions.cols()));
  }
  Var pos = tape.constant(s.positions);
  Var hidden = ad::tanh(ad::add(ad::matmul(pos, w1), tape.param(store, prefix + ".b1")));
  return ad::add(ad::matmul(hidden, tape.param(store, prefix + ".w2")), tape.param(store, prefix + ".b2"));
}

void add_attention_params(ad::ParamStore& store, const std::string& prefix, std::size_t d_meta, std::size_t d_q) {
  const auto dq = static_cast<Eigen::Index>(d_q);
  store.add_glorot(prefix + ".q", 1, dq);
  store.add_glorot(prefix + ".w", dq, static_cast<Eigen::Index>(d_meta));
  store.add_zeros(prefix + ".b", 1, dq);
}

AttentionResult attention_integrate(ad::Tape& tape, ad::ParamStore& store, const std::vector<Var>& dists,
                                    const std::string& prefix) {
  if (dists.empty()) throw InvalidArgument("attention_integrate: no distributions");
  for (const auto& d : dists) {
    if (d.rows() != dists.front().rows() || d.cols() != dists.front().cols()) {
      throw InvalidArgument("attention_integrate: distributions must share shape N x d_meta");
    }
  }
  Var q_t = ad::transpose(tape.param(store, prefix + ".q"));
  Var w_t = ad::transpose(tape.param(store, prefix + ".w"));
  Var b = tape.param(store, prefix + ".b");
  if (w_t.rows() != dists.front().cols()) {
    throw InvalidArgument("attention_integrate: W_a width does not match d_meta");
  }

  std::vector<Var> omegas;
  omegas.reserve(dists.size());
  for (const auto& d : dists) omegas.push_back(ad::matmul(ad::tanh(ad::add(ad::matmul(d, w_t), b)), q_t));
  AttentionResult r;
  r.scores = ad::concat_cols(omegas);
  r.attention = ad::row_softmax(r.scores);
  r.fused = ad::row_scale(dists[0], ad::column(r.attention, 0));
  for (std::size_t c = 1; c < dists.size(); ++c) {
    r.fused = ad::add(r.fused, ad::row_scale(dists[c], ad::column(r.attention, static_cast<Eigen::Index>(c))));
  }
  return r;
}

}  // namespace mwgnn
