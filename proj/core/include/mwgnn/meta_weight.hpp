// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mwgnn/autodiff.hpp"
#include "mwgnn/graph.hpp"

/// Per-node Meta-Weight: three learned local distributions (topology from
/// degree-sorted LDP sequences, features over the k-hop context, position
/// from shortest-path distances) fused by a shared attention vector.
namespace mwgnn {

inline constexpr std::size_t kMaxContextLength = 64;

enum class FeatureMode { kAverage, kGru };

/// Graph-derived constants the meta-weight stack consumes. Built once per
/// (graph, k); must outlive every tape recorded against it.
struct StructuralInputs {
  std::size_t k = 0;
  Matrix ldp;             // raw LDP, N x 5
  Matrix ldp_normalized;  // column z-scores of ldp (zero-variance columns only centered)
  ad::SequenceBatch contexts;
  Matrix feature_average;  // N x F, mean of X over N_{v,k}
  Matrix positions;        // N x N, SPD as reals (-1 for disconnected)
  ad::EdgeIndex edges;     // graph adjacency grouped by destination
};

/// Degree-sorted N_{v,k}, cut to at most max_len entries. A long context
/// keeps v itself plus the highest-degree remaining members, still in
/// ascending (degree, id) order.
std::vector<NodeId> truncated_context(const Graph& g, NodeId v, std::size_t k,
                                      std::size_t max_len = kMaxContextLength);

/// Context order fed to the sequence encoders: ascending degree, with ties
/// broken by the feature row, then the LDP row (lexicographic), then id.
/// Nodes tied on every key contribute identical inputs, so the encodings are
/// equivariant under node relabeling. Truncation keeps v and the top
/// max_len - 1 members of this order.
std::vector<NodeId> encoder_context(const Graph& g, const Matrix& ldp, const Matrix& features, NodeId v,
                                    std::size_t k, std::size_t max_len = kMaxContextLength);

StructuralInputs prepare_structure(const GraphBundle& b, std::size_t k,
                                   std::size_t max_len = kMaxContextLength);

/// Column-wise standardization used for LDP model inputs.
Matrix standardize_columns(const Matrix& m);

// Parameter registration. Names are prefixed so several encoders can share
// one ParamStore.
void add_gru_params(ad::ParamStore& store, const std::string& prefix, std::size_t input_dim, std::size_t hidden);
ad::GruVars gru_vars(ad::Tape& tape, ad::ParamStore& store, const std::string& prefix);

/// Final hidden state of the GRU run over `sequence` (rows of a matrix,
/// first row first). An empty sequence yields the zero vector. 1 x hidden.
ad::Var gru_encode(ad::Tape& tape, const Matrix& sequence, const ad::GruVars& p);

/// D_t: GRU over the normalized LDP rows of each node's sorted context.
/// Expects a GRU registered under `prefix` with input_dim 5.
ad::Var topo_distribution(ad::Tape& tape, ad::ParamStore& store, const StructuralInputs& s,
                          const std::string& prefix = "meta.gru_t");

/// D_f. Average mode: context mean of X projected by "<prefix>.proj_w/proj_b".
/// GRU mode: GRU "<prefix>" over the degree-sorted feature rows.
/// `features` must outlive the tape.
ad::Var feature_distribution(ad::Tape& tape, ad::ParamStore& store, const StructuralInputs& s,
                             const Matrix& features, FeatureMode mode, const std::string& prefix = "meta.feat");
void add_feature_params(ad::ParamStore& store, const std::string& prefix, FeatureMode mode,
                        std::size_t feature_dim, std::size_t d_meta);

/// D_p = Phi(X_Position): tanh hidden layer then linear, N -> hidden -> d_meta.
ad::Var position_distribution(ad::Tape& tape, ad::ParamStore& store, const StructuralInputs& s,
                              const std::string& prefix = "meta.phi");
void add_position_params(ad::ParamStore& store, const std::string& prefix, std::size_t num_nodes,
                         std::size_t hidden, std::size_t d_meta);

/// Shared attention: q (1 x d_q), W_a (d_q x d_meta), b (1 x d_q).
void add_attention_params(ad::ParamStore& store, const std::string& prefix, std::size_t d_meta, std::size_t d_q);

struct AttentionResult {
  ad::Var scores;     // omega, N x m (pre-softmax)
  ad::Var attention;  // N x m, rows on the simplex
  ad::Var fused;      // sum_c a_c (row-broadcast) * D_c
};

/// Scores every distribution with omega = q . tanh(W_a d + b), softmaxes per
/// node across the m supplied distributions and returns the weighted sum.
AttentionResult attention_integrate(ad::Tape& tape, ad::ParamStore& store, const std::vector<ad::Var>& dists,
                                    const std::string& prefix = "meta.att");

}  // namespace mwgnn
