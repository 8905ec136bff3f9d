// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "mwgnn/autodiff.hpp"

/// Adaptive convolution: per-edge aggregation weights decoupled into a
/// feature-conditioned and a topology-conditioned score, plus independent
/// feature/topology channels injected at every layer.
namespace mwgnn {

/// Edge-level scores aligned with an EdgeIndex (E x 1 each).
struct EdgeScores {
  ad::Var s_f;
  ad::Var s_t;
  ad::Var s;  // populated by fuse_weights
};

/// Scalar edge scorer Psi(dst_input, src_input) = v . tanh(W_dst a_i + W_src b_j + c),
/// i.e. a one-hidden-layer perceptron on the concatenation [a_i || b_j].
void add_edge_scorer_params(ad::ParamStore& store, const std::string& prefix, std::size_t dst_dim,
                            std::size_t src_dim, std::size_t hidden);

/// Raw (unnormalized) scores for every edge j -> i of idx. E x 1.
ad::Var edge_scorer(ad::Tape& tape, ad::ParamStore& store, const std::string& prefix, const ad::EdgeIndex& idx,
                    ad::Var dst_input, ad::Var src_input);

/// s_f = softmax_i Psi_f([dst_f_i || X_j]), s_t = softmax_i Psi_t([dst_t_i || LDP_j]),
/// each normalized over the in-edges of destination i. The full model passes
/// the meta-weight as both dst inputs.
EdgeScores decoupled_edge_weights(ad::Tape& tape, ad::ParamStore& store, const ad::EdgeIndex& idx,
                                  ad::Var dst_f, ad::Var features, ad::Var dst_t, ad::Var ldp,
                                  const std::string& prefix = "conv");

/// s = alpha * s_f + (1 - alpha) * s_t. Throws InvalidArgument if alpha is outside [0, 1].
EdgeScores fuse_weights(EdgeScores scores, double alpha);

struct ChannelEmbeddings {
  ad::Var h_f0;  // tanh(X fc_f + b_f)
  ad::Var h_t0;  // tanh(A fc_t + b_t), A applied sparsely
};

void add_channel_params(ad::ParamStore& store, const std::string& prefix, std::size_t feature_dim,
                        std::size_t num_nodes, std::size_t hidden);

/// Built from CSR rows: (A fc_t)_i is the sum of fc_t rows over i's neighbors.
/// `unit_weights` must be an E x 1 constant of ones on the same tape.
ChannelEmbeddings init_channel_embeddings(ad::Tape& tape, ad::ParamStore& store, const ad::EdgeIndex& idx,
                                          ad::Var features, ad::Var unit_weights,
                                          const std::string& prefix = "chan");

struct ConvLayerConfig {
  double lambda_feature = 0.1;   // lambda_1
  double lambda_topology = 0.1;  // lambda_2
  double beta = 0.5;
};

/// Throws InvalidArgument unless lambda_1, lambda_2 >= 0, lambda_1 + lambda_2 < 1
/// and beta in [0, 1].
void validate(const ConvLayerConfig& c);

enum class Activation { kRelu, kIdentity };

/// M = (1 - l1 - l2) * (P H) + l1 * H_f0 + l2 * H_t0 with (P H)_i = sum_j s_ij H_j;
/// returns act(M ((1 - beta) I + beta W)) computed as (1 - beta) M + beta M W.
ad::Var adaptive_layer(const ad::EdgeIndex& idx, ad::Var h, ad::Var s, const ChannelEmbeddings& ch, ad::Var weight,
                       const ConvLayerConfig& cfg, Activation act);

}  // namespace mwgnn
