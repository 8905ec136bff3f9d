// SPDX-License-Identifier: Apache-2.0
#include "mwgnn/adaptive_conv.hpp"

#include "mwgnn/error.hpp"

namespace mwgnn {

using ad::Var;

void add_edge_scorer_params(ad::ParamStore& store, const std::string& prefix, std::size_t dst_dim,
                            std::size_t src_dim, std::size_t hidden) {
  const auto h = static_cast<Eigen::Index>(hidden);
  store.add_glorot(prefix + ".w_dst", static_cast<Eigen::Index>(dst_dim), h);
  store.add_glorot(prefix + ".w_src", static_cast<Eigen::Index>(src_dim), h);
  store.add_zeros(prefix + ".b", 1, h);
  store.add_glorot(prefix + ".v", h, 1);
}

Var edge_scorer(ad::Tape& tape, ad::ParamStore& store, const std::string& prefix, const ad::EdgeIndex& idx,
                Var dst_input, Var src_input) {
  Var w_dst = tape.param(store, prefix + ".w_dst");
  Var w_src = tape.param(store, prefix + ".w_src");
  if (w_dst.rows() != dst_input.cols() || w_src.rows() != src_input.cols()) {
    throw InvalidArgument("edge_scorer(" + prefix + "): input widths " + std::to_string(dst_input.cols()) + "/" +
                          std::to_string(src_input.cols()) + " do not match parameters " +
                          std::to_string(w_dst.rows()) + "/" + std::to_string(w_src.rows()));
  }
  // Project per node first, then combine per edge: O(N d h + E h).
  return ad::edge_pair_score(idx, ad::matmul(dst_input, w_dst), ad::matmul(src_input, w_src),
                             tape.param(store, prefix + ".b"), tape.param(store, prefix + ".v"));
}

EdgeScores decoupled_edge_weights(ad::Tape& tape, ad::ParamStore& store, const ad::EdgeIndex& idx, Var dst_f,
                                  Var features, Var dst_t, Var ldp, const std::string& prefix) {
  EdgeScores out;
  out.s_f = ad::segment_softmax(idx, edge_scorer(tape, store, prefix + ".psi_f", idx, dst_f, features));
  out.s_t = ad::segment_softmax(idx, edge_scorer(tape, store, prefix + ".psi_t", idx, dst_t, ldp));
  return out;
}

EdgeScores fuse_weights(EdgeScores scores, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("fuse_weights: alpha must lie in [0,1], got " + std::to_string(alpha));
  }
  // Exact endpoints keep s bit-identical to the selected channel.
  if (alpha == 1.0) {
    scores.s = scores.s_f;
  } else if (alpha == 0.0) {
    scores.s = scores.s_t;
  } else {
    scores.s = ad::add(ad::scale(scores.s_f, alpha), ad::scale(scores.s_t, 1.0 - alpha));
  }
  return scores;
}

void add_channel_params(ad::ParamStore& store, const std::string& prefix, std::size_t feature_dim,
                        std::size_t num_nodes, std::size_t hidden) {
  const auto h = static_cast<Eigen::Index>(hidden);
  store.add_glorot(prefix + ".fc_f", static_cast<Eigen::Index>(feature_dim), h);
  store.add_zeros(prefix + ".b_f", 1, h);
  store.add_glorot(prefix + ".fc_t", static_cast<Eigen::Index>(num_nodes), h);
  store.add_zeros(prefix + ".b_t", 1, h);
}

ChannelEmbeddings init_channel_embeddings(ad::Tape& tape, ad::ParamStore& store, const ad::EdgeIndex& idx,
                                          Var features, Var unit_weights, const std::string& prefix) {
  Var fc_f = tape.param(store, prefix + ".fc_f");
  Var fc_t = tape.param(store, prefix + ".fc_t");
  if (fc_f.rows() != features.cols()) throw InvalidArgument("init_channel_embeddings: fc_f width mismatch");
  if (fc_t.rows() != static_cast<Eigen::Index>(idx.num_nodes)) {
    throw InvalidArgument("init_channel_embeddings: fc_t must have num_nodes rows");
  }
  ChannelEmbeddings ch;
  ch.h_f0 = ad::tanh(ad::add(ad::matmul(features, fc_f), tape.param(store, prefix + ".b_f")));
  ch.h_t0 = ad::tanh(ad::add(ad::edge_aggregate(idx, unit_weights, fc_t), tape.param(store, prefix + ".b_t")));
  return ch;
}

void validate(const ConvLayerConfig& c) {
  if (c.lambda_feature < 0.0 || c.lambda_topology < 0.0 || !(c.lambda_feature + c.lambda_topology < 1.0)) {
    throw InvalidArgument("conv layer: need lambda1, lambda2 >= 0 and lambda1 + lambda2 < 1");
  }
  if (!(c.beta >= 0.0 && c.beta <= 1.0)) throw InvalidArgument("conv layer: beta must lie in [0,1]");
}

Var adaptive_layer(const ad::EdgeIndex& idx, Var h, Var s, const ChannelEmbeddings& ch, Var weight,
                   const ConvLayerConfig& cfg, Activation act) {
  validate(cfg);
  if (weight.rows() != h.cols() || weight.cols() != h.cols()) {
    throw InvalidArgument("adaptive_layer: W must be square with the hidden width");
  }
  Var m = ad::edge_aggregate(idx, s, h);
  const double keep = 1.0 - cfg.lambda_feature - cfg.lambda_topology;
  if (keep != 1.0) m = ad::scale(m, keep);
  if (cfg.lambda_feature != 0.0) m = ad::add(m, ad::scale(ch.h_f0, cfg.lambda_feature));
  if (cfg.lambda_topology != 0.0) m = ad::add(m, ad::scale(ch.h_t0, cfg.lambda_topology));

  Var out;
  if (cfg.beta == 0.0) {
    out = m;
  } else if (cfg.beta == 1.0) {
    out = ad::matmul(m, weight);
  } else {
    out = ad::add(ad::scale(m, 1.0 - cfg.beta), ad::scale(ad::matmul(m, weight), cfg.beta));
  }
  return act == Activation::kRelu ? ad::relu(out) : out;
}

}  // namespace mwgnn
