// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mwgnn/graph.hpp"
#include "mwgnn/matrix.hpp"

/// Reverse-mode differentiation over dense 2-D tensors.
///
/// A Tape records one forward pass. Every op evaluates eagerly, checks its
/// result for NaN/Inf, and pushes a node holding the value plus a closure
/// that propagates the node's gradient to its parents. Parameters live in a
/// ParamStore outside the tape; Tape::backward accumulates into their grads.
namespace mwgnn::ad {

struct Parameter {
  Matrix value;
  Matrix grad;
};

class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed = 0) : rng_(seed) {}

  /// Glorot-uniform init: U(-a, a), a = sqrt(6 / (rows + cols)).
  Parameter& add_glorot(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Parameter& add_zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols);
  Parameter& add(const std::string& name, Matrix init);

  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;

  /// Name-ordered, so iteration order is deterministic.
  std::map<std::string, Parameter>& items() { return params_; }
  const std::map<std::string, Parameter>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;

  void zero_grad();
  bool grads_ready() const { return grads_ready_; }
  void mark_grads_consumed() { grads_ready_ = false; }

 private:
  friend class Tape;
  Parameter& insert(const std::string& name, Matrix init);

  std::map<std::string, Parameter> params_;
  std::mt19937_64 rng_;
  bool grads_ready_ = false;
};

class Tape;

/// Handle to a tape node. Cheap to copy; valid while its Tape lives.
class Var {
 public:
  Var() = default;
  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Var(Tape* t, std::size_t id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Directed edges j -> i grouped by destination i (CSR order). Edge e runs
/// from src[e] into dst[e]; edges into i are [offsets[i], offsets[i+1]).
struct EdgeIndex {
  std::size_t num_nodes = 0;
  std::vector<std::size_t> offsets;
  std::vector<NodeId> src;
  std::vector<NodeId> dst;

  std::size_t num_edges() const { return src.size(); }
  /// Graph adjacency; optionally with one self loop per node (appended last
  /// within each destination segment).
  static EdgeIndex from_graph(const Graph& g, bool self_loops = false);
};

/// Left-padded, length-aligned node sequences for a batched recurrent pass.
/// index[t * batch + v] is the input row fed to sequence v at step t, or -1
/// while v is still in its padding prefix. A padded step leaves the hidden
/// state untouched, so padding is exactly equivalent to a shorter sequence.
struct SequenceBatch {
  std::size_t batch = 0;
  std::size_t steps = 0;
  std::vector<std::int64_t> index;

  static SequenceBatch from_sequences(const std::vector<std::vector<NodeId>>& seqs);
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf whose gradient is retained on the tape (used by input-gradient checks).
  Var leaf(Matrix value);
  /// Leaf bound to a stored parameter; repeated calls return the same node.
  Var param(ParamStore& store, const std::string& name);

  /// Reverse sweep from a 1x1 loss. Throws InvalidArgument for non-scalar
  /// losses and StateError on a second call.
  void backward(Var loss);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds g into the gradient of node id (allocating it on first use).
  void accumulate(std::size_t id, const Matrix& g);
  Matrix& grad_buffer(std::size_t id);

  /// Records an op result. Throws NumericError if value is not finite.
  Var push(const char* op, Matrix value, std::vector<std::size_t> parents, BackwardFn fn);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  std::vector<ParamStore*> stores_;
  bool backward_done_ = false;
};

// Primitive ops. Shapes are checked; violations throw InvalidArgument.
// EdgeIndex arguments are held by reference and must outlive the tape.

Var matmul(Var a, Var b);
/// Same shape, or b a 1 x cols row broadcast over the rows of a.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
Var transpose(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var row_softmax(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var gather_rows(Var a, std::span<const NodeId> rows);
/// Column j as an N x 1 tensor.
Var column(Var a, Eigen::Index j);
/// Multiplies row i of a (N x d) by s(i, 0) (s is N x 1).
Var row_scale(Var a, Var s);
/// 1 x cols mean over the rows of a.
Var row_mean(Var a);
/// 1 x 1 sum of all entries.
Var sum(Var a);
/// Mean negative log-softmax likelihood of labels over the given rows.
Var masked_cross_entropy(Var logits, std::span<const std::int32_t> labels, std::span<const NodeId> rows);
/// out_i = sum over edges e into i of w_e * h_{src[e]}; w is E x 1.
Var edge_aggregate(const EdgeIndex& idx, Var weights, Var h);
/// Softmax of per-edge scores (E x 1) within each destination segment.
Var segment_softmax(const EdgeIndex& idx, Var scores);

/// Per-edge one-hidden-layer score, E x 1:
/// out_e = v . tanh(dst_proj[dst_e] + src_proj[src_e] + bias).
/// dst_proj and src_proj are N x h, bias 1 x h, v h x 1.
Var edge_pair_score(const EdgeIndex& idx, Var dst_proj, Var src_proj, Var bias, Var v);

/// GRU gate weights in one place. Each W is hidden x (hidden + input) acting
/// on [h, x]; biases are 1 x hidden.
struct GruVars {
  Var w_update, w_reset, w_cand;
  Var b_update, b_reset, b_cand;
};

/// Runs the gated recurrence over every sequence of the batch from a zero
/// state and returns the final hidden states (batch x hidden). Input rows
/// are taken from the constant `inputs` matrix through seq.index.
Var gru_sequence(const SequenceBatch& seq, const Matrix& inputs, const GruVars& p);

}  // namespace mwgnn::ad
