// SPDX-License-Identifier: Apache-2.0
#include "mwgnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "mwgnn/error.hpp"

namespace mwgnn::ad {

// ---------------------------------------------------------------------------
// ParamStore

Parameter& ParamStore::insert(const std::string& name, Matrix init) {
  if (params_.count(name)) throw InvalidArgument("ParamStore: duplicate parameter '" + name + "'");
  Parameter p;
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamStore::add_glorot(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng_);
  return insert(name, std::move(m));
}

Parameter& ParamStore::add_zeros(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  return insert(name, Matrix::Zero(rows, cols));
}

Parameter& ParamStore::add(const std::string& name, Matrix init) { return insert(name, std::move(init)); }

Parameter& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidArgument("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

const Parameter& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw InvalidArgument("ParamStore: unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.setZero(p.value.rows(), p.value.cols());
  grads_ready_ = false;
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) throw NumericError("constant: non-finite value");
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::leaf(Matrix value) {
  Var v = constant(std::move(value));
  nodes_[v.id_].requires_grad = true;
  return v;
}

Var Tape::param(ParamStore& store, const std::string& name) {
  Parameter& p = store.get(name);
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
  if (std::find(stores_.begin(), stores_.end(), &store) == stores_.end()) stores_.push_back(&store);
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  param_nodes_[&p] = nodes_.size() - 1;
  return {this, nodes_.size() - 1};
}

Var Tape::push(const char* op, Matrix value, std::vector<std::size_t> parents, BackwardFn fn) {
  if (!value.allFinite()) throw NumericError(std::string(op) + ": non-finite output");
  Node n;
  n.value = std::move(value);
  for (auto p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  n.parents = std::move(parents);
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Matrix& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  if (!nodes_[id].requires_grad) return;
  grad_buffer(id) += g;
}

void Tape::backward(Var loss) {
  if (backward_done_) throw StateError("backward: already run on this tape; record a new tape");
  if (loss.tape_ != this) throw InvalidArgument("backward: loss belongs to another tape");
  const Node& root = nodes_[loss.id_];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw InvalidArgument("backward: loss must be 1x1, got " + std::to_string(root.value.rows()) + "x" +
                          std::to_string(root.value.cols()));
  }
  backward_done_ = true;
  grad_buffer(loss.id_).setConstant(1.0);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, i);
  }
  for (auto& n : nodes_) {
    if (n.param && n.grad.size() != 0) n.param->grad += n.grad;
  }
  for (auto* s : stores_) s->grads_ready_ = true;
}

// ---------------------------------------------------------------------------
// Index helpers

EdgeIndex EdgeIndex::from_graph(const Graph& g, bool self_loops) {
  EdgeIndex idx;
  idx.num_nodes = g.num_nodes();
  idx.offsets.assign(idx.num_nodes + 1, 0);
  idx.src.reserve(g.num_directed_edges() + (self_loops ? idx.num_nodes : 0));
  idx.dst.reserve(idx.src.capacity());
  for (NodeId i = 0; i < idx.num_nodes; ++i) {
    for (NodeId j : g.neighbors(i)) {
      idx.src.push_back(j);
      idx.dst.push_back(i);
    }
    if (self_loops) {
      idx.src.push_back(i);
      idx.dst.push_back(i);
    }
    idx.offsets[i + 1] = idx.src.size();
  }
  return idx;
}

SequenceBatch SequenceBatch::from_sequences(const std::vector<std::vector<NodeId>>& seqs) {
  SequenceBatch sb;
  sb.batch = seqs.size();
  for (const auto& s : seqs) sb.steps = std::max(sb.steps, s.size());
  sb.index.assign(sb.batch * sb.steps, -1);
  for (std::size_t v = 0; v < sb.batch; ++v) {
    const std::size_t pad = sb.steps - seqs[v].size();
    for (std::size_t t = 0; t < seqs[v].size(); ++t) {
      sb.index[(pad + t) * sb.batch + v] = static_cast<std::int64_t>(seqs[v][t]);
    }
  }
  return sb;
}

// ---------------------------------------------------------------------------
// Ops

namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw InvalidArgument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                        std::to_string(b.cols()));
}

Tape& same_tape(Var a, Var b) {
  if (a.tape() != b.tape()) throw InvalidArgument("operands recorded on different tapes");
  return *a.tape();
}

// 1 - 2 / (e^{2x} + 1): vectorizes through Eigen's exp, saturates cleanly.
template <typename Derived>
void tanh_inplace(Eigen::ArrayBase<Derived>& a) {
  a = 1.0 - 2.0 / ((2.0 * a).exp() + 1.0);
}

Matrix tanh_of(const Matrix& m) {
  Matrix out = m;
  auto arr = out.array();
  tanh_inplace(arr);
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) shape_error("matmul", a.value(), b.value());
  Matrix out = a.value() * b.value();
  const auto ia = a.id(), ib = b.id();
  return t.push("matmul", std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.grad_buffer(ia).noalias() += g * tp.value(ib).transpose();
    if (tp.requires_grad(ib)) tp.grad_buffer(ib).noalias() += tp.value(ia).transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const auto ia = a.id(), ib = b.id();
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    return t.push("add", a.value() + b.value(), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
      tp.accumulate(ia, tp.grad(self));
      tp.accumulate(ib, tp.grad(self));
    });
  }
  if (b.rows() == 1 && a.cols() == b.cols()) {
    Matrix out = a.value().rowwise() + b.value().row(0);
    return t.push("add", std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
      tp.accumulate(ia, tp.grad(self));
      if (tp.requires_grad(ib)) tp.grad_buffer(ib) += tp.grad(self).colwise().sum();
    });
  }
  shape_error("add", a.value(), b.value());
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("sub", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.push("sub", a.value() - b.value(), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    tp.accumulate(ia, tp.grad(self));
    if (tp.requires_grad(ib)) tp.grad_buffer(ib) -= tp.grad(self);
  });
}

Var hadamard(Var a, Var b) {
  Tape& t = same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("hadamard", a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  Matrix out = a.value().cwiseProduct(b.value());
  return t.push("hadamard", std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.grad_buffer(ia) += g.cwiseProduct(tp.value(ib));
    if (tp.requires_grad(ib)) tp.grad_buffer(ib) += g.cwiseProduct(tp.value(ia));
  });
}

Var scale(Var a, double s) {
  const auto ia = a.id();
  return a.tape()->push("scale", a.value() * s, {ia}, [ia, s](Tape& tp, std::size_t self) {
    if (tp.requires_grad(ia)) tp.grad_buffer(ia) += s * tp.grad(self);
  });
}

Var transpose(Var a) {
  const auto ia = a.id();
  Matrix out = a.value().transpose();
  return a.tape()->push("transpose", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    if (tp.requires_grad(ia)) tp.grad_buffer(ia) += tp.grad(self).transpose();
  });
}

Var tanh(Var a) {
  const auto ia = a.id();
  Matrix out = tanh_of(a.value());
  return a.tape()->push("tanh", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    const auto y = tp.value(self).array();
    tp.grad_buffer(ia).array() += tp.grad(self).array() * (1.0 - y * y);
  });
}

Var sigmoid(Var a) {
  const auto ia = a.id();
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return a.tape()->push("sigmoid", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    const auto y = tp.value(self).array();
    tp.grad_buffer(ia).array() += tp.grad(self).array() * y * (1.0 - y);
  });
}

Var relu(Var a) {
  const auto ia = a.id();
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape()->push("relu", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    tp.grad_buffer(ia).array() += (tp.value(ia).array() > 0.0).select(tp.grad(self).array(), 0.0);
  });
}

Var row_softmax(Var a) {
  const auto ia = a.id();
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double mx = a.value().row(i).maxCoeff();
    out.row(i) = (a.value().row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return a.tape()->push("row_softmax", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    const Matrix& y = tp.value(self);
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad_buffer(ia);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double dot = y.row(i).dot(g.row(i));
      ga.row(i).array() += y.row(i).array() * (g.row(i).array() - dot);
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidArgument("concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> starts;
  for (const auto& p : parts) {
    if (p.tape() != &t) throw InvalidArgument("concat_cols: operands recorded on different tapes");
    if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    ids.push_back(p.id());
    starts.push_back(cols);
    cols += p.cols();
  }
  Matrix out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) out.middleCols(starts[k], parts[k].cols()) = parts[k].value();
  return t.push("concat_cols", std::move(out), ids, [ids, starts](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.requires_grad(ids[k])) {
        tp.grad_buffer(ids[k]) += g.middleCols(starts[k], tp.value(ids[k]).cols());
      }
    }
  });
}

Var gather_rows(Var a, std::span<const NodeId> rows) {
  const auto ia = a.id();
  Matrix out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= a.rows()) throw InvalidArgument("gather_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(r)) = a.value().row(rows[r]);
  }
  std::vector<NodeId> idx(rows.begin(), rows.end());
  return a.tape()->push("gather_rows", std::move(out), {ia}, [ia, idx = std::move(idx)](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    const Matrix& g = tp.grad(self);
    Matrix& ga = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < idx.size(); ++r) ga.row(idx[r]) += g.row(static_cast<Eigen::Index>(r));
  });
}

Var column(Var a, Eigen::Index j) {
  if (j < 0 || j >= a.cols()) throw InvalidArgument("column: index out of range");
  const auto ia = a.id();
  Matrix out = a.value().col(j);
  return a.tape()->push("column", std::move(out), {ia}, [ia, j](Tape& tp, std::size_t self) {
    if (tp.requires_grad(ia)) tp.grad_buffer(ia).col(j) += tp.grad(self);
  });
}

Var row_scale(Var a, Var s) {
  Tape& t = same_tape(a, s);
  if (s.cols() != 1 || s.rows() != a.rows()) shape_error("row_scale", a.value(), s.value());
  const auto ia = a.id(), is = s.id();
  Matrix out = a.value().array().colwise() * s.value().col(0).array();
  return t.push("row_scale", std::move(out), {ia, is}, [ia, is](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.grad_buffer(ia).array() += g.array().colwise() * tp.value(is).col(0).array();
    if (tp.requires_grad(is)) tp.grad_buffer(is) += g.cwiseProduct(tp.value(ia)).rowwise().sum();
  });
}

Var row_mean(Var a) {
  if (a.rows() == 0) throw InvalidArgument("row_mean: empty input");
  const auto ia = a.id();
  const double inv = 1.0 / static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() * inv;
  return a.tape()->push("row_mean", std::move(out), {ia}, [ia, inv](Tape& tp, std::size_t self) {
    if (tp.requires_grad(ia)) tp.grad_buffer(ia).rowwise() += tp.grad(self).row(0) * inv;
  });
}

Var sum(Var a) {
  const auto ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->push("sum", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
    if (tp.requires_grad(ia)) tp.grad_buffer(ia).array() += tp.grad(self)(0, 0);
  });
}

Var masked_cross_entropy(Var logits, std::span<const std::int32_t> labels, std::span<const NodeId> rows) {
  if (rows.empty()) throw InvalidArgument("masked_cross_entropy: empty mask");
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw InvalidArgument("masked_cross_entropy: labels length != logits rows");
  }
  const Matrix& z = logits.value();
  Matrix probs(static_cast<Eigen::Index>(rows.size()), z.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(rows[r]);
    const auto y = labels[rows[r]];
    if (y < 0 || y >= z.cols()) throw InvalidArgument("masked_cross_entropy: label out of range");
    const double mx = z.row(i).maxCoeff();
    const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    loss += lse - z(i, y);
    probs.row(static_cast<Eigen::Index>(r)) = (z.row(i).array() - lse).exp().matrix();
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  Matrix out(1, 1);
  out(0, 0) = loss * inv;
  std::vector<NodeId> idx(rows.begin(), rows.end());
  std::vector<std::int32_t> ys(labels.begin(), labels.end());
  const auto il = logits.id();
  return logits.tape()->push(
      "masked_cross_entropy", std::move(out), {il},
      [il, inv, idx = std::move(idx), ys = std::move(ys), probs = std::move(probs)](Tape& tp, std::size_t self) {
        if (!tp.requires_grad(il)) return;
        const double g = tp.grad(self)(0, 0) * inv;
        Matrix& gl = tp.grad_buffer(il);
        for (std::size_t r = 0; r < idx.size(); ++r) {
          auto row = gl.row(idx[r]);
          row += g * probs.row(static_cast<Eigen::Index>(r));
          row(ys[idx[r]]) -= g;
        }
      });
}

Var edge_aggregate(const EdgeIndex& idx, Var weights, Var h) {
  Tape& t = same_tape(weights, h);
  const auto e = static_cast<Eigen::Index>(idx.num_edges());
  if (weights.rows() != e || weights.cols() != 1) {
    throw InvalidArgument("edge_aggregate: weights must be E x 1 (E=" + std::to_string(e) + ")");
  }
  for (NodeId s : idx.src) {
    if (s >= h.rows()) throw InvalidArgument("edge_aggregate: source index beyond rows of h");
  }
  const Matrix& w = weights.value();
  const Matrix& x = h.value();
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(idx.num_nodes), x.cols());
  for (std::size_t i = 0; i < idx.num_nodes; ++i) {
    auto row = out.row(static_cast<Eigen::Index>(i));
    for (std::size_t k = idx.offsets[i]; k < idx.offsets[i + 1]; ++k) {
      row.noalias() += w(static_cast<Eigen::Index>(k), 0) * x.row(idx.src[k]);
    }
  }
  const auto iw = weights.id(), ih = h.id();
  return t.push("edge_aggregate", std::move(out), {iw, ih}, [&idx, iw, ih](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    const bool need_w = tp.requires_grad(iw);
    const bool need_h = tp.requires_grad(ih);
    Matrix* gw = need_w ? &tp.grad_buffer(iw) : nullptr;
    Matrix* gh = need_h ? &tp.grad_buffer(ih) : nullptr;
    const Matrix& w = tp.value(iw);
    const Matrix& x = tp.value(ih);
    for (std::size_t i = 0; i < idx.num_nodes; ++i) {
      const auto gi = g.row(static_cast<Eigen::Index>(i));
      for (std::size_t k = idx.offsets[i]; k < idx.offsets[i + 1]; ++k) {
        const auto ek = static_cast<Eigen::Index>(k);
        if (gw) (*gw)(ek, 0) += gi.dot(x.row(idx.src[k]));
        if (gh) gh->row(idx.src[k]).noalias() += w(ek, 0) * gi;
      }
    }
  });
}

Var segment_softmax(const EdgeIndex& idx, Var scores) {
  const auto e = static_cast<Eigen::Index>(idx.num_edges());
  if (scores.rows() != e || scores.cols() != 1) throw InvalidArgument("segment_softmax: scores must be E x 1");
  const Matrix& s = scores.value();
  Matrix out(e, 1);
  for (std::size_t i = 0; i < idx.num_nodes; ++i) {
    const auto lo = static_cast<Eigen::Index>(idx.offsets[i]);
    const auto n = static_cast<Eigen::Index>(idx.offsets[i + 1]) - lo;
    if (n == 0) continue;
    const double mx = s.col(0).segment(lo, n).maxCoeff();
    auto seg = out.col(0).segment(lo, n);
    seg = (s.col(0).segment(lo, n).array() - mx).exp().matrix();
    seg /= seg.sum();
  }
  const auto is = scores.id();
  return scores.tape()->push("segment_softmax", std::move(out), {is}, [&idx, is](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(is)) return;
    const Matrix& y = tp.value(self);
    const Matrix& g = tp.grad(self);
    Matrix& gs = tp.grad_buffer(is);
    for (std::size_t i = 0; i < idx.num_nodes; ++i) {
      const auto lo = static_cast<Eigen::Index>(idx.offsets[i]);
      const auto n = static_cast<Eigen::Index>(idx.offsets[i + 1]) - lo;
      if (n == 0) continue;
      const double dot = y.col(0).segment(lo, n).dot(g.col(0).segment(lo, n));
      gs.col(0).segment(lo, n).array() +=
          y.col(0).segment(lo, n).array() * (g.col(0).segment(lo, n).array() - dot);
    }
  });
}

Var edge_pair_score(const EdgeIndex& idx, Var dst_proj, Var src_proj, Var bias, Var v) {
  Tape& t = same_tape(dst_proj, src_proj);
  same_tape(dst_proj, bias);
  same_tape(dst_proj, v);
  const Eigen::Index h = dst_proj.cols();
  const auto n = static_cast<Eigen::Index>(idx.num_nodes);
  if (dst_proj.rows() != n || src_proj.rows() != n || src_proj.cols() != h) {
    shape_error("edge_pair_score", dst_proj.value(), src_proj.value());
  }
  if (bias.rows() != 1 || bias.cols() != h) shape_error("edge_pair_score", dst_proj.value(), bias.value());
  if (v.rows() != h || v.cols() != 1) shape_error("edge_pair_score", dst_proj.value(), v.value());

  const auto e = static_cast<Eigen::Index>(idx.num_edges());
  const Matrix& d = dst_proj.value();
  const Matrix& sp = src_proj.value();
  auto hidden = std::make_shared<Matrix>(e, h);
  for (std::size_t i = 0; i < idx.num_nodes; ++i) {
    const auto lo = static_cast<Eigen::Index>(idx.offsets[i]);
    const auto hi = static_cast<Eigen::Index>(idx.offsets[i + 1]);
    const auto base = (d.row(static_cast<Eigen::Index>(i)) + bias.value().row(0)).eval();
    for (Eigen::Index k = lo; k < hi; ++k) hidden->row(k) = base + sp.row(idx.src[static_cast<std::size_t>(k)]);
  }
  {
    auto arr = hidden->array();
    tanh_inplace(arr);
  }
  Matrix out = *hidden * v.value();
  const std::size_t idd = dst_proj.id(), ids = src_proj.id(), ib = bias.id(), iv = v.id();
  return t.push("edge_pair_score", std::move(out), {idd, ids, ib, iv},
                [&idx, hidden, idd, ids, ib, iv](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad(self);
                  const Matrix& th = *hidden;
                  if (tp.requires_grad(iv)) tp.grad_buffer(iv).noalias() += th.transpose() * g;
                  // dz_e = g_e * v (.) (1 - t_e^2)
                  Matrix dz = (1.0 - th.array().square()).matrix();
                  dz.array().rowwise() *= tp.value(iv).col(0).transpose().array();
                  dz.array().colwise() *= g.col(0).array();
                  if (tp.requires_grad(ib)) tp.grad_buffer(ib) += dz.colwise().sum();
                  if (tp.requires_grad(idd)) {
                    Matrix& gd = tp.grad_buffer(idd);
                    for (std::size_t i = 0; i < idx.num_nodes; ++i) {
                      const auto lo = static_cast<Eigen::Index>(idx.offsets[i]);
                      const auto cnt = static_cast<Eigen::Index>(idx.offsets[i + 1]) - lo;
                      if (cnt > 0) gd.row(static_cast<Eigen::Index>(i)) += dz.middleRows(lo, cnt).colwise().sum();
                    }
                  }
                  if (tp.requires_grad(ids)) {
                    Matrix& gs = tp.grad_buffer(ids);
                    for (std::size_t k = 0; k < idx.num_edges(); ++k) {
                      gs.row(idx.src[k]) += dz.row(static_cast<Eigen::Index>(k));
                    }
                  }
                });
}

// ---------------------------------------------------------------------------
// Batched GRU

namespace {

Matrix sigmoid_of(const Matrix& m) { return (1.0 / (1.0 + (-m.array()).exp())).matrix(); }

struct GruStep {
  Matrix h_prev, u, r, cand;
};

}  // namespace

Var gru_sequence(const SequenceBatch& seq, const Matrix& inputs, const GruVars& p) {
  Tape& t = *p.w_update.tape();
  const Eigen::Index hidden = p.w_update.rows();
  const Eigen::Index in_dim = inputs.cols();
  for (Var w : {p.w_update, p.w_reset, p.w_cand}) {
    if (w.rows() != hidden || w.cols() != hidden + in_dim) {
      throw InvalidArgument("gru_sequence: gate matrix must be hidden x (hidden + input), got " +
                            std::to_string(w.rows()) + "x" + std::to_string(w.cols()) + " for input dim " +
                            std::to_string(in_dim));
    }
  }
  for (Var b : {p.b_update, p.b_reset, p.b_cand}) {
    if (b.rows() != 1 || b.cols() != hidden) throw InvalidArgument("gru_sequence: bias must be 1 x hidden");
  }
  if (seq.index.size() != seq.batch * seq.steps) throw InvalidArgument("gru_sequence: malformed sequence batch");
  for (auto r : seq.index) {
    if (r >= inputs.rows()) throw InvalidArgument("gru_sequence: sequence refers past the input rows");
  }

  const auto batch = static_cast<Eigen::Index>(seq.batch);
  // Split [h, x] weights; input projections are computed once per input row.
  auto hpart = [&](Var w) { return Matrix(w.value().leftCols(hidden)); };
  const Matrix wu_h = hpart(p.w_update), wr_h = hpart(p.w_reset), wc_h = hpart(p.w_cand);
  Matrix x_proj(inputs.rows(), 3 * hidden);
  x_proj.leftCols(hidden).noalias() = inputs * p.w_update.value().rightCols(in_dim).transpose();
  x_proj.middleCols(hidden, hidden).noalias() = inputs * p.w_reset.value().rightCols(in_dim).transpose();
  x_proj.rightCols(hidden).noalias() = inputs * p.w_cand.value().rightCols(in_dim).transpose();

  auto steps = std::make_shared<std::vector<GruStep>>(seq.steps);
  Matrix h = Matrix::Zero(batch, hidden);
  Matrix xu(batch, hidden), xr(batch, hidden), xc(batch, hidden);
  for (std::size_t s = 0; s < seq.steps; ++s) {
    const std::int64_t* row_idx = seq.index.data() + s * seq.batch;
    for (Eigen::Index v = 0; v < batch; ++v) {
      if (row_idx[v] < 0) {
        xu.row(v).setZero();
        xr.row(v).setZero();
        xc.row(v).setZero();
      } else {
        xu.row(v) = x_proj.row(row_idx[v]).leftCols(hidden);
        xr.row(v) = x_proj.row(row_idx[v]).middleCols(hidden, hidden);
        xc.row(v) = x_proj.row(row_idx[v]).rightCols(hidden);
      }
    }
    GruStep& st = (*steps)[s];
    st.h_prev = h;
    Matrix pre_u = xu;
    pre_u.noalias() += h * wu_h.transpose();
    pre_u.rowwise() += p.b_update.value().row(0);
    Matrix pre_r = xr;
    pre_r.noalias() += h * wr_h.transpose();
    pre_r.rowwise() += p.b_reset.value().row(0);
    st.u = sigmoid_of(pre_u);
    st.r = sigmoid_of(pre_r);
    Matrix pre_c = xc;
    pre_c.noalias() += st.r.cwiseProduct(h) * wc_h.transpose();
    pre_c.rowwise() += p.b_cand.value().row(0);
    st.cand = tanh_of(pre_c);
    for (Eigen::Index v = 0; v < batch; ++v) {
      if (row_idx[v] < 0) continue;
      h.row(v) = (1.0 - st.u.row(v).array()) * h.row(v).array() + st.u.row(v).array() * st.cand.row(v).array();
    }
  }

  const std::vector<std::size_t> parents{p.w_update.id(), p.w_reset.id(), p.w_cand.id(),
                                         p.b_update.id(), p.b_reset.id(), p.b_cand.id()};
  auto saved = std::make_shared<std::pair<SequenceBatch, Matrix>>(seq, inputs);
  return t.push(
      "gru_sequence", std::move(h), parents,
      [saved, parents, steps, hidden, in_dim, batch](Tape& tp, std::size_t self) {
        const SequenceBatch& seq = saved->first;
        const Matrix& inputs = saved->second;
        const Matrix& wu = tp.value(parents[0]);
        const Matrix& wr = tp.value(parents[1]);
        const Matrix& wc = tp.value(parents[2]);
        const Matrix wu_h = wu.leftCols(hidden), wr_h = wr.leftCols(hidden), wc_h = wc.leftCols(hidden);

        Matrix gw_u = Matrix::Zero(hidden, hidden + in_dim);
        Matrix gw_r = gw_u, gw_c = gw_u;
        Matrix gb_u = Matrix::Zero(1, hidden), gb_r = gb_u, gb_c = gb_u;
        // Gradients w.r.t. the projected inputs, scattered back per input row.
        Matrix g_xproj = Matrix::Zero(inputs.rows(), 3 * hidden);

        Matrix dh = tp.grad(self);
        Matrix da_u(batch, hidden), da_r(batch, hidden), da_c(batch, hidden);
        for (std::size_t s = seq.steps; s-- > 0;) {
          const GruStep& st = (*steps)[s];
          const std::int64_t* row_idx = seq.index.data() + s * seq.batch;
          Matrix dh_prev = Matrix::Zero(batch, hidden);
          for (Eigen::Index v = 0; v < batch; ++v) {
            if (row_idx[v] < 0) {
              dh_prev.row(v) = dh.row(v);
              da_u.row(v).setZero();
              da_c.row(v).setZero();
              continue;
            }
            const auto u = st.u.row(v).array();
            const auto c = st.cand.row(v).array();
            const auto g = dh.row(v).array();
            dh_prev.row(v) = (g * (1.0 - u)).matrix();
            da_c.row(v) = (g * u * (1.0 - c * c)).matrix();
            da_u.row(v) = (g * (c - st.h_prev.row(v).array()) * u * (1.0 - u)).matrix();
          }
          // Candidate gate acts on [r * h_prev, x].
          const Matrix rh = st.r.cwiseProduct(st.h_prev);
          gw_c.leftCols(hidden).noalias() += da_c.transpose() * rh;
          gb_c += da_c.colwise().sum();
          Matrix d_rh = da_c * wc_h;
          da_r = (d_rh.array() * st.h_prev.array() * st.r.array() * (1.0 - st.r.array())).matrix();
          dh_prev.array() += d_rh.array() * st.r.array();
          // Padded rows have da_c = 0, hence da_r = 0 too.

          gw_u.leftCols(hidden).noalias() += da_u.transpose() * st.h_prev;
          gw_r.leftCols(hidden).noalias() += da_r.transpose() * st.h_prev;
          gb_u += da_u.colwise().sum();
          gb_r += da_r.colwise().sum();
          dh_prev.noalias() += da_u * wu_h;
          dh_prev.noalias() += da_r * wr_h;

          for (Eigen::Index v = 0; v < batch; ++v) {
            if (row_idx[v] < 0) continue;
            auto gx = g_xproj.row(row_idx[v]);
            gx.leftCols(hidden) += da_u.row(v);
            gx.middleCols(hidden, hidden) += da_r.row(v);
            gx.rightCols(hidden) += da_c.row(v);
          }
          dh.swap(dh_prev);
        }
        gw_u.rightCols(in_dim).noalias() += g_xproj.leftCols(hidden).transpose() * inputs;
        gw_r.rightCols(in_dim).noalias() += g_xproj.middleCols(hidden, hidden).transpose() * inputs;
        gw_c.rightCols(in_dim).noalias() += g_xproj.rightCols(hidden).transpose() * inputs;

        tp.accumulate(parents[0], gw_u);
        tp.accumulate(parents[1], gw_r);
        tp.accumulate(parents[2], gw_c);
        tp.accumulate(parents[3], gb_u);
        tp.accumulate(parents[4], gb_r);
        tp.accumulate(parents[5], gb_c);
      });
}

}  // namespace mwgnn::ad
