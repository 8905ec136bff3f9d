// SPDX-License-Identifier: Apache-2.0
#include "mwgnn/models.hpp"

#include <chrono>
#include <cmath>

#include "mwgnn/adam.hpp"
#include "mwgnn/error.hpp"

namespace mwgnn {

using ad::Var;

namespace {

constexpr std::pair<Ablation, std::string_view> kAblationNames[] = {
    {Ablation::kNone, "none"},   {Ablation::kNoMeta, "no_meta"}, {Ablation::kNoDf, "no_df"},
    {Ablation::kNoDt, "no_dt"},  {Ablation::kNoDp, "no_dp"},     {Ablation::kNoChannels, "no_channels"},
};

constexpr std::pair<ModelKind, std::string_view> kModelNames[] = {
    {ModelKind::kMwgnn, "mwgnn"}, {ModelKind::kGcn, "gcn"}, {ModelKind::kMlp, "mlp"}};

Eigen::Index as_index(std::size_t n) { return static_cast<Eigen::Index>(n); }

std::string layer_name(std::string_view prefix, std::size_t l, std::string_view leaf) {
  return std::string(prefix) + std::to_string(l) + "." + std::string(leaf);
}

void add_classifier(ad::ParamStore& store, std::size_t in, std::size_t classes) {
  store.add_glorot("cls.w", as_index(in), as_index(classes));
  store.add_zeros("cls.b", 1, as_index(classes));
}

Var classify(ad::Tape& tape, ad::ParamStore& store, Var h) {
  return ad::add(ad::matmul(h, tape.param(store, "cls.w")), tape.param(store, "cls.b"));
}

}  // namespace

std::string_view to_string(Ablation a) {
  for (auto [v, n] : kAblationNames) {
    if (v == a) return n;
  }
  return "?";
}

Ablation parse_ablation(std::string_view name) {
  for (auto [v, n] : kAblationNames) {
    if (n == name) return v;
  }
  throw InvalidArgument("unknown ablation variant '" + std::string(name) + "'");
}

std::string_view to_string(ModelKind k) {
  for (auto [v, n] : kModelNames) {
    if (v == k) return n;
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto [v, n] : kModelNames) {
    if (n == name) return v;
  }
  throw InvalidArgument("unknown model '" + std::string(name) + "'");
}

ConvLayerConfig MwgnnConfig::layer_config() const {
  if (ablation == Ablation::kNoChannels) return {0.0, 0.0, 1.0};
  return {lambda1, lambda2, beta};
}

void validate(const MwgnnConfig& c) {
  auto positive = [](std::size_t v, const char* field) {
    if (v == 0) throw InvalidArgument(std::string(field) + " must be positive");
  };
  positive(c.num_layers, "num_layers");
  positive(c.d_meta, "d_meta");
  positive(c.d_hidden, "d_hidden");
  positive(c.d_q, "d_q");
  positive(c.psi_hidden, "psi_hidden");
  positive(c.max_context, "max_context");
  if (!(c.alpha >= 0.0 && c.alpha <= 1.0)) {
    throw InvalidArgument("alpha must lie in [0,1], got " + std::to_string(c.alpha));
  }
  if (!(c.lambda1 >= 0.0)) throw InvalidArgument("lambda1 must be >= 0");
  if (!(c.lambda2 >= 0.0)) throw InvalidArgument("lambda2 must be >= 0");
  if (!(c.lambda1 + c.lambda2 < 1.0)) throw InvalidArgument("lambda1 + lambda2 must be < 1");
  if (!(c.beta >= 0.0 && c.beta <= 1.0)) throw InvalidArgument("beta must lie in [0,1]");
}

void validate(const TrainConfig& c) {
  if (!(c.lr > 0.0) || !std::isfinite(c.lr)) throw InvalidArgument("lr must be positive");
  if (!(c.weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be >= 0");
  if (c.max_epochs == 0) throw InvalidArgument("max_epochs must be >= 1");
}

// ---------------------------------------------------------------- MWGNN

MwgnnModel::MwgnnModel(const GraphBundle& bundle, MwgnnConfig cfg, std::uint64_t seed)
    : Model(seed), bundle_(bundle), cfg_(cfg) {
  validate(cfg_);
  validate(bundle_);
  structure_ = prepare_structure(bundle_, cfg_.k, cfg_.max_context);
  unit_edge_weights_ = Matrix::Ones(as_index(structure_.edges.num_edges()), 1);

  const std::size_t n = bundle_.graph.num_nodes();
  const auto f = static_cast<std::size_t>(bundle_.features.cols());
  const bool meta = cfg_.ablation != Ablation::kNoMeta;
  if (meta) {
    if (cfg_.ablation != Ablation::kNoDt) add_gru_params(params_, "meta.gru_t", 5, cfg_.d_meta);
    if (cfg_.ablation != Ablation::kNoDf) add_feature_params(params_, "meta.feat", cfg_.feature_mode, f, cfg_.d_meta);
    if (cfg_.ablation != Ablation::kNoDp) add_position_params(params_, "meta.phi", n, cfg_.d_hidden, cfg_.d_meta);
    add_attention_params(params_, "meta.att", cfg_.d_meta, cfg_.d_q);
  }
  add_edge_scorer_params(params_, "conv.psi_f", meta ? cfg_.d_meta : f, f, cfg_.psi_hidden);
  add_edge_scorer_params(params_, "conv.psi_t", meta ? cfg_.d_meta : 5, 5, cfg_.psi_hidden);
  add_channel_params(params_, "chan", f, n, cfg_.d_hidden);
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    params_.add_glorot(layer_name("conv.layer", l, "w"), as_index(cfg_.d_hidden), as_index(cfg_.d_hidden));
  }
  add_classifier(params_, cfg_.d_hidden, bundle_.num_classes);
}

Var MwgnnModel::forward(ad::Tape& tape) { return forward(tape, nullptr); }

Var MwgnnModel::forward(ad::Tape& tape, MwgnnTrace* trace) {
  MwgnnTrace local;
  MwgnnTrace& tr = trace ? *trace : local;
  tr = MwgnnTrace{};

  Var features = tape.constant(bundle_.features);
  Var ldp = tape.constant(structure_.ldp_normalized);
  Var dst_f = features;
  Var dst_t = ldp;

  if (cfg_.ablation != Ablation::kNoMeta) {
    std::vector<Var> dists;
    if (cfg_.ablation != Ablation::kNoDt) {
      tr.d_t = topo_distribution(tape, params_, structure_, "meta.gru_t");
      dists.push_back(*tr.d_t);
    }
    if (cfg_.ablation != Ablation::kNoDf) {
      tr.d_f = feature_distribution(tape, params_, structure_, bundle_.features, cfg_.feature_mode, "meta.feat");
      dists.push_back(*tr.d_f);
    }
    if (cfg_.ablation != Ablation::kNoDp) {
      tr.d_p = position_distribution(tape, params_, structure_, "meta.phi");
      dists.push_back(*tr.d_p);
    }
    const auto att = attention_integrate(tape, params_, dists, "meta.att");
    tr.attention = att.attention;
    tr.meta_weight = att.fused;
    dst_f = att.fused;
    dst_t = att.fused;
  }

  const auto& idx = structure_.edges;
  tr.scores = fuse_weights(decoupled_edge_weights(tape, params_, idx, dst_f, features, dst_t, ldp, "conv"), cfg_.alpha);
  tr.channels = init_channel_embeddings(tape, params_, idx, features, tape.constant(unit_edge_weights_), "chan");

  const ConvLayerConfig layer_cfg = cfg_.layer_config();
  Var h = tr.channels.h_f0;
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    const auto act = l + 1 < cfg_.num_layers ? Activation::kRelu : Activation::kIdentity;
    h = adaptive_layer(idx, h, tr.scores.s, tr.channels, tape.param(params_, layer_name("conv.layer", l, "w")),
                       layer_cfg, act);
    tr.layers.push_back(h);
  }
  return classify(tape, params_, h);
}

// ---------------------------------------------------------------- GCN

GcnModel::GcnModel(const GraphBundle& bundle, std::size_t layers, std::size_t hidden, std::uint64_t seed)
    : Model(seed), bundle_(bundle), layers_(layers) {
  validate(bundle_);
  if (layers == 0 || hidden == 0) throw InvalidArgument("gcn: layers and hidden must be positive");
  edges_ = ad::EdgeIndex::from_graph(bundle_.graph, true);
  weights_.resize(as_index(edges_.num_edges()), 1);
  for (std::size_t e = 0; e < edges_.num_edges(); ++e) {
    const double du = static_cast<double>(bundle_.graph.degree(edges_.src[e]) + 1);
    const double dv = static_cast<double>(bundle_.graph.degree(edges_.dst[e]) + 1);
    weights_(as_index(e), 0) = 1.0 / std::sqrt(du * dv);
  }
  std::size_t in = static_cast<std::size_t>(bundle_.features.cols());
  for (std::size_t l = 0; l < layers_; ++l) {
    params_.add_glorot(layer_name("gcn.layer", l, "w"), as_index(in), as_index(hidden));
    params_.add_zeros(layer_name("gcn.layer", l, "b"), 1, as_index(hidden));
    in = hidden;
  }
  add_classifier(params_, hidden, bundle_.num_classes);
}

Var GcnModel::forward(ad::Tape& tape) {
  Var h = tape.constant(bundle_.features);
  Var w = tape.constant(weights_);
  for (std::size_t l = 0; l < layers_; ++l) {
    Var z = ad::matmul(h, tape.param(params_, layer_name("gcn.layer", l, "w")));
    h = ad::relu(ad::add(ad::edge_aggregate(edges_, w, z), tape.param(params_, layer_name("gcn.layer", l, "b"))));
  }
  return classify(tape, params_, h);
}

// ---------------------------------------------------------------- MLP

MlpModel::MlpModel(const GraphBundle& bundle, std::size_t layers, std::size_t hidden, std::uint64_t seed)
    : Model(seed), bundle_(bundle), layers_(layers) {
  validate(bundle_);
  if (layers == 0 || hidden == 0) throw InvalidArgument("mlp: layers and hidden must be positive");
  std::size_t in = static_cast<std::size_t>(bundle_.features.cols());
  for (std::size_t l = 0; l < layers_; ++l) {
    params_.add_glorot(layer_name("mlp.layer", l, "w"), as_index(in), as_index(hidden));
    params_.add_zeros(layer_name("mlp.layer", l, "b"), 1, as_index(hidden));
    in = hidden;
  }
  add_classifier(params_, hidden, bundle_.num_classes);
}

Var MlpModel::forward(ad::Tape& tape) {
  Var h = tape.constant(bundle_.features);
  for (std::size_t l = 0; l < layers_; ++l) {
    h = ad::relu(ad::add(ad::matmul(h, tape.param(params_, layer_name("mlp.layer", l, "w"))),
                         tape.param(params_, layer_name("mlp.layer", l, "b"))));
  }
  return classify(tape, params_, h);
}

std::unique_ptr<Model> make_model(ModelKind kind, const GraphBundle& bundle, const MwgnnConfig& cfg,
                                  std::uint64_t seed) {
  switch (kind) {
    case ModelKind::kMwgnn:
      return std::make_unique<MwgnnModel>(bundle, cfg, seed);
    case ModelKind::kGcn:
      return std::make_unique<GcnModel>(bundle, cfg.num_layers, cfg.d_hidden, seed);
    case ModelKind::kMlp:
      return std::make_unique<MlpModel>(bundle, cfg.num_layers, cfg.d_hidden, seed);
  }
  throw InvalidArgument("make_model: unknown kind");
}

// ---------------------------------------------------------------- evaluation

std::vector<std::int32_t> argmax_rows(const Matrix& logits) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::int32_t>(best);
  }
  return out;
}

double evaluate(const Matrix& logits, std::span<const std::int32_t> labels, std::span<const std::uint8_t> mask) {
  if (labels.size() != static_cast<std::size_t>(logits.rows()) || mask.size() != labels.size()) {
    throw InvalidArgument("evaluate: logits, labels and mask must agree on the node count");
  }
  if (logits.cols() == 0) throw InvalidArgument("evaluate: logits have no classes");
  std::size_t total = 0;
  std::size_t correct = 0;
  const auto pred = argmax_rows(logits);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    if (pred[i] == labels[i]) ++correct;
  }
  if (total == 0) throw InvalidArgument("evaluate: empty mask");
  return static_cast<double>(correct) / static_cast<double>(total);
}

// ---------------------------------------------------------------- training

bool TrainReport::same_outcome(const TrainReport& o) const {
  return best_epoch == o.best_epoch && epochs_run == o.epochs_run && train_loss_history == o.train_loss_history &&
         val_acc_history == o.val_acc_history && test_acc_history == o.test_acc_history &&
         best_val_acc == o.best_val_acc && test_acc == o.test_acc;
}

TrainReport train(Model& model, const GraphBundle& bundle, const TrainConfig& cfg) {
  validate(cfg);
  validate(bundle);
  const auto train_rows = mask_indices(bundle.masks.train);
  if (train_rows.empty()) throw InvalidArgument("train: empty train mask");
  if (mask_indices(bundle.masks.val).empty()) throw InvalidArgument("train: empty val mask");
  const bool has_test = !mask_indices(bundle.masks.test).empty();

  const auto start = std::chrono::steady_clock::now();
  ad::Adam opt({.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  auto& store = model.params();

  TrainReport rep;
  std::map<std::string, ad::Parameter> best_params = store.items();
  bool have_best = false;
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    store.zero_grad();
    ad::Tape tape;
    Var logits = model.forward(tape);
    Var loss = ad::masked_cross_entropy(logits, bundle.labels, train_rows);
    const double loss_value = loss.value()(0, 0);
    if (!std::isfinite(loss_value)) throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));

    const double val = evaluate(logits.value(), bundle.labels, bundle.masks.val);
    const double test = has_test ? evaluate(logits.value(), bundle.labels, bundle.masks.test) : 0.0;
    rep.train_loss_history.push_back(loss_value);
    rep.val_acc_history.push_back(val);
    rep.test_acc_history.push_back(test);
    rep.epochs_run = epoch + 1;

    if (!have_best || val > rep.best_val_acc) {
      have_best = true;
      rep.best_val_acc = val;
      rep.test_acc = test;
      rep.best_epoch = epoch;
      best_params = store.items();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }

    tape.backward(loss);
    opt.step(store);
  }

  for (auto& [name, p] : store.items()) p.value = best_params.at(name).value;
  store.zero_grad();
  rep.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

TrainReport train(ModelKind kind, const GraphBundle& bundle, const MwgnnConfig& mcfg, const TrainConfig& tcfg) {
  auto model = make_model(kind, bundle, mcfg, tcfg.seed);
  return train(*model, bundle, tcfg);
}

AblationResult run_ablation(const GraphBundle& bundle, Ablation variant, const MwgnnConfig& base,
                            const TrainConfig& tcfg, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw InvalidArgument("run_ablation: no seeds");
  MwgnnConfig cfg = base;
  cfg.ablation = variant;
  validate(cfg);

  AblationResult r;
  r.variant = variant;
  for (std::uint64_t seed : seeds) {
    TrainConfig t = tcfg;
    t.seed = seed;
    r.seeds.push_back(seed);
    r.test_accs.push_back(train(ModelKind::kMwgnn, bundle, cfg, t).test_acc);
  }
  double sum = 0.0;
  for (double a : r.test_accs) sum += a;
  r.mean = sum / static_cast<double>(r.test_accs.size());
  double sq = 0.0;
  for (double a : r.test_accs) sq += (a - r.mean) * (a - r.mean);
  r.stddev = std::sqrt(sq / static_cast<double>(r.test_accs.size()));
  return r;
}

}  // namespace mwgnn
