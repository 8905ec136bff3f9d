// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mwgnn/adaptive_conv.hpp"
#include "mwgnn/autodiff.hpp"
#include "mwgnn/graph.hpp"
#include "mwgnn/meta_weight.hpp"

namespace mwgnn {

enum class Ablation { kNone, kNoMeta, kNoDf, kNoDt, kNoDp, kNoChannels };

std::string_view to_string(Ablation a);
/// Accepts none, no_meta, no_df, no_dt, no_dp, no_channels.
Ablation parse_ablation(std::string_view name);

struct MwgnnConfig {
  std::size_t k = 2;
  double alpha = 0.5;
  double lambda1 = 0.1;
  double lambda2 = 0.1;
  double beta = 0.5;
  std::size_t d_meta = 32;
  std::size_t d_hidden = 128;
  std::size_t d_q = 16;
  std::size_t psi_hidden = 32;
  std::size_t num_layers = 2;
  std::size_t max_context = kMaxContextLength;
  FeatureMode feature_mode = FeatureMode::kAverage;
  Ablation ablation = Ablation::kNone;

  /// Layer settings after applying the ablation (no_channels forces
  /// lambda1 = lambda2 = 0, beta = 1).
  ConvLayerConfig layer_config() const;
};

/// Throws InvalidArgument with the offending field named.
void validate(const MwgnnConfig& c);

/// Intermediate tensors of one MWGNN forward pass. Absent distributions
/// (ablations) are left default-constructed.
struct MwgnnTrace {
  std::optional<ad::Var> d_t, d_f, d_p, attention, meta_weight;
  EdgeScores scores;
  ChannelEmbeddings channels;
  std::vector<ad::Var> layers;
};

/// Common surface of the trainable node classifiers. A model holds a
/// reference to its bundle; the bundle must outlive it.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::string name() const = 0;
  /// Records a full forward pass on `tape`; returns N x C logits.
  virtual ad::Var forward(ad::Tape& tape) = 0;
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

 protected:
  explicit Model(std::uint64_t seed) : params_(seed) {}
  ad::ParamStore params_;
};

class MwgnnModel final : public Model {
 public:
  MwgnnModel(const GraphBundle& bundle, MwgnnConfig cfg, std::uint64_t seed);

  std::string name() const override { return "mwgnn"; }
  ad::Var forward(ad::Tape& tape) override;
  ad::Var forward(ad::Tape& tape, MwgnnTrace* trace);

  const MwgnnConfig& config() const { return cfg_; }
  const StructuralInputs& structure() const { return structure_; }

 private:
  const GraphBundle& bundle_;
  MwgnnConfig cfg_;
  StructuralInputs structure_;
  Matrix unit_edge_weights_;
};

/// Renormalized GCN: `layers` rounds of relu(A_hat H W + b), then a linear
/// classifier. A_hat = D~^{-1/2} (A + I) D~^{-1/2}.
class GcnModel final : public Model {
 public:
  GcnModel(const GraphBundle& bundle, std::size_t layers, std::size_t hidden, std::uint64_t seed);
  std::string name() const override { return "gcn"; }
  ad::Var forward(ad::Tape& tape) override;

  const ad::EdgeIndex& propagation() const { return edges_; }
  /// Per-edge A_hat coefficients aligned with propagation(), E x 1.
  const Matrix& propagation_weights() const { return weights_; }

 private:
  const GraphBundle& bundle_;
  std::size_t layers_;
  ad::EdgeIndex edges_;
  Matrix weights_;
};

/// Structure-agnostic perceptron on the features alone.
class MlpModel final : public Model {
 public:
  MlpModel(const GraphBundle& bundle, std::size_t layers, std::size_t hidden, std::uint64_t seed);
  std::string name() const override { return "mlp"; }
  ad::Var forward(ad::Tape& tape) override;

 private:
  const GraphBundle& bundle_;
  std::size_t layers_;
};

enum class ModelKind { kMwgnn, kGcn, kMlp };
std::string_view to_string(ModelKind k);
/// Accepts mwgnn, gcn, mlp.
ModelKind parse_model_kind(std::string_view name);

/// Builds a model; GCN/MLP take num_layers and d_hidden from cfg.
std::unique_ptr<Model> make_model(ModelKind kind, const GraphBundle& bundle, const MwgnnConfig& cfg,
                                  std::uint64_t seed);

/// Fraction of masked rows whose argmax (lowest index on ties) equals the
/// label. Throws InvalidArgument on an empty mask.
double evaluate(const Matrix& logits, std::span<const std::int32_t> labels, std::span<const std::uint8_t> mask);

/// Index of the largest entry of each row; ties go to the lowest index.
std::vector<std::int32_t> argmax_rows(const Matrix& logits);

struct TrainConfig {
  double lr = 1e-2;
  double weight_decay = 5e-4;
  std::size_t max_epochs = 200;
  std::size_t patience = 30;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& c);

struct TrainReport {
  std::size_t best_epoch = 0;  // 0-based
  std::size_t epochs_run = 0;
  std::vector<double> train_loss_history;
  std::vector<double> val_acc_history;
  std::vector<double> test_acc_history;
  double best_val_acc = 0.0;
  double test_acc = 0.0;
  double wall_time_ms = 0.0;

  /// Equality of every deterministic field (wall time excluded).
  bool same_outcome(const TrainReport& o) const;
};

/// Full-batch training with Adam on the masked train cross-entropy.
/// Accuracy at epoch e is measured on the logits of that epoch's forward
/// pass (before its update). Training stops after `patience` epochs
/// without a strict val improvement; the model is left holding the
/// parameters of the best-validation epoch. Throws InvalidArgument on an
/// empty train or val mask and NumericError on divergence.
TrainReport train(Model& model, const GraphBundle& bundle, const TrainConfig& cfg);

/// Builds the model with seed cfg.seed and trains it.
TrainReport train(ModelKind kind, const GraphBundle& bundle, const MwgnnConfig& mcfg, const TrainConfig& tcfg);

struct AblationResult {
  Ablation variant = Ablation::kNone;
  std::vector<std::uint64_t> seeds;
  std::vector<double> test_accs;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

/// Trains MWGNN with `variant` applied to `base` once per seed (TrainConfig
/// seed replaced by each entry) and summarizes test accuracy.
AblationResult run_ablation(const GraphBundle& bundle, Ablation variant, const MwgnnConfig& base,
                            const TrainConfig& tcfg, std::span<const std::uint64_t> seeds);

}  // namespace mwgnn
