// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <mwgnn/graph.hpp>
#include <mwgnn/models.hpp>
#include <mwgnn/results.hpp>

namespace mwgnn::cli {

inline constexpr std::size_t kSweepClasses = 5;
inline constexpr std::size_t kSweepFeatures = 100;
inline constexpr double kSweepIntraProb = 0.05;

/// Synthetic graph used by homophily sweeps: C = 5, F = 100, intra-class
/// edge probability 0.05 and the inter-class probability solved for `h`.
GraphBundle h_sweep_graph(double h, std::size_t num_nodes, std::uint64_t seed);

/// Worker count from MWGNN_THREADS (default 1, invalid values rejected).
std::size_t threads_from_env();

/// Runs fn(0..count-1) on up to `threads` workers. Each index runs exactly
/// once; the first exception is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

enum class SweepParam { kH, kK, kAlpha };
SweepParam parse_sweep_param(const std::string& name);
const char* to_string(SweepParam p);

/// Supplies the graph for one (value, seed) run of a sweep.
using GraphSource = std::function<GraphBundle(double value, std::uint64_t seed)>;

struct SweepRequest {
  SweepParam param = SweepParam::kH;
  std::vector<double> values;
  std::vector<ModelKind> models;
  std::vector<std::uint64_t> seeds;
  MwgnnConfig model;
  TrainConfig train;
  std::string dataset = "synthetic";
  GraphSource graphs;  // required
  std::size_t threads = 1;
};

/// One row per (value, model, seed), in that nesting order.
std::vector<ResultRow> run_sweep(const SweepRequest& req);

struct AblationRequest {
  std::vector<Ablation> variants;
  std::vector<std::uint64_t> seeds;
  MwgnnConfig model;
  TrainConfig train;
  std::string dataset;
  std::function<GraphBundle(std::uint64_t seed)> graphs;
  std::size_t threads = 1;
};

/// One MWGNN row per (variant, seed), variant recorded in the row.
std::vector<ResultRow> run_ablation_rows(const AblationRequest& req);

struct VariantSummary {
  std::string variant;
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t runs = 0;
};

/// Mean and population standard deviation of test accuracy per variant,
/// in first-appearance order.
std::vector<VariantSummary> summarize_by_variant(const std::vector<ResultRow>& rows);

ResultRow make_row(const std::string& dataset, ModelKind kind, const MwgnnConfig& m, std::uint64_t seed, double h,
                   const TrainReport& r);

}  // namespace mwgnn::cli
