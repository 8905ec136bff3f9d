// SPDX-License-Identifier: Apache-2.0
#include "mwgnn_cli/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include <mwgnn/error.hpp>
#include <mwgnn/metrics.hpp>
#include <mwgnn/synthgen.hpp>

namespace mwgnn::cli {

GraphBundle h_sweep_graph(double h, std::size_t num_nodes, std::uint64_t seed) {
  const Matrix block = block_matrix_for_target_h(kSweepClasses, kSweepIntraProb, h);
  return generate_graph(make_synthetic_spec(num_nodes, kSweepClasses, kSweepFeatures, block, seed));
}

std::size_t threads_from_env() {
  const char* raw = std::getenv("MWGNN_THREADS");
  if (raw == nullptr || *raw == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(raw, &end, 10);
  if (*end != '\0' || v < 1) throw InvalidArgument(std::string("MWGNN_THREADS must be a positive integer, got ") + raw);
  return static_cast<std::size_t>(v);
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count && !failed; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

SweepParam parse_sweep_param(const std::string& name) {
  if (name == "h") return SweepParam::kH;
  if (name == "k") return SweepParam::kK;
  if (name == "alpha") return SweepParam::kAlpha;
  throw InvalidArgument("--param must be one of h, k, alpha; got '" + name + "'");
}

const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::kH:
      return "h";
    case SweepParam::kK:
      return "k";
    case SweepParam::kAlpha:
      return "alpha";
  }
  return "?";
}

ResultRow make_row(const std::string& dataset, ModelKind kind, const MwgnnConfig& m, std::uint64_t seed, double h,
                   const TrainReport& r) {
  ResultRow row;
  row.dataset = dataset;
  row.model = std::string(to_string(kind));
  row.variant = kind == ModelKind::kMwgnn ? std::string(to_string(m.ablation)) : "none";
  row.seed = seed;
  row.h = h;
  row.alpha = m.alpha;
  row.k = m.k;
  row.best_epoch = r.best_epoch;
  row.val_acc = r.best_val_acc;
  row.test_acc = r.test_acc;
  row.wall_time_ms = r.wall_time_ms;
  return row;
}

namespace {

MwgnnConfig apply_value(MwgnnConfig cfg, SweepParam p, double v) {
  switch (p) {
    case SweepParam::kH:
      break;
    case SweepParam::kK:
      if (v < 0.0 || v != std::floor(v)) throw InvalidArgument("--values for k must be non-negative integers");
      cfg.k = static_cast<std::size_t>(v);
      break;
    case SweepParam::kAlpha:
      cfg.alpha = v;
      break;
  }
  validate(cfg);
  return cfg;
}

std::string value_label(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::vector<ResultRow> run_sweep(const SweepRequest& req) {
  if (req.values.empty() || req.models.empty() || req.seeds.empty()) {
    throw InvalidArgument("sweep: values, models and seeds must all be non-empty");
  }
  if (!req.graphs) throw InvalidArgument("sweep: no graph source");
  validate(req.train);
  for (double v : req.values) apply_value(req.model, req.param, v);

  struct Task {
    std::size_t value, model, seed;
  };
  std::vector<Task> tasks;
  for (std::size_t v = 0; v < req.values.size(); ++v) {
    for (std::size_t m = 0; m < req.models.size(); ++m) {
      for (std::size_t s = 0; s < req.seeds.size(); ++s) tasks.push_back({v, m, s});
    }
  }
  std::vector<ResultRow> rows(tasks.size());
  parallel_for(tasks.size(), req.threads, [&](std::size_t i) {
    const Task& t = tasks[i];
    const double value = req.values[t.value];
    const std::uint64_t seed = req.seeds[t.seed];
    const GraphBundle graph = req.graphs(value, seed);
    const MwgnnConfig cfg = apply_value(req.model, req.param, value);
    TrainConfig tcfg = req.train;
    tcfg.seed = seed;
    const TrainReport report = train(req.models[t.model], graph, cfg, tcfg);
    const std::string dataset =
        req.param == SweepParam::kH ? req.dataset + "_h" + value_label(value) : req.dataset;
    rows[i] = make_row(dataset, req.models[t.model], cfg, seed, global_edge_homophily(graph), report);
  });
  return rows;
}

std::vector<ResultRow> run_ablation_rows(const AblationRequest& req) {
  if (req.variants.empty() || req.seeds.empty()) throw InvalidArgument("ablate: variants and seeds must be non-empty");
  if (!req.graphs) throw InvalidArgument("ablate: no graph source");
  validate(req.model);
  validate(req.train);
  std::vector<ResultRow> rows(req.variants.size() * req.seeds.size());
  parallel_for(rows.size(), req.threads, [&](std::size_t i) {
    const Ablation variant = req.variants[i / req.seeds.size()];
    const std::uint64_t seed = req.seeds[i % req.seeds.size()];
    const GraphBundle graph = req.graphs(seed);
    MwgnnConfig cfg = req.model;
    cfg.ablation = variant;
    TrainConfig tcfg = req.train;
    tcfg.seed = seed;
    const TrainReport report = train(ModelKind::kMwgnn, graph, cfg, tcfg);
    rows[i] = make_row(req.dataset, ModelKind::kMwgnn, cfg, seed, global_edge_homophily(graph), report);
  });
  return rows;
}

std::vector<VariantSummary> summarize_by_variant(const std::vector<ResultRow>& rows) {
  std::vector<VariantSummary> out;
  std::map<std::string, std::vector<double>> accs;
  for (const auto& r : rows) {
    if (!accs.count(r.variant)) out.push_back({r.variant, 0.0, 0.0, 0});
    accs[r.variant].push_back(r.test_acc);
  }
  for (auto& s : out) {
    const auto& a = accs[s.variant];
    s.runs = a.size();
    for (double x : a) s.mean += x;
    s.mean /= static_cast<double>(a.size());
    for (double x : a) s.stddev += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(s.stddev / static_cast<double>(a.size()));
  }
  return out;
}

}  // namespace mwgnn::cli
