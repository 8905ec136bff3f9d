// SPDX-License-Identifier: Apache-2.0
#include "mwgnn_cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <mwgnn/error.hpp>
#include <mwgnn/io.hpp>
#include <mwgnn/metrics.hpp>
#include <mwgnn/models.hpp>
#include <mwgnn/results.hpp>
#include <mwgnn/synthgen.hpp>
#include <mwgnn/theory.hpp>

#include "mwgnn_cli/experiments.hpp"

namespace mwgnn::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const char* field) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw InvalidArgument(std::string(field) + " must be a non-empty array of rows");
  }
  const auto cols = j.front().size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != cols) throw InvalidArgument(std::string(field) + " rows differ in length");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
  }
  return m;
}

json spec_json(const SyntheticSpec& s) {
  return {{"num_nodes", s.num_nodes},
          {"num_classes", s.num_classes},
          {"feature_dim", s.feature_dim},
          {"class_means", matrix_json(s.class_means)},
          {"variances", std::vector<double>(s.variances.data(), s.variances.data() + s.variances.size())},
          {"block_matrix", matrix_json(s.block_matrix)},
          {"seed", s.seed}};
}

json combine_json(const CombineSpec& c) {
  return {{"first", spec_json(c.first)},
          {"second", spec_json(c.second)},
          {"cross_edge_prob", c.cross_edge_prob},
          {"seed", c.seed}};
}

// Accepted keys: num_nodes, num_classes, feature_dim, seed, and either
// block_matrix or target_h (+ optional p_in); class_means or mu_gap;
// variances or noise_variance.
SyntheticSpec spec_from_json(const json& j) {
  const auto n = j.at("num_nodes").get<std::size_t>();
  const auto c = j.at("num_classes").get<std::size_t>();
  const auto f = j.at("feature_dim").get<std::size_t>();
  Matrix block;
  if (j.contains("block_matrix")) {
    block = matrix_from_json(j.at("block_matrix"), "block_matrix");
  } else if (j.contains("target_h")) {
    block = block_matrix_for_target_h(c, j.value("p_in", kSweepIntraProb), j.at("target_h").get<double>());
  } else {
    throw InvalidArgument("spec needs block_matrix or target_h");
  }
  SyntheticSpec s = make_synthetic_spec(n, c, f, block, j.value("seed", std::uint64_t{0}), j.value("mu_gap", 1.0),
                                        j.value("noise_variance", 1.0));
  if (j.contains("class_means")) s.class_means = matrix_from_json(j.at("class_means"), "class_means");
  if (j.contains("variances")) {
    const auto v = j.at("variances").get<std::vector<double>>();
    s.variances = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  validate(s);
  return s;
}

json parse_json_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

// Wraps JSON type/key errors from user input as validation failures.
template <typename Fn>
auto from_user_json(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw InvalidArgument(what + ": " + e.what());
  }
}

struct ConfigFlags {
  std::optional<std::string> config_file;
  std::optional<std::size_t> k, d_meta, d_hidden, d_q, psi_hidden, num_layers, max_context, max_epochs, patience;
  std::optional<double> alpha, lambda1, lambda2, beta, lr, weight_decay;
  std::optional<std::string> feature_mode, ablation;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "Flat JSON config file; flags override it");
    app->add_option("--k", k, "Context hop count");
    app->add_option("--alpha", alpha, "Feature/topology score mix")->check(CLI::Range(0.0, 1.0));
    app->add_option("--lambda1", lambda1, "Feature channel weight")->check(CLI::Range(0.0, 1.0));
    app->add_option("--lambda2", lambda2, "Topology channel weight")->check(CLI::Range(0.0, 1.0));
    app->add_option("--beta", beta, "Identity mix weight")->check(CLI::Range(0.0, 1.0));
    app->add_option("--d-meta", d_meta, "Meta-weight width")->check(CLI::PositiveNumber);
    app->add_option("--d-hidden", d_hidden, "Hidden width")->check(CLI::PositiveNumber);
    app->add_option("--d-q", d_q, "Attention width")->check(CLI::PositiveNumber);
    app->add_option("--psi-hidden", psi_hidden, "Edge scorer hidden width")->check(CLI::PositiveNumber);
    app->add_option("--num-layers", num_layers, "Convolution layers")->check(CLI::PositiveNumber);
    app->add_option("--max-context", max_context, "Context length cap")->check(CLI::PositiveNumber);
    app->add_option("--feature-mode", feature_mode, "average or gru")->check(CLI::IsMember({"average", "gru"}));
    app->add_option("--ablation", ablation, "Model variant")
        ->check(CLI::IsMember({"none", "no_meta", "no_df", "no_dt", "no_dp", "no_channels"}));
    app->add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber);
    app->add_option("--weight-decay", weight_decay, "Weight decay")->check(CLI::NonNegativeNumber);
    app->add_option("--max-epochs", max_epochs, "Epoch cap")->check(CLI::PositiveNumber);
    app->add_option("--patience", patience, "Early-stopping patience")->check(CLI::PositiveNumber);
    app->add_option("--seed", seed, "Base seed");
  }

  std::pair<MwgnnConfig, TrainConfig> resolve() const {
    MwgnnConfig m;
    TrainConfig t;
    if (config_file) {
      const std::string text = read_file(*config_file);
      m = mwgnn_config_from_json(text);
      t = train_config_from_json(text);
    }
    auto set = [](auto& field, const auto& flag) {
      if (flag) field = *flag;
    };
    set(m.k, k);
    set(m.alpha, alpha);
    set(m.lambda1, lambda1);
    set(m.lambda2, lambda2);
    set(m.beta, beta);
    set(m.d_meta, d_meta);
    set(m.d_hidden, d_hidden);
    set(m.d_q, d_q);
    set(m.psi_hidden, psi_hidden);
    set(m.num_layers, num_layers);
    set(m.max_context, max_context);
    if (feature_mode) m.feature_mode = *feature_mode == "gru" ? FeatureMode::kGru : FeatureMode::kAverage;
    if (ablation) m.ablation = parse_ablation(*ablation);
    set(t.lr, lr);
    set(t.weight_decay, weight_decay);
    set(t.max_epochs, max_epochs);
    set(t.patience, patience);
    set(t.seed, seed);
    validate(m);
    validate(t);
    return {m, t};
  }
};

std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count) {
  if (count == 0) throw InvalidArgument("--seeds must be at least 1");
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = base + i;
  return seeds;
}

void write_csv_with_meta(const std::string& out, const std::vector<ResultRow>& rows, const json& meta) {
  export_results(rows, out);
  write_file_atomic(out + ".meta.json", meta.dump(2) + "\n");
}

CombineSpec preset_spec(const std::string& name, std::uint64_t seed) {
  if (name == "homo") return combined_homophilous_spec(seed);
  if (name == "mixed") return combined_mixed_spec(seed);
  throw InvalidArgument("--preset must be homo or mixed");
}

// ---- subcommands ---------------------------------------------------------

struct GenArgs {
  std::string spec, out;
  std::optional<std::uint64_t> seed;
};

int do_gen(const GenArgs& a, std::ostream& out) {
  const json j = parse_json_file(a.spec);
  json meta;
  GraphBundle bundle;
  if (j.contains("first")) {
    CombineSpec c = from_user_json(a.spec, [&] {
      CombineSpec s;
      s.first = spec_from_json(j.at("first"));
      s.second = spec_from_json(j.at("second"));
      s.cross_edge_prob = j.value("cross_edge_prob", 0.0);
      s.seed = j.value("seed", std::uint64_t{0});
      return s;
    });
    if (a.seed) {
      c.seed = *a.seed;
      c.first.seed = *a.seed * 2 + 1;
      c.second.seed = *a.seed * 2 + 2;
    }
    bundle = combine_graphs(c);
    meta = {{"command", "gen"}, {"combine", combine_json(c)}, {"seed", c.seed}};
  } else {
    SyntheticSpec s = from_user_json(a.spec, [&] { return spec_from_json(j); });
    if (a.seed) s.seed = *a.seed;
    bundle = generate_graph(s);
    meta = {{"command", "gen"}, {"spec", spec_json(s)}, {"seed", s.seed}};
  }
  meta["num_classes"] = bundle.num_classes;
  save_bundle(a.out, bundle, meta.dump());
  out << "wrote " << a.out << ": " << bundle.num_nodes() << " nodes, " << bundle.graph.num_edges()
      << " edges, h = " << global_edge_homophily(bundle) << "\n";
  return kExitOk;
}

struct CombineArgs {
  std::optional<std::string> spec, preset;
  std::string out;
  std::uint64_t seed = 0;
};

int do_combine(const CombineArgs& a, std::ostream& out) {
  if (a.spec.has_value() == a.preset.has_value()) throw InvalidArgument("combine needs exactly one of --spec, --preset");
  CombineSpec c;
  if (a.preset) {
    c = preset_spec(*a.preset, a.seed);
  } else {
    const json j = parse_json_file(*a.spec);
    c = from_user_json(*a.spec, [&] {
      CombineSpec s;
      s.first = spec_from_json(j.at("first"));
      s.second = spec_from_json(j.at("second"));
      s.cross_edge_prob = j.value("cross_edge_prob", 0.0);
      s.seed = j.value("seed", a.seed);
      return s;
    });
  }
  const GraphBundle bundle = combine_graphs(c);
  json meta = {{"command", "combine"}, {"combine", combine_json(c)}, {"seed", c.seed}};
  if (a.preset) meta["preset"] = *a.preset;
  meta["num_classes"] = bundle.num_classes;
  save_bundle(a.out, bundle, meta.dump());
  out << "wrote " << a.out << ": " << bundle.num_nodes() << " nodes, " << bundle.graph.num_edges()
      << " edges, h = " << global_edge_homophily(bundle) << "\n";
  return kExitOk;
}

struct MetricsArgs {
  std::string graph, out;
  std::size_t buckets = 10;
  bool katz = false;
  std::optional<double> katz_attenuation;
};

int do_metrics(const MetricsArgs& a, std::ostream& out) {
  const GraphBundle bundle = load_bundle(a.graph);
  const HomophilyReport rep = homophily_report(bundle, a.buckets);
  json local = json::array();
  for (const auto& h : rep.local_h) local.push_back(h ? json(*h) : json(nullptr));
  json j = {{"config", {{"graph", a.graph}, {"buckets", a.buckets}, {"katz", a.katz}}},
            {"num_nodes", bundle.num_nodes()},
            {"num_edges", bundle.graph.num_edges()},
            {"global_h", rep.global_h},
            {"local_h", std::move(local)},
            {"histogram", rep.histogram},
            {"undefined_count", rep.undefined_count}};
  if (a.katz) {
    KatzOptions opts;
    const auto degrees = bundle.graph.degrees();
    const std::size_t max_degree = degrees.empty() ? 0 : *std::max_element(degrees.begin(), degrees.end());
    opts.attenuation = a.katz_attenuation.value_or(max_degree > 0 ? 0.9 / static_cast<double>(max_degree) : 0.1);
    j["config"]["katz_attenuation"] = opts.attenuation;
    j["katz"] = katz_centrality(bundle.graph, opts);
  }
  write_file_atomic(a.out, j.dump(2) + "\n");
  out << "global h = " << rep.global_h << ", undefined local h = " << rep.undefined_count << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string graph, model, out;
  std::optional<std::string> results, dataset;
  ConfigFlags cfg;
};

int do_train(const TrainArgs& a, std::ostream& out) {
  const auto [mcfg, tcfg] = a.cfg.resolve();
  const ModelKind kind = parse_model_kind(a.model);
  const GraphBundle bundle = load_bundle(a.graph);
  const std::string dataset = a.dataset.value_or(fs::path(a.graph).stem().string());
  const TrainReport report = train(kind, bundle, mcfg, tcfg);
  write_file_atomic(a.out, train_report_to_json(report, kind, mcfg, tcfg, dataset));
  if (a.results) {
    std::vector<ResultRow> rows;
    if (fs::exists(*a.results)) rows = parse_results_csv(read_file(*a.results));
    rows.push_back(make_row(dataset, kind, mcfg, tcfg.seed, global_edge_homophily(bundle), report));
    export_results(rows, *a.results);
  }
  out << a.model << " on " << dataset << ": best epoch " << report.best_epoch << ", val " << report.best_val_acc
      << ", test " << report.test_acc << "\n";
  return kExitOk;
}

struct SweepArgs {
  std::string param, out;
  std::vector<double> values;
  std::vector<std::string> models;
  std::size_t seeds = 1;
  std::size_t num_nodes = 1000;
  double base_h = 0.3;
  std::optional<std::string> graph;
  std::string dataset = "synthetic";
  ConfigFlags cfg;
};

int do_sweep(const SweepArgs& a, std::ostream& out) {
  const auto [mcfg, tcfg] = a.cfg.resolve();
  SweepRequest req;
  req.param = parse_sweep_param(a.param);
  req.values = a.values;
  for (const auto& m : a.models) req.models.push_back(parse_model_kind(m));
  req.seeds = seed_range(tcfg.seed, a.seeds);
  req.model = mcfg;
  req.train = tcfg;
  req.dataset = a.dataset;
  req.threads = threads_from_env();
  if (a.graph && req.param == SweepParam::kH) throw InvalidArgument("--graph cannot be combined with --param h");
  std::optional<GraphBundle> fixed;
  if (a.graph) fixed = load_bundle(*a.graph);
  const std::size_t n = a.num_nodes;
  const double base_h = a.base_h;
  const SweepParam param = req.param;
  req.graphs = [&fixed, n, base_h, param](double value, std::uint64_t seed) {
    if (fixed) return *fixed;
    return h_sweep_graph(param == SweepParam::kH ? value : base_h, n, seed);
  };
  if (!a.graph && param == SweepParam::kH) {
    for (double h : a.values) block_matrix_for_target_h(kSweepClasses, kSweepIntraProb, h);
  }
  const auto rows = run_sweep(req);
  json meta = {{"command", "sweep"},
               {"param", a.param},
               {"values", a.values},
               {"models", a.models},
               {"seeds", req.seeds},
               {"config", json::parse(config_to_json(mcfg, tcfg))}};
  if (a.graph) {
    meta["graph"] = *a.graph;
  } else {
    meta["generator"] = {{"num_nodes", n},
                         {"num_classes", kSweepClasses},
                         {"feature_dim", kSweepFeatures},
                         {"p_in", kSweepIntraProb},
                         {"base_h", base_h}};
  }
  write_csv_with_meta(a.out, rows, meta);
  out << "wrote " << rows.size() << " rows to " << a.out << "\n";
  return kExitOk;
}

struct AblateArgs {
  std::optional<std::string> graph, preset;
  std::vector<std::string> variants{"none", "no_meta", "no_df", "no_dt", "no_dp", "no_channels"};
  std::size_t seeds = 1;
  std::string out;
  ConfigFlags cfg;
};

int do_ablate(const AblateArgs& a, std::ostream& out) {
  if (a.graph.has_value() == a.preset.has_value()) throw InvalidArgument("ablate needs exactly one of --graph, --preset");
  const auto [mcfg, tcfg] = a.cfg.resolve();
  AblationRequest req;
  for (const auto& v : a.variants) req.variants.push_back(parse_ablation(v));
  req.seeds = seed_range(tcfg.seed, a.seeds);
  req.model = mcfg;
  req.train = tcfg;
  req.threads = threads_from_env();
  std::optional<GraphBundle> fixed;
  if (a.graph) {
    fixed = load_bundle(*a.graph);
    req.dataset = fs::path(*a.graph).stem().string();
  } else {
    preset_spec(*a.preset, 0);
    req.dataset = "combined_" + *a.preset;
  }
  const std::string preset = a.preset.value_or("");
  req.graphs = [&fixed, preset](std::uint64_t seed) {
    if (fixed) return *fixed;
    return combine_graphs(preset_spec(preset, seed));
  };
  const auto rows = run_ablation_rows(req);
  json meta = {{"command", "ablate"},
               {"variants", a.variants},
               {"seeds", req.seeds},
               {"config", json::parse(config_to_json(mcfg, tcfg))}};
  if (a.graph) meta["graph"] = *a.graph;
  if (a.preset) meta["preset"] = *a.preset;
  json summary = json::array();
  for (const auto& s : summarize_by_variant(rows)) {
    summary.push_back({{"variant", s.variant}, {"mean", s.mean}, {"stddev", s.stddev}, {"runs", s.runs}});
    out << s.variant << ": " << s.mean << " +- " << s.stddev << " over " << s.runs << " runs\n";
  }
  meta["summary"] = std::move(summary);
  write_csv_with_meta(a.out, rows, meta);
  return kExitOk;
}

struct VerifyArgs {
  std::optional<std::string> setting, csv;
  std::optional<double> variance;
  std::string out;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
};

int do_verify(const VerifyArgs& a, std::ostream& out) {
  if (a.setting.has_value() == a.variance.has_value()) {
    throw InvalidArgument("verify-theorem needs exactly one of --setting, --variance");
  }
  theory::VerifyRequest req;
  if (a.setting) {
    req = theory::verify_request_from_json(read_file(*a.setting));
  } else {
    req.setting = theory::canonical_setting(*a.variance);
    const double top = 2.0 * static_cast<double>(req.setting.d);
    for (int i = 1; i <= 10; ++i) req.t_grid.push_back(top * i / 20.0);
  }
  if (a.trials) req.trials = *a.trials;
  if (a.seed) req.seed = *a.seed;
  const auto report = theory::verify_concentration(req.setting, req.t_grid, req.trials, req.seed, threads_from_env());
  write_file_atomic(a.out, theory::report_to_json(req, report));
  if (a.csv) write_file_atomic(*a.csv, theory::report_to_csv(report));
  out << (report.all_pass() ? "bound holds" : "bound violated") << " at " << report.points.size()
      << " grid points\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Meta-weight graph neural network toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic graph from a JSON spec");
  gen_cmd->add_option("--spec", gen.spec, "Generator spec JSON")->required();
  gen_cmd->add_option("--out", gen.out, "Output graph JSON")->required();
  gen_cmd->add_option("--seed", gen.seed, "Override the spec seed");

  CombineArgs combine;
  auto* combine_cmd = app.add_subcommand("combine", "Generate a two-part combined graph");
  combine_cmd->add_option("--spec", combine.spec, "Combine spec JSON");
  combine_cmd->add_option("--preset", combine.preset, "homo or mixed")->check(CLI::IsMember({"homo", "mixed"}));
  combine_cmd->add_option("--out", combine.out, "Output graph JSON")->required();
  combine_cmd->add_option("--seed", combine.seed, "Seed");

  MetricsArgs metrics;
  auto* metrics_cmd = app.add_subcommand("metrics", "Homophily statistics and Katz centrality");
  metrics_cmd->add_option("--graph", metrics.graph, "Graph JSON")->required();
  metrics_cmd->add_option("--out", metrics.out, "Output JSON")->required();
  metrics_cmd->add_option("--buckets", metrics.buckets, "Histogram buckets")->check(CLI::PositiveNumber);
  metrics_cmd->add_flag("--katz", metrics.katz, "Also compute Katz centrality");
  metrics_cmd->add_option("--katz-attenuation", metrics.katz_attenuation, "Katz attenuation (default 0.9 / max degree)")
      ->check(CLI::PositiveNumber);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train one model on a graph");
  train_cmd->add_option("--graph", train_args.graph, "Graph JSON")->required();
  train_cmd->add_option("--model", train_args.model, "mwgnn, gcn or mlp")
      ->required()
      ->check(CLI::IsMember({"mwgnn", "gcn", "mlp"}));
  train_cmd->add_option("--out", train_args.out, "Report JSON")->required();
  train_cmd->add_option("--results", train_args.results, "Results CSV to append to");
  train_cmd->add_option("--dataset", train_args.dataset, "Dataset name in results");
  train_args.cfg.attach(train_cmd);

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep h, k or alpha over models and seeds");
  sweep_cmd->add_option("--param", sweep.param, "h, k or alpha")->required()->check(CLI::IsMember({"h", "k", "alpha"}));
  sweep_cmd->add_option("--values", sweep.values, "Comma-separated values")->required()->delimiter(',');
  sweep_cmd->add_option("--models", sweep.models, "Comma-separated models")->required()->delimiter(',');
  sweep_cmd->add_option("--seeds", sweep.seeds, "Number of seeds")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--num-nodes", sweep.num_nodes, "Generated graph size")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--base-h", sweep.base_h, "Homophily of generated graphs for k and alpha sweeps")
      ->check(CLI::Range(0.0, 1.0));
  sweep_cmd->add_option("--graph", sweep.graph, "Fixed graph for k and alpha sweeps");
  sweep_cmd->add_option("--dataset", sweep.dataset, "Dataset name prefix");
  sweep_cmd->add_option("--out", sweep.out, "Results CSV")->required();
  sweep.cfg.attach(sweep_cmd);

  AblateArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run MWGNN ablation variants");
  ablate_cmd->add_option("--graph", ablate.graph, "Graph JSON");
  ablate_cmd->add_option("--preset", ablate.preset, "homo or mixed")->check(CLI::IsMember({"homo", "mixed"}));
  ablate_cmd->add_option("--variants", ablate.variants, "Comma-separated variants")->delimiter(',');
  ablate_cmd->add_option("--seeds", ablate.seeds, "Number of seeds")->check(CLI::PositiveNumber);
  ablate_cmd->add_option("--out", ablate.out, "Results CSV")->required();
  ablate.cfg.attach(ablate_cmd);

  VerifyArgs verify;
  auto* verify_cmd = app.add_subcommand("verify-theorem", "Monte Carlo check of the concentration bound");
  verify_cmd->add_option("--setting", verify.setting, "Setting JSON");
  verify_cmd->add_option("--variance", verify.variance, "Use the canonical setting with this Var[P]");
  verify_cmd->add_option("--out", verify.out, "Report JSON")->required();
  verify_cmd->add_option("--csv", verify.csv, "Optional CSV table");
  verify_cmd->add_option("--trials", verify.trials, "Trials per grid point")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--seed", verify.seed, "Seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*gen_cmd) return do_gen(gen, out);
    if (*combine_cmd) return do_combine(combine, out);
    if (*metrics_cmd) return do_metrics(metrics, out);
    if (*train_cmd) return do_train(train_args, out);
    if (*sweep_cmd) return do_sweep(sweep, out);
    if (*ablate_cmd) return do_ablate(ablate, out);
    if (*verify_cmd) return do_verify(verify, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace mwgnn::cli
