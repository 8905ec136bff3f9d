// SPDX-License-Identifier: Apache-2.0
#include "mwgnn/results.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mwgnn/error.hpp"
#include "mwgnn/io.hpp"

namespace mwgnn {

namespace {

std::string fmt6(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_real(const std::string& s) {
  if (s == "nan") return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw InvalidArgument("results CSV: bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw InvalidArgument("results CSV: bad number '" + s + "'");
  }
}

std::uint64_t parse_unsigned(const std::string& s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw InvalidArgument("results CSV: bad integer '" + s + "'");
  return v;
}

}  // namespace

std::string results_to_csv(std::vector<ResultRow> rows) {
  if (rows.empty()) throw InvalidArgument("export_results: no rows");
  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.dataset, a.model, a.seed) < std::tie(b.dataset, b.model, b.seed);
  });
  std::string out(kResultsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.dataset + ',' + r.model + ',' + r.variant + ',' + std::to_string(r.seed) + ',' + fmt6(r.h) + ',' +
           fmt6(r.alpha) + ',' + std::to_string(r.k) + ',' + std::to_string(r.best_epoch) + ',' + fmt6(r.val_acc) +
           ',' + fmt6(r.test_acc) + ',' + fmt6(r.wall_time_ms) + '\n';
  }
  return out;
}

void export_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  write_file_atomic(path, results_to_csv(rows));
}

std::vector<ResultRow> parse_results_csv(std::string_view text) {
  std::vector<ResultRow> rows;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      if (line != kResultsHeader) throw InvalidArgument("results CSV: unexpected header");
      header = false;
      continue;
    }
    const auto f = split_csv_line(line);
    if (f.size() != 11) throw InvalidArgument("results CSV: expected 11 fields");
    ResultRow r;
    r.dataset = f[0];
    r.model = f[1];
    r.variant = f[2];
    r.seed = parse_unsigned(f[3]);
    r.h = parse_real(f[4]);
    r.alpha = parse_real(f[5]);
    r.k = parse_unsigned(f[6]);
    r.best_epoch = parse_unsigned(f[7]);
    r.val_acc = parse_real(f[8]);
    r.test_acc = parse_real(f[9]);
    r.wall_time_ms = parse_real(f[10]);
    rows.push_back(std::move(r));
  }
  if (header) throw InvalidArgument("results CSV: missing header");
  return rows;
}

namespace {

nlohmann::json config_json(const MwgnnConfig& m, const TrainConfig& t) {
  return {{"k", m.k},
          {"alpha", m.alpha},
          {"lambda1", m.lambda1},
          {"lambda2", m.lambda2},
          {"beta", m.beta},
          {"d_meta", m.d_meta},
          {"d_hidden", m.d_hidden},
          {"d_q", m.d_q},
          {"psi_hidden", m.psi_hidden},
          {"num_layers", m.num_layers},
          {"max_context", m.max_context},
          {"feature_mode", m.feature_mode == FeatureMode::kGru ? "gru" : "average"},
          {"ablation", std::string(to_string(m.ablation))},
          {"lr", t.lr},
          {"weight_decay", t.weight_decay},
          {"max_epochs", t.max_epochs},
          {"patience", t.patience},
          {"seed", t.seed}};
}

}  // namespace

std::string config_to_json(const MwgnnConfig& m, const TrainConfig& t) { return config_json(m, t).dump(2) + "\n"; }

MwgnnConfig mwgnn_config_from_json(std::string_view text, MwgnnConfig c) {
  try {
    const auto j = nlohmann::json::parse(text);
    c.k = j.value("k", c.k);
    c.alpha = j.value("alpha", c.alpha);
    c.lambda1 = j.value("lambda1", c.lambda1);
    c.lambda2 = j.value("lambda2", c.lambda2);
    c.beta = j.value("beta", c.beta);
    c.d_meta = j.value("d_meta", c.d_meta);
    c.d_hidden = j.value("d_hidden", c.d_hidden);
    c.d_q = j.value("d_q", c.d_q);
    c.psi_hidden = j.value("psi_hidden", c.psi_hidden);
    c.num_layers = j.value("num_layers", c.num_layers);
    c.max_context = j.value("max_context", c.max_context);
    if (j.contains("feature_mode")) {
      const auto mode = j.at("feature_mode").get<std::string>();
      if (mode == "gru") {
        c.feature_mode = FeatureMode::kGru;
      } else if (mode == "average") {
        c.feature_mode = FeatureMode::kAverage;
      } else {
        throw InvalidArgument("feature_mode must be gru or average");
      }
    }
    if (j.contains("ablation")) c.ablation = parse_ablation(j.at("ablation").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config JSON: ") + e.what());
  }
  validate(c);
  return c;
}

TrainConfig train_config_from_json(std::string_view text, TrainConfig c) {
  try {
    const auto j = nlohmann::json::parse(text);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config JSON: ") + e.what());
  }
  validate(c);
  return c;
}

std::string train_report_to_json(const TrainReport& r, ModelKind kind, const MwgnnConfig& m, const TrainConfig& t,
                                 std::string_view dataset) {
  nlohmann::json j;
  j["dataset"] = dataset;
  j["model"] = std::string(to_string(kind));
  j["config"] = config_json(m, t);
  j["report"] = {{"best_epoch", r.best_epoch},
                 {"epochs_run", r.epochs_run},
                 {"best_val_acc", r.best_val_acc},
                 {"test_acc", r.test_acc},
                 {"wall_time_ms", r.wall_time_ms},
                 {"train_loss_history", r.train_loss_history},
                 {"val_acc_history", r.val_acc_history},
                 {"test_acc_history", r.test_acc_history}};
  return j.dump(2) + "\n";
}

}  // namespace mwgnn
