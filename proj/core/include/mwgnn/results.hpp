// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mwgnn/models.hpp"

namespace mwgnn {

/// One run in tabular form. h is NaN when the run has no homophily label.
struct ResultRow {
  std::string dataset;
  std::string model;
  std::string variant = "none";
  std::uint64_t seed = 0;
  double h = 0.0;
  double alpha = 0.0;
  std::size_t k = 0;
  std::size_t best_epoch = 0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  double wall_time_ms = 0.0;
};

inline constexpr std::string_view kResultsHeader =
    "dataset,model,variant,seed,h,alpha,k,best_epoch,val_acc,test_acc,wall_time_ms";

/// Header plus one line per row, rows stably sorted by (dataset, model, seed),
/// reals printed with 6 significant digits. Throws InvalidArgument when empty.
std::string results_to_csv(std::vector<ResultRow> rows);
void export_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
/// Inverse of results_to_csv (up to print precision).
std::vector<ResultRow> parse_results_csv(std::string_view text);

std::string config_to_json(const MwgnnConfig& m, const TrainConfig& t);
MwgnnConfig mwgnn_config_from_json(std::string_view text, MwgnnConfig base = {});
TrainConfig train_config_from_json(std::string_view text, TrainConfig base = {});

/// {"config": <resolved config>, "model": ..., "report": {...}}
std::string train_report_to_json(const TrainReport& r, ModelKind kind, const MwgnnConfig& m, const TrainConfig& t,
                                 std::string_view dataset);

}  // namespace mwgnn
