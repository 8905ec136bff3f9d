// SPDX-License-Identifier: Apache-2.0
#include "mwgnn/io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mwgnn/error.hpp"

namespace mwgnn {

using nlohmann::json;

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot rename into " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

json mask_to_json(const std::vector<std::uint8_t>& mask) {
  json arr = json::array();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) arr.push_back(i);
  }
  return arr;
}

std::vector<std::uint8_t> mask_from_json(const json& arr, std::size_t n, const char* name) {
  if (!arr.is_array()) throw IoError(std::string("masks.") + name + " must be an array");
  std::vector<std::uint8_t> mask(n, 0);
  // Boolean arrays are per-node flags; integer arrays are index lists.
  if (!arr.empty() && arr.front().is_boolean()) {
    if (arr.size() != n) throw IoError(std::string("masks.") + name + " flag array has wrong length");
    for (std::size_t i = 0; i < n; ++i) mask[i] = arr[i].get<bool>() ? 1 : 0;
    return mask;
  }
  for (const auto& v : arr) {
    if (!v.is_number_integer()) throw IoError(std::string("masks.") + name + " entries must be integers");
    const auto idx = v.get<std::int64_t>();
    if (idx < 0 || static_cast<std::size_t>(idx) >= n) {
      throw IoError(std::string("masks.") + name + " index out of range");
    }
    mask[static_cast<std::size_t>(idx)] = 1;
  }
  return mask;
}

}  // namespace

std::string bundle_to_json(const GraphBundle& b, std::string_view meta_json) {
  json j;
  j["num_nodes"] = b.num_nodes();
  json edges = json::array();
  for (const auto& [u, v] : b.graph.edges()) edges.push_back({u, v});
  j["edges"] = std::move(edges);

  json feats = json::array();
  for (Eigen::Index i = 0; i < b.features.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < b.features.cols(); ++c) row.push_back(b.features(i, c));
    feats.push_back(std::move(row));
  }
  j["features"] = std::move(feats);
  j["labels"] = b.labels;
  j["masks"] = {{"train", mask_to_json(b.masks.train)},
                {"val", mask_to_json(b.masks.val)},
                {"test", mask_to_json(b.masks.test)}};
  json meta = meta_json.empty() ? json::object() : json::parse(meta_json);
  meta["num_classes"] = b.num_classes;
  j["meta"] = std::move(meta);
  return j.dump() + "\n";
}

GraphBundle bundle_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("bundle JSON parse error: ") + e.what());
  }
  try {
    const auto n = j.at("num_nodes").get<std::size_t>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw IoError("edges entries must be [u,v] pairs");
      edges.emplace_back(e[0].get<NodeId>(), e[1].get<NodeId>());
    }
    GraphBundle b;
    b.graph = build_graph(edges, n);

    const auto& feats = j.at("features");
    if (feats.size() != n) throw IoError("features must have num_nodes rows");
    const std::size_t f = n == 0 ? 0 : feats.front().size();
    b.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
    for (std::size_t i = 0; i < n; ++i) {
      if (feats[i].size() != f) throw IoError("ragged features row " + std::to_string(i));
      for (std::size_t c = 0; c < f; ++c) b.features(i, c) = feats[i][c].get<double>();
    }

    b.labels = j.at("labels").get<std::vector<std::int32_t>>();
    std::int32_t max_label = -1;
    for (auto y : b.labels) max_label = std::max(max_label, y);
    b.num_classes = static_cast<std::size_t>(max_label + 1);
    if (j.contains("meta") && j["meta"].contains("num_classes")) {
      b.num_classes = j["meta"]["num_classes"].get<std::size_t>();
    }

    const auto& masks = j.at("masks");
    b.masks.train = mask_from_json(masks.at("train"), n, "train");
    b.masks.val = mask_from_json(masks.at("val"), n, "val");
    b.masks.test = mask_from_json(masks.at("test"), n, "test");
    validate(b);
    return b;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed bundle JSON: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("invalid bundle: ") + e.what());
  }
}

GraphBundle load_bundle(const std::filesystem::path& path) { return bundle_from_json(read_file(path)); }

void save_bundle(const std::filesystem::path& path, const GraphBundle& b, std::string_view meta_json) {
  write_file_atomic(path, bundle_to_json(b, meta_json));
}

}  // namespace mwgnn
