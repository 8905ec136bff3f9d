// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mwgnn/graph.hpp"

namespace mwgnn {

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written file. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// GraphBundle JSON:
///   {"num_nodes": int, "edges": [[u,v],...] (u<v), "features": [[...],...],
///    "labels": [...], "masks": {"train": [...], "val": [...], "test": [...]}}
/// Masks are serialized as node-index lists. An optional "meta" object is
/// carried through untouched and ignored on read. num_classes is
/// max(label)+1 unless "meta" has a "num_classes" entry.
std::string bundle_to_json(const GraphBundle& b, std::string_view meta_json = {});
GraphBundle bundle_from_json(std::string_view text);

GraphBundle load_bundle(const std::filesystem::path& path);
void save_bundle(const std::filesystem::path& path, const GraphBundle& b, std::string_view meta_json = {});

}  // namespace mwgnn
