#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "blindspot/tensorio/feature_matrix.hpp"

namespace blindspot::tensorio {

struct RowRef {
    std::filesystem::path path; // resolved against the manifest directory on load
    std::size_t row_start = 0;
    std::size_t row_count = 0;
};

struct ManifestEntry {
    std::string caption_id;
    std::string caption;
    RowRef real;
    std::map<std::string, RowRef> gen; // model name -> rows
};

struct DatasetManifest {
    int version = 1;
    std::size_t tokens_per_image = 1;
    std::vector<ManifestEntry> entries;
};

DatasetManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json manifest_to_json(const DatasetManifest& m, const std::filesystem::path& base_dir);

/// Parses and validates: unique ids, row ranges within file bounds, row_count == tokens_per_image.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

/// Checks structural invariants without touching referenced files.
void validate_manifest_structure(const DatasetManifest& m);

/// Model names for which every entry has a generated reference.
std::vector<std::string> complete_models(const DatasetManifest& m);

struct PairedFeatures {
    FeatureMatrix real;
    FeatureMatrix gen;
    std::vector<std::string> caption_ids;
    TokenGrouping grouping;
};

/// Row block i of both matrices corresponds to caption_ids[i].
PairedFeatures load_paired_features(const DatasetManifest& manifest, const std::string& model);

} // namespace blindspot::tensorio
