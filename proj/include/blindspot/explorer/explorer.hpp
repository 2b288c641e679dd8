#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "blindspot/concepts/concepts.hpp"
#include "blindspot/cooccur/cooccur.hpp"
#include "blindspot/rasae/dictionary.hpp"
#include "blindspot/rasae/sparse_codes.hpp"
#include "blindspot/tensorio/feature_matrix.hpp"

namespace blindspot::explorer {

using tensorio::RowMajorD;

inline constexpr int kSchemaVersion = 1;

/// Centered projection of the rows onto their first two principal axes.
/// Each axis is oriented so its largest-|loading| entry is positive.
RowMajorD embed_2d(const Eigen::Ref<const RowMajorD>& rows);
RowMajorD embed_2d(const rasae::Dictionary& dict);

/// Image ids ordered by max-over-tokens activation of `concept` (descending, ties by image index).
/// Images where the concept never fires are omitted.
std::vector<std::string> top_exemplars(const rasae::SparseCodeMatrix& codes, const tensorio::TokenGrouping& grouping,
                                       std::size_t concept_id, std::size_t n,
                                       std::span<const std::string> image_ids = {});

/// Same ordering computed from max-aggregated energies, for every concept at once.
std::vector<std::vector<std::string>> top_exemplars_all(std::span<const concepts::EnergyVector> max_energies,
                                                        std::size_t n);

struct Partner {
    std::size_t concept_id = 0;
    double weight = 0.0;
};

/// Strongest off-diagonal co-occurrence partners per concept (positive weights only, ties by id).
std::vector<std::vector<Partner>> top_partners(const cooccur::CooccurrenceMatrix& c, std::size_t n = 10);

/// Every analysis output the bundle is assembled from. Absent members are reported by name.
struct BundleInputs {
    std::string model_name;
    std::optional<std::vector<concepts::ConceptScore>> scores;
    std::optional<RowMajorD> coordinates; // K' x 2
    std::string embedding_method = "pca";
    std::optional<cooccur::CooccurrenceMatrix> cooccurrence;
    std::optional<std::vector<concepts::EnergyVector>> real_max_energies;
    std::optional<std::vector<concepts::EnergyVector>> gen_max_energies;
    concepts::Thresholds thresholds;
    std::string created_at = "1970-01-01T00:00:00Z";
    std::optional<std::string> thumbnail_dir;
    std::size_t exemplars = 8;
    std::size_t partners = 10;
};

nlohmann::json export_bundle(const BundleInputs& in);

/// Structural and consistency problems; empty when the bundle is valid.
std::vector<std::string> validate_bundle(const nlohmann::json& bundle);

void write_bundle(const nlohmann::json& bundle, const std::filesystem::path& path);

/// SOURCE_DATE_EPOCH as ISO-8601 UTC when set, else the Unix epoch, so exports are reproducible.
std::string created_at_from_env();

} // namespace blindspot::explorer
