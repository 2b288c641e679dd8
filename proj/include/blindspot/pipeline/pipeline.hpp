#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "blindspot/concepts/concepts.hpp"
#include "blindspot/datapoint/datapoint.hpp"
#include "blindspot/rasae/config.hpp"
#include "blindspot/rasae/sparse_codes.hpp"

namespace blindspot::pipeline {

namespace fs = std::filesystem;

struct RunConfig {
    fs::path manifest;
    std::string model; // empty: the first model present for every entry
    fs::path out_dir = "run";
    std::uint64_t seed = 0;
    rasae::SaeConfig sae; // input_dim 0 is inferred from the features; seed is derived from `seed`
    std::optional<fs::path> sae_path; // pretrained SAE; skips training
    concepts::Thresholds thresholds;
    concepts::Aggregation aggregation = concepts::Aggregation::Mean;
    double tail_temperature = 0.4;
    bool pairs = true;
    std::size_t pairs_top = 20;
    bool cooccur = true;
    std::size_t cooccur_top = 100;
    std::vector<double> epsilons{0.0, 0.1, 1.0, 10.0};
    bool export_bundle = true;
    std::string embedding = "atoms"; // or "cooccurrence"
    std::optional<std::string> thumbnail_dir;
    std::size_t exemplars = 8;
};

/// Paths in the file are relative to its directory.
RunConfig load_run_config(const fs::path& path);
RunConfig run_config_from_json(const nlohmann::json& j, const fs::path& base_dir);
nlohmann::json run_config_to_json(const RunConfig& c);

/// Checks everything that can be checked before any stage runs. Throws Validation.
void validate_run_config(const RunConfig& c);

/// SAE settings after inferring input_dim and deriving the seed.
rasae::SaeConfig resolved_sae_config(const RunConfig& c, std::size_t input_dim);

struct RunOptions {
    bool force = false;
    std::function<void(const std::string&)> log;
};

struct StageOutcome {
    std::string name;
    std::string status; // "ran" or "skipped"
    std::vector<fs::path> outputs;
};

struct RunResult {
    std::vector<StageOutcome> stages;
    fs::path run_manifest;
};

/// ingest -> train -> encode -> energy-diff -> datapoint -> cooccur -> export.
/// On failure the run manifest names the failed stage and the error is rethrown.
RunResult run_pipeline(const RunConfig& config, const RunOptions& options = {});

/// Artifact file names inside out_dir.
namespace artifact {
inline constexpr const char* kRunManifest = "run.json";
inline constexpr const char* kIngest = "ingest.json";
inline constexpr const char* kFeaturesReal = "features_real.cbfm";
inline constexpr const char* kFeaturesGen = "features_gen.cbfm";
inline constexpr const char* kSae = "sae.cbfm";
inline constexpr const char* kTrainReport = "train_report.json";
inline constexpr const char* kCodesReal = "codes_real.cbfm";
inline constexpr const char* kCodesGen = "codes_gen.cbfm";
inline constexpr const char* kEnergiesReal = "energies_real.cbfm";
inline constexpr const char* kEnergiesGen = "energies_gen.cbfm";
inline constexpr const char* kMaxEnergiesReal = "energies_max_real.cbfm";
inline constexpr const char* kMaxEnergiesGen = "energies_max_gen.cbfm";
inline constexpr const char* kScores = "scores.json";
inline constexpr const char* kDistribution = "distribution.json";
inline constexpr const char* kPairs = "pairs.json";
inline constexpr const char* kCooccur = "cooccur.json";
inline constexpr const char* kCooccurMatrix = "cooccur_real.cbfm";
inline constexpr const char* kBundle = "bundle.json";
} // namespace artifact

/// Histogram, skewness (null with a reason when undefined) and tail frequency analysis.
nlohmann::json distribution_report(std::span<const concepts::ConceptScore> scores, double tail_temperature);

/// Per-pair divergences plus the extreme pairs on both ends.
nlohmann::json pairs_report(std::span<const datapoint::PairDivergence> divs, std::size_t top);

/// L0 curves, unique entries, top eigenvalues and eigenvector alignment of real vs generated co-occurrence.
nlohmann::json cooccur_report(const rasae::SparseCodeMatrix& real, const rasae::SparseCodeMatrix& gen, std::size_t top,
                              std::span<const double> epsilons);

/// Writes text through a temporary file and rename.
void write_text(const fs::path& path, const std::string& text);
nlohmann::json read_json(const fs::path& path);

} // namespace blindspot::pipeline
