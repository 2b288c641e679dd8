#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "blindspot/tensorio/feature_matrix.hpp"

namespace blindspot::synthdgp {

using tensorio::RowMajorD;

/// Spike-and-slab concept model: each concept fires per token with probability p_k and,
/// when active, carries an Exponential energy with mean magnitude_k. Features are mixing * z + noise.
struct DgpSpec {
    std::size_t concepts = 0;        // K
    std::size_t dim = 0;             // d >= K
    std::vector<double> base_rates;  // p_k in (0, 1)
    std::vector<double> magnitudes;  // mean active energy per concept
    RowMajorD mixing;                // d x K, orthonormal columns
    std::map<std::size_t, double> planted; // concept -> rate multiplier in generated data
    std::size_t tokens_per_image = 1;
    double noise_sigma = 0.01;
    std::uint64_t seed = 0;

    void validate() const;
    double multiplier(std::size_t k) const;
    double effective_rate(std::size_t k) const; // min(p_k * multiplier_k, 1)
};

/// Uniform rates and magnitudes with a mixing matrix drawn from the seed (QR of a Gaussian).
DgpSpec make_spec(std::size_t concepts, std::size_t dim, double base_rate, double magnitude,
                  std::map<std::size_t, double> planted, std::size_t tokens_per_image, std::uint64_t seed);

/// d x K matrix with orthonormal columns.
RowMajorD random_orthonormal(std::size_t rows, std::size_t cols, std::uint64_t seed);

enum class Role { Natural, Generated };

std::string_view to_string(Role r) noexcept;
Role role_from_string(std::string_view s);

struct SampledDataset {
    tensorio::FeatureMatrix features; // (n_img * t) x d
    tensorio::TokenGrouping grouping;
    RowMajorD activations;            // (n_img * t) x K ground truth
    std::vector<std::string> warnings;
};

/// Deterministic in (spec.seed, role, draw). Natural and generated roles use separate streams.
SampledDataset sample_dataset(const DgpSpec& spec, std::size_t n_img, Role role, std::uint64_t draw = 0);

/// Exact per-token expected energy gap (p_eff - p) * magnitude.
std::vector<double> oracle_delta(const DgpSpec& spec);
/// sigmoid(oracle_delta / T).
std::vector<double> oracle_ediff(const DgpSpec& spec, double temperature);

/// For each true concept, the learned atom with the highest cosine to its mixing column.
std::vector<std::size_t> match_concepts(const Eigen::Ref<const RowMajorD>& atoms, const RowMajorD& mixing);

struct FixturePaths {
    std::filesystem::path manifest;
    std::filesystem::path real;
    std::filesystem::path gen;
};

/// Writes real.cbfm, gen_<model>.cbfm and manifest.json into `dir`; caption ids are img000000, img000001, ...
FixturePaths write_fixture(const DgpSpec& spec, std::size_t n_img, const std::filesystem::path& dir,
                           const std::string& model = "synth");

void to_json(nlohmann::json& j, const DgpSpec& s);
void from_json(const nlohmann::json& j, DgpSpec& s);

DgpSpec load_spec(const std::filesystem::path& path);
void save_spec(const DgpSpec& spec, const std::filesystem::path& path);

} // namespace blindspot::synthdgp
