#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "blindspot/rasae/sparse_codes.hpp"
#include "blindspot/tensorio/feature_matrix.hpp"

namespace blindspot::concepts {

/// Per-image concept energies, aggregated over the image's tokens.
struct EnergyVector {
    std::string caption_id;
    std::vector<double> energies;
};

enum class BlindspotClass { Suppressed, Neutral, Exaggerated };

std::string_view to_string(BlindspotClass c) noexcept;
BlindspotClass class_from_string(std::string_view s);

struct Thresholds {
    double lambda_min = 0.1;
    double lambda_max = 0.9;
    double temperature = 0.8;

    void validate() const;
};

struct ConceptScore {
    std::size_t concept_id = 0;
    double ediff = 0.5;
    double delta = 0.0;
    std::size_t frequency = 0;
    BlindspotClass cls = BlindspotClass::Neutral;

    friend bool operator==(const ConceptScore&, const ConceptScore&) = default;
};

enum class Aggregation { Mean, Max };

/// Logistic function, evaluated without overflow for large |x|.
double sigmoid(double x) noexcept;

BlindspotClass classify(double ediff, const Thresholds& th) noexcept;

/// One energy vector per image: mean (absent tokens count as 0) or max over its tokens.
std::vector<EnergyVector> aggregate_energies(const rasae::SparseCodeMatrix& codes,
                                             const tensorio::TokenGrouping& grouping, Aggregation mode,
                                             std::span<const std::string> caption_ids = {});

/// delta_k = mean_gen - mean_real, ediff_k = sigmoid(delta_k / T), frequency_k = #real images with energy > 0.
std::vector<ConceptScore> energy_difference(std::span<const EnergyVector> real, std::span<const EnergyVector> gen,
                                            const Thresholds& th);

struct Histogram {
    std::vector<double> edges;       // bins + 1 edges on [0, 1]
    std::vector<std::size_t> counts; // sums to the number of values
    std::vector<double> log_counts;  // log10(1 + count)
};

/// Histogram of ediff values; the value 1 falls in the last bin.
Histogram ediff_histogram(std::span<const ConceptScore> scores, std::size_t bins = 100);

/// Adjusted Fisher-Pearson sample skewness.
double skewness(std::span<const double> values);
double skewness(std::span<const ConceptScore> scores);

/// Pearson correlation of two ediff vectors with matching concept order.
double cross_model_correlation(std::span<const ConceptScore> a, std::span<const ConceptScore> b);
double pearson(std::span<const double> a, std::span<const double> b);

struct FrequencyPoint {
    std::size_t concept_id = 0;
    std::size_t frequency = 0;
    double value = 0.5; // sigmoid(|delta| / T_tail)
};

/// Sorted by frequency ascending, ties by concept id.
std::vector<FrequencyPoint> frequency_analysis(std::span<const ConceptScore> scores, double tail_temperature = 0.4);

/// Concept ids in the given class, ordered by ediff (ascending for suppressed,
/// descending for exaggerated), ties by id.
std::vector<std::size_t> ranking(std::span<const ConceptScore> scores, BlindspotClass cls);

void to_json(nlohmann::json& j, const ConceptScore& s);
void from_json(const nlohmann::json& j, ConceptScore& s);
void to_json(nlohmann::json& j, const Histogram& h);

void save_scores(std::span<const ConceptScore> scores, const std::filesystem::path& path);
std::vector<ConceptScore> load_scores(const std::filesystem::path& path);

void save_energies(std::span<const EnergyVector> energies, const std::filesystem::path& path);
std::vector<EnergyVector> load_energies(const std::filesystem::path& path);

} // namespace blindspot::concepts
