#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "blindspot/concepts/concepts.hpp"

namespace blindspot::datapoint {

/// Divergence between one real image and its generated counterpart in concept space.
struct PairDivergence {
    std::string caption_id;
    double l2 = 0.0;           // ||V(x_gen) - V(x_real)||_2
    double sigmoid_mean = 0.5; // mean_k sigmoid((gen_k - real_k) / T)

    friend bool operator==(const PairDivergence&, const PairDivergence&) = default;
};

/// Pairs must share caption ids position by position.
std::vector<PairDivergence> pair_divergences(std::span<const concepts::EnergyVector> real,
                                             std::span<const concepts::EnergyVector> gen,
                                             double temperature = 0.8);

struct RankedPairs {
    std::vector<PairDivergence> lowest;  // ascending l2: memorization candidates
    std::vector<PairDivergence> highest; // descending l2: incongruence candidates
};

/// n extreme pairs on each side (n clamped to the input size); ties by caption id.
RankedPairs rank_pairs(std::span<const PairDivergence> divs, std::size_t n_extreme);

struct Spread {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
};

struct VariantComparison {
    std::vector<double> edges; // shared by both histograms
    std::vector<std::size_t> counts_a;
    std::vector<std::size_t> counts_b;
    Spread a;
    Spread b;
};

/// Histograms of l2 on bin edges spanning the union range, plus median/IQR per variant.
VariantComparison compare_variants(std::span<const PairDivergence> a, std::span<const PairDivergence> b,
                                   std::size_t bins = 100);

Spread spread_of(std::span<const double> values);

void to_json(nlohmann::json& j, const PairDivergence& p);
void from_json(const nlohmann::json& j, PairDivergence& p);
void to_json(nlohmann::json& j, const Spread& s);
void to_json(nlohmann::json& j, const VariantComparison& c);

} // namespace blindspot::datapoint
