#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "json.hpp"

namespace blindspot::rasae {

enum class AnchorStrategy { Random, KMeans };

struct SaeConfig {
    std::size_t input_dim = 0;
    std::size_t n_concepts = 0;
    std::size_t top_k = 5;
    bool archetypal = true;
    std::size_t anchors = 0; // 0 selects 4 * n_concepts
    AnchorStrategy anchor_strategy = AnchorStrategy::KMeans;
    std::size_t epochs = 50;
    std::size_t batch_size = 256;
    double lr_max = 5e-4;
    double lr_final = 1e-6;
    double warmup_frac = 0.05;
    double weight_decay = 1e-5;
    double aux_lambda = 1e-5;
    std::size_t aux_k = 32;
    std::size_t dead_steps_threshold = 256;
    std::uint64_t seed = 0;
    double relaxation_bound = 0.0;

    std::size_t anchor_count() const noexcept { return anchors != 0 ? anchors : 4 * n_concepts; }

    /// Throws Validation on violated invariants; returns warnings for soft ones.
    std::vector<std::string> validate() const;
};

void to_json(nlohmann::json& j, const SaeConfig& c);
void from_json(const nlohmann::json& j, SaeConfig& c);

} // namespace blindspot::rasae
