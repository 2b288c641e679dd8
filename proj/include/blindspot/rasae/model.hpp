#pragma once

#include <filesystem>

#include "blindspot/rasae/config.hpp"
#include "blindspot/rasae/dictionary.hpp"
#include "blindspot/rasae/sparse_codes.hpp"
#include "blindspot/tensorio/feature_matrix.hpp"

namespace blindspot::rasae {

using VectorD = Eigen::VectorXd;

/// Trainable state of a Top-K sparse autoencoder with an optionally archetypal decoder.
struct SaeModel {
    SaeConfig config;
    RowMajorD encoder_weight; // K' x d
    VectorD encoder_bias;     // K'

    // Archetypal decoder: atoms = normalize(softmax(w_logits) * anchors + relaxation).
    RowMajorD w_logits;   // K' x m
    RowMajorD anchors;    // m x d
    RowMajorD relaxation; // K' x d

    // Free decoder (archetypal == false): unit-norm rows.
    RowMajorD free_atoms; // K' x d

    std::size_t n_concepts() const noexcept { return static_cast<std::size_t>(encoder_weight.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(encoder_weight.cols()); }

    /// Row-wise softmax of w_logits.
    RowMajorD stochastic_weights() const;

    /// Materialized decoder.
    Dictionary dictionary() const;

    void save(const std::filesystem::path& path) const;
    static SaeModel load(const std::filesystem::path& path);
};

/// Untrained model: Glorot-uniform atoms (free) or anchor-focused logits
/// (archetypal), encoder tied to the initial atoms, zero bias.
SaeModel initialize(const SaeConfig& cfg, const RowMajorD& anchors);

/// Affine pre-activations X * W_enc^T + b for every row.
RowMajorD pre_activations(const SaeModel& model, const Eigen::Ref<const RowMajorD>& x);

/// Indices of the k largest strictly positive entries, descending by value,
/// ties resolved toward the lower index. `allowed` (optional) restricts candidates.
std::vector<std::uint32_t> top_k_positive(std::span<const double> values, std::size_t k,
                                          const std::vector<bool>* allowed = nullptr);

SparseCodeMatrix encode(const tensorio::FeatureMatrix& features, const SaeModel& model);
SparseCodeMatrix encode(const Eigen::Ref<const RowMajorD>& features, const SaeModel& model);

/// Sum over nonzeros of activation * atom; O(k * d) per row.
RowMajorD decode(const SparseCodeMatrix& codes, const Dictionary& dict);

} // namespace blindspot::rasae
