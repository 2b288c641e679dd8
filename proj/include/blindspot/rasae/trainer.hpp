#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "blindspot/rasae/model.hpp"

namespace blindspot::rasae {

struct EpochStats {
    double mse = 0.0;
    double fve = 0.0; // fraction of variance explained
    std::size_t dead_latents = 0;
    double mean_l0 = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    std::vector<double> loss_curve; // total loss per step
    std::vector<std::string> warnings;
};

/// Latents chosen for one batch: Top-K per row plus the auxiliary dead-latent picks.
struct Selection {
    std::vector<std::vector<std::uint32_t>> top;
    std::vector<std::vector<std::uint32_t>> aux;
};

struct Gradients {
    RowMajorD encoder_weight;
    VectorD encoder_bias;
    RowMajorD w_logits;
    RowMajorD relaxation;
    RowMajorD free_atoms;
};

struct LossTerms {
    double reconstruction = 0.0; // mean squared error per element
    double auxiliary = 0.0;      // aux_lambda * aux mean squared error
    double total() const noexcept { return reconstruction + auxiliary; }
};

/// Top-K selection from current pre-activations; aux picks come from latents flagged in `dead`.
Selection select_latents(const SaeModel& model, const Eigen::Ref<const RowMajorD>& batch,
                         const std::vector<bool>& dead);

/// Loss for a fixed selection. Gradients are exact for that selection; pass nullptr to skip them.
LossTerms evaluate_loss(const SaeModel& model, const Eigen::Ref<const RowMajorD>& batch, const Selection& selection,
                        Gradients* grads);

/// Called after each epoch with (epoch index, stats).
using EpochCallback = std::function<void(std::size_t, const EpochStats&)>;

struct TrainResult {
    SaeModel model;
    TrainReport report;
};

/// Minibatch AdamW training on `data`. Anchors are fitted from the data when archetypal.
TrainResult train(const tensorio::FeatureMatrix& data, const SaeConfig& cfg, const EpochCallback& on_epoch = {});
TrainResult train(const Eigen::Ref<const RowMajorD>& data, const SaeConfig& cfg, const EpochCallback& on_epoch = {});

/// Fraction of variance explained by `reconstruction` relative to the column means of `data`.
double fraction_variance_explained(const Eigen::Ref<const RowMajorD>& data,
                                   const Eigen::Ref<const RowMajorD>& reconstruction);

} // namespace blindspot::rasae
