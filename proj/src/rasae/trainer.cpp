#include "blindspot/rasae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "blindspot/error.hpp"
#include "blindspot/rasae/anchors.hpp"
#include "blindspot/rasae/optim.hpp"
#include "blindspot/rng.hpp"

namespace blindspot::rasae {

namespace {

Eigen::Map<Eigen::ArrayXd> flat(RowMajorD& m) { return {m.data(), m.size()}; }

// Decoder quantities needed by the backward pass.
struct DecoderCache {
    RowMajorD atoms;
    RowMajorD weights;     // archetypal only
    Eigen::VectorXd norms; // archetype norms, archetypal only
};

DecoderCache decoder_cache(const SaeModel& model)
{
    DecoderCache c;
    if (!model.config.archetypal) {
        c.atoms = model.free_atoms;
        return c;
    }
    c.weights = model.stochastic_weights();
    c.atoms = c.weights * model.anchors + model.relaxation;
    c.norms = c.atoms.rowwise().norm();
    for (Eigen::Index j = 0; j < c.atoms.rows(); ++j) {
        if (c.norms(j) > 0.0) {
            c.atoms.row(j) /= c.norms(j);
        }
    }
    return c;
}

void clip_relaxation(RowMajorD& relaxation, double bound)
{
    for (Eigen::Index j = 0; j < relaxation.rows(); ++j) {
        const double n = relaxation.row(j).norm();
        if (n > bound) {
            relaxation.row(j) *= bound / n;
        }
    }
}

} // namespace

Selection select_latents(const SaeModel& model, const Eigen::Ref<const RowMajorD>& batch,
                         const std::vector<bool>& dead)
{
    const RowMajorD pre = pre_activations(model, batch);
    const auto k = model.config.top_k;
    const bool any_dead = model.config.aux_lambda > 0.0 && model.config.aux_k > 0 &&
                          std::find(dead.begin(), dead.end(), true) != dead.end();
    Selection s;
    s.top.resize(static_cast<std::size_t>(batch.rows()));
    s.aux.resize(static_cast<std::size_t>(batch.rows()));
    std::vector<bool> allowed;
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
        const std::span<const double> values(pre.data() + r * pre.cols(), static_cast<std::size_t>(pre.cols()));
        auto& top = s.top[static_cast<std::size_t>(r)];
        top = top_k_positive(values, k);
        if (any_dead) {
            allowed = dead;
            for (auto j : top) {
                allowed[j] = false;
            }
            s.aux[static_cast<std::size_t>(r)] = top_k_positive(values, model.config.aux_k, &allowed);
        }
    }
    return s;
}

LossTerms evaluate_loss(const SaeModel& model, const Eigen::Ref<const RowMajorD>& batch, const Selection& selection,
                        Gradients* grads)
{
    const auto rows = batch.rows();
    const auto dim = batch.cols();
    const auto concepts = static_cast<Eigen::Index>(model.n_concepts());
    const double scale = 1.0 / static_cast<double>(rows * dim);
    const double lambda = model.config.aux_lambda;
    const DecoderCache dec = decoder_cache(model);

    // Selected pre-activations only.
    auto pre_at = [&](Eigen::Index r, std::uint32_t j) {
        return batch.row(r).dot(model.encoder_weight.row(j)) + model.encoder_bias(j);
    };

    RowMajorD recon = RowMajorD::Zero(rows, dim);
    RowMajorD aux_recon = RowMajorD::Zero(rows, dim);
    std::vector<std::vector<double>> top_val(static_cast<std::size_t>(rows));
    std::vector<std::vector<double>> aux_val(static_cast<std::size_t>(rows));
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto ri = static_cast<std::size_t>(r);
        for (auto j : selection.top[ri]) {
            const double z = pre_at(r, j);
            top_val[ri].push_back(z);
            recon.row(r) += z * dec.atoms.row(j);
        }
        for (auto j : selection.aux[ri]) {
            const double z = pre_at(r, j);
            aux_val[ri].push_back(z);
            aux_recon.row(r) += z * dec.atoms.row(j);
        }
    }
    const RowMajorD residual = batch - recon;
    const RowMajorD aux_error = residual - aux_recon;

    LossTerms loss;
    loss.reconstruction = residual.squaredNorm() * scale;
    loss.auxiliary = lambda * aux_error.squaredNorm() * scale;
    if (grads == nullptr) {
        return loss;
    }

    // d loss / d recon and d loss / d aux_recon.
    const RowMajorD g_aux = (-2.0 * lambda * scale) * aux_error;
    const RowMajorD g_recon = (-2.0 * scale) * residual + g_aux;

    grads->encoder_weight = RowMajorD::Zero(concepts, dim);
    grads->encoder_bias = VectorD::Zero(concepts);
    RowMajorD g_atoms = RowMajorD::Zero(concepts, dim);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto ri = static_cast<std::size_t>(r);
        auto backprop = [&](const std::vector<std::uint32_t>& idx, const std::vector<double>& val,
                            const RowMajorD& g) {
            for (std::size_t t = 0; t < idx.size(); ++t) {
                const auto j = idx[t];
                const double gz = g.row(r).dot(dec.atoms.row(j));
                grads->encoder_weight.row(j) += gz * batch.row(r);
                grads->encoder_bias(j) += gz;
                g_atoms.row(j) += val[t] * g.row(r);
            }
        };
        backprop(selection.top[ri], top_val[ri], g_recon);
        backprop(selection.aux[ri], aux_val[ri], g_aux);
    }

    if (!model.config.archetypal) {
        grads->free_atoms = std::move(g_atoms);
        return loss;
    }
    // atom = u / |u|  =>  d/du = (I - a a^T) g / |u|
    RowMajorD g_u(concepts, dim);
    for (Eigen::Index j = 0; j < concepts; ++j) {
        if (dec.norms(j) > 0.0) {
            const double along = dec.atoms.row(j).dot(g_atoms.row(j));
            g_u.row(j) = (g_atoms.row(j) - along * dec.atoms.row(j)) / dec.norms(j);
        } else {
            g_u.row(j).setZero();
        }
    }
    const RowMajorD g_w = g_u * model.anchors.transpose();
    grads->w_logits = dec.weights.cwiseProduct(g_w);
    const Eigen::VectorXd inner = grads->w_logits.rowwise().sum();
    grads->w_logits -= dec.weights.cwiseProduct(inner.replicate(1, dec.weights.cols()));
    grads->relaxation = std::move(g_u);
    return loss;
}

double fraction_variance_explained(const Eigen::Ref<const RowMajorD>& data,
                                   const Eigen::Ref<const RowMajorD>& reconstruction)
{
    const Eigen::RowVectorXd mean = data.colwise().mean();
    const double total = (data.rowwise() - mean).squaredNorm();
    const double err = (data - reconstruction).squaredNorm();
    return total > 0.0 ? 1.0 - err / total : (err == 0.0 ? 1.0 : 0.0);
}

TrainResult train(const tensorio::FeatureMatrix& data, const SaeConfig& cfg, const EpochCallback& on_epoch)
{
    if (!data.all_finite()) {
        throw Error(ErrorKind::Validation, "training data contains non-finite values");
    }
    return train(data.to_double(), cfg, on_epoch);
}

TrainResult train(const Eigen::Ref<const RowMajorD>& data, const SaeConfig& cfg, const EpochCallback& on_epoch)
{
    TrainReport report;
    report.warnings = cfg.validate();
    const auto n = static_cast<std::size_t>(data.rows());
    if (static_cast<std::size_t>(data.cols()) != cfg.input_dim) {
        throw Error(ErrorKind::Shape, "data has " + std::to_string(data.cols()) + " columns, config input_dim " +
                                          std::to_string(cfg.input_dim));
    }
    if (n < cfg.batch_size) {
        throw Error(ErrorKind::Validation, "data has " + std::to_string(n) + " rows, fewer than batch_size " +
                                               std::to_string(cfg.batch_size));
    }
    if (!data.allFinite()) {
        throw Error(ErrorKind::Validation, "training data contains non-finite values");
    }

    RowMajorD anchors;
    if (cfg.archetypal) {
        anchors = fit_anchors(data, cfg.anchor_count(), cfg.anchor_strategy, cfg.seed);
    }
    SaeModel model = initialize(cfg, anchors);
    if (cfg.epochs == 0) {
        return {std::move(model), std::move(report)};
    }

    const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const WarmupCosineSchedule schedule(cfg.lr_max, cfg.lr_final, cfg.warmup_frac, cfg.epochs * steps_per_epoch);
    const AdamWParams adam{0.9, 0.999, 1e-8, cfg.weight_decay};
    AdamWState s_enc_w, s_enc_b, s_logits, s_relax, s_atoms;

    const Eigen::RowVectorXd data_mean = data.colwise().mean();
    const auto concepts = cfg.n_concepts;
    std::vector<std::size_t> since_fired(concepts, 0);
    std::vector<bool> dead(concepts, false);
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    auto rng = make_rng(cfg.seed, "sae/shuffle");
    std::size_t step = 0;
    RowMajorD batch;
    Gradients grads;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double sse = 0.0;
        double sst = 0.0;
        double l0 = 0.0;
        for (std::size_t b = 0; b < steps_per_epoch; ++b, ++step) {
            const std::size_t begin = b * cfg.batch_size;
            const std::size_t count = std::min(cfg.batch_size, n - begin);
            batch.resize(static_cast<Eigen::Index>(count), data.cols());
            for (std::size_t i = 0; i < count; ++i) {
                batch.row(static_cast<Eigen::Index>(i)) = data.row(order[begin + i]);
            }
            for (std::size_t j = 0; j < concepts; ++j) {
                dead[j] = since_fired[j] >= cfg.dead_steps_threshold;
            }
            const Selection sel = select_latents(model, batch, dead);
            const LossTerms loss = evaluate_loss(model, batch, sel, &grads);
            if (!std::isfinite(loss.total())) {
                throw Error(ErrorKind::Numeric, "training diverged (loss not finite) at epoch " +
                                                    std::to_string(epoch) + ", step " + std::to_string(step));
            }
            report.loss_curve.push_back(loss.total());
            sse += loss.reconstruction * static_cast<double>(count * cfg.input_dim);
            sst += (batch.rowwise() - data_mean).squaredNorm();

            std::vector<bool> fired(concepts, false);
            for (const auto& row : sel.top) {
                l0 += static_cast<double>(row.size());
                for (auto j : row) {
                    fired[j] = true;
                }
            }
            for (std::size_t j = 0; j < concepts; ++j) {
                since_fired[j] = fired[j] ? 0 : since_fired[j] + 1;
            }

            const double lr = schedule.at(step);
            const std::size_t t = step + 1;
            s_enc_w.update(flat(model.encoder_weight), flat(grads.encoder_weight), lr, t, adam);
            s_enc_b.update(Eigen::Map<Eigen::ArrayXd>(model.encoder_bias.data(), model.encoder_bias.size()),
                           Eigen::Map<const Eigen::ArrayXd>(grads.encoder_bias.data(), grads.encoder_bias.size()), lr, t,
                           adam);
            if (cfg.archetypal) {
                s_logits.update(flat(model.w_logits), flat(grads.w_logits), lr, t, adam);
                if (cfg.relaxation_bound > 0.0) {
                    s_relax.update(flat(model.relaxation), flat(grads.relaxation), lr, t, adam);
                    clip_relaxation(model.relaxation, cfg.relaxation_bound);
                }
            } else {
                s_atoms.update(flat(model.free_atoms), flat(grads.free_atoms), lr, t, adam);
                for (Eigen::Index j = 0; j < model.free_atoms.rows(); ++j) {
                    const double norm = model.free_atoms.row(j).norm();
                    if (norm > 0.0) {
                        model.free_atoms.row(j) /= norm;
                    }
                }
            }
        }
        EpochStats stats;
        stats.mse = sse / static_cast<double>(n * cfg.input_dim);
        stats.fve = sst > 0.0 ? 1.0 - sse / sst : 1.0;
        stats.dead_latents = static_cast<std::size_t>(
            std::count_if(since_fired.begin(), since_fired.end(),
                          [&](std::size_t s) { return s >= cfg.dead_steps_threshold; }));
        stats.mean_l0 = l0 / static_cast<double>(n);
        report.epochs.push_back(stats);
        if (on_epoch) {
            on_epoch(epoch, stats);
        }
    }
    return {std::move(model), std::move(report)};
}

} // namespace blindspot::rasae
