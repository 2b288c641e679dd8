#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace blindspot::rasae {

struct AdamWParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-5;
};

/// First and second moments for one parameter tensor.
class AdamWState {
public:
    AdamWState() = default;
    explicit AdamWState(Eigen::Index size)
        : m_(Eigen::ArrayXd::Zero(size)), v_(Eigen::ArrayXd::Zero(size))
    {
    }

    /// Decoupled weight decay: p -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
    /// `step` is 1-based.
    void update(Eigen::Ref<Eigen::ArrayXd> param, const Eigen::Ref<const Eigen::ArrayXd>& grad, double lr,
                std::size_t step, const AdamWParams& p);

private:
    Eigen::ArrayXd m_;
    Eigen::ArrayXd v_;
};

/// Linear warmup to lr_max over the first warmup steps, then cosine decay to lr_final.
class WarmupCosineSchedule {
public:
    WarmupCosineSchedule(double lr_max, double lr_final, double warmup_frac, std::size_t total_steps);

    /// Learning rate at 0-based step.
    double at(std::size_t step) const noexcept;

    std::size_t warmup_steps() const noexcept { return warmup_; }
    std::size_t total_steps() const noexcept { return total_; }

private:
    double lr_max_;
    double lr_final_;
    std::size_t warmup_;
    std::size_t total_;
};

} // namespace blindspot::rasae
