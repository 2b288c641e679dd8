#include "blindspot/rasae/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace blindspot::rasae {

void AdamWState::update(Eigen::Ref<Eigen::ArrayXd> param, const Eigen::Ref<const Eigen::ArrayXd>& grad, double lr,
                        std::size_t step, const AdamWParams& p)
{
    if (m_.size() != param.size()) {
        m_ = Eigen::ArrayXd::Zero(param.size());
        v_ = Eigen::ArrayXd::Zero(param.size());
    }
    m_ = p.beta1 * m_ + (1.0 - p.beta1) * grad;
    v_ = p.beta2 * v_ + (1.0 - p.beta2) * grad.square();
    const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(step));
    param -= lr * ((m_ / c1) / ((v_ / c2).sqrt() + p.epsilon) + p.weight_decay * param);
}

WarmupCosineSchedule::WarmupCosineSchedule(double lr_max, double lr_final, double warmup_frac,
                                           std::size_t total_steps)
    : lr_max_(lr_max),
      lr_final_(lr_final),
      warmup_(static_cast<std::size_t>(std::llround(warmup_frac * static_cast<double>(total_steps)))),
      total_(total_steps)
{
}

double WarmupCosineSchedule::at(std::size_t step) const noexcept
{
    if (step < warmup_) {
        return lr_max_ * static_cast<double>(step + 1) / static_cast<double>(warmup_);
    }
    const std::size_t decay_steps = total_ > warmup_ + 1 ? total_ - warmup_ - 1 : 1;
    const double progress = std::min(1.0, static_cast<double>(step - warmup_) / static_cast<double>(decay_steps));
    return lr_final_ + (lr_max_ - lr_final_) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

} // namespace blindspot::rasae
