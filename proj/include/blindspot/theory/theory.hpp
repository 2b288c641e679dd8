#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "json.hpp"

#include "blindspot/rasae/dictionary.hpp"
#include "blindspot/tensorio/feature_matrix.hpp"

namespace blindspot::theory {

using tensorio::RowMajorD;

struct GaussianSummary {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance; // unbiased (n - 1)
};

GaussianSummary fit_gaussian(const Eigen::Ref<const RowMajorD>& x);

/// Frechet distance between Gaussian summaries.
double gaussian_fid(const GaussianSummary& a, const GaussianSummary& b);
double gaussian_fid(const Eigen::Ref<const RowMajorD>& a, const Eigen::Ref<const RowMajorD>& b);
double gaussian_fid(const tensorio::FeatureMatrix& a, const tensorio::FeatureMatrix& b);

struct SandwichReport {
    double fid_ambient = 0.0;
    double fid_embedded = 0.0;
    double sigma_min_sq = 0.0;
    double sigma_max_sq = 0.0;
    bool holds = false;
};

/// Compares FID before and after the map x -> M x, with M the K'xd matrix whose rows are atoms.
SandwichReport fid_sandwich_check(const Eigen::Ref<const RowMajorD>& a, const Eigen::Ref<const RowMajorD>& b,
                                  const Eigen::Ref<const RowMajorD>& map);
SandwichReport fid_sandwich_check(const tensorio::FeatureMatrix& a, const tensorio::FeatureMatrix& b,
                                  const rasae::Dictionary& dict);

/// 2 exp(-2 n eps^2 / L^2) with L = (b - a) / 4.
double mcdiarmid_bound(std::size_t n, double epsilon, double a, double b);

struct SamplerSpec {
    enum class Kind { TwoPoint, Uniform };
    Kind kind = Kind::TwoPoint;
    double lo = 0.0;
    double hi = 1.0;
    double p = 0.5; // probability of hi, two-point only

    void validate() const;
    double mean() const;
};

struct BoundReport {
    std::size_t n = 0;
    double epsilon = 0.0;
    double bound = 0.0;
    double empirical_violation_rate = 0.0;
    std::size_t trials = 0;
    double population_ediff = 0.5;
    double estimator_mean = 0.0;
    double estimator_std = 0.0;
    bool holds = false; // empirical_violation_rate <= bound
};

/// Repeated estimates of sigmoid(mean_gen - mean_real) from n paired draws, checked against the population value.
BoundReport mcdiarmid_empirical(const SamplerSpec& real, const SamplerSpec& gen, std::size_t n, double epsilon,
                                std::size_t trials, std::uint64_t seed);

/// Rankings by delta, exp(delta) and sigmoid(delta) coincide, and sigmoid == rho / (1 + rho).
bool monotonicity_check(std::span<const double> deltas);

struct SuiteOptions {
    std::size_t trials = 1000;
    std::uint64_t seed = 7;
};

/// Runs every check at desk scale; one entry per theorem with measured values and a pass flag.
nlohmann::json verify_theorems(const SuiteOptions& opts);

void to_json(nlohmann::json& j, const SandwichReport& r);
void to_json(nlohmann::json& j, const BoundReport& r);

} // namespace blindspot::theory
