#include "blindspot/theory/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "blindspot/concepts/concepts.hpp"
#include "blindspot/error.hpp"
#include "blindspot/rng.hpp"

namespace blindspot::theory {

namespace {

constexpr double kClamp = 1e-10;

// Symmetric PSD square root; eigenvalues below kClamp * lambda_max are treated as 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& s)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()));
    if (es.info() != Eigen::Success) {
        throw Error(ErrorKind::Numeric, "eigendecomposition failed in matrix square root");
    }
    const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
    Eigen::VectorXd root = es.eigenvalues().unaryExpr([&](double v) { return v > kClamp * top ? std::sqrt(v) : 0.0; });
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double trace_sqrt_product(const Eigen::MatrixXd& sa, const Eigen::MatrixXd& sb)
{
    const Eigen::MatrixXd ra = psd_sqrt(sa);
    const Eigen::MatrixXd inner = ra * sb * ra;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw Error(ErrorKind::Numeric, "eigendecomposition failed in FID");
    }
    const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double v = es.eigenvalues()(i);
        if (v > kClamp * top) {
            sum += std::sqrt(v);
        }
    }
    return sum;
}

std::vector<std::size_t> argsort(std::span<const double> v)
{
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    return idx;
}

RowMajorD gaussian_sample(Eigen::Index n, const Eigen::VectorXd& mean, const Eigen::MatrixXd& mix, Rng& rng)
{
    std::normal_distribution<double> g;
    Eigen::MatrixXd z(n, mix.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z.data()[i] = g(rng);
    }
    RowMajorD x = z * mix.transpose();
    x.rowwise() += mean.transpose();
    return x;
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index r, Eigen::Index c, Rng& rng)
{
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        m.data()[i] = g(rng);
    }
    return m;
}

} // namespace

GaussianSummary fit_gaussian(const Eigen::Ref<const RowMajorD>& x)
{
    if (x.rows() < 2) {
        throw Error(ErrorKind::Argument, "a Gaussian fit needs at least 2 rows");
    }
    GaussianSummary s;
    s.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - s.mean.transpose();
    s.covariance = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
    return s;
}

double gaussian_fid(const GaussianSummary& a, const GaussianSummary& b)
{
    if (a.mean.size() != b.mean.size() || a.covariance.rows() != b.covariance.rows()) {
        throw Error(ErrorKind::Shape, "Gaussian summaries differ in dimension (" + std::to_string(a.mean.size()) +
                                          " vs " + std::to_string(b.mean.size()) + ")");
    }
    const double v = (a.mean - b.mean).squaredNorm() + a.covariance.trace() + b.covariance.trace() -
                     2.0 * trace_sqrt_product(a.covariance, b.covariance);
    return std::max(v, 0.0);
}

double gaussian_fid(const Eigen::Ref<const RowMajorD>& a, const Eigen::Ref<const RowMajorD>& b)
{
    if (a.cols() != b.cols()) {
        throw Error(ErrorKind::Shape, "feature sets differ in dimension (" + std::to_string(a.cols()) + " vs " +
                                          std::to_string(b.cols()) + ")");
    }
    return gaussian_fid(fit_gaussian(a), fit_gaussian(b));
}

double gaussian_fid(const tensorio::FeatureMatrix& a, const tensorio::FeatureMatrix& b)
{
    return gaussian_fid(a.to_double(), b.to_double());
}

SandwichReport fid_sandwich_check(const Eigen::Ref<const RowMajorD>& a, const Eigen::Ref<const RowMajorD>& b,
                                  const Eigen::Ref<const RowMajorD>& map)
{
    if (map.cols() != a.cols() || a.cols() != b.cols()) {
        throw Error(ErrorKind::Shape, "map has " + std::to_string(map.cols()) + " columns but features have " +
                                          std::to_string(a.cols()));
    }
    SandwichReport r;
    r.fid_ambient = gaussian_fid(a, b);
    const RowMajorD ea = a * map.transpose();
    const RowMajorD eb = b * map.transpose();
    r.fid_embedded = gaussian_fid(ea, eb);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(map);
    const auto& sv = svd.singularValues();
    // Extremal singular values of the map restricted to R^d; a wide map has a null space, so sigma_min = 0.
    const Eigen::Index kept = std::min(map.rows(), map.cols());
    const double smax = sv(0);
    const double smin = map.rows() >= map.cols() ? sv(kept - 1) : 0.0;
    r.sigma_min_sq = smin * smin;
    r.sigma_max_sq = smax * smax;
    const double slack = 1e-6 * std::max(r.fid_embedded, r.fid_ambient * r.sigma_max_sq) + 1e-12;
    r.holds = r.sigma_min_sq * r.fid_ambient <= r.fid_embedded + slack &&
              r.fid_embedded <= r.sigma_max_sq * r.fid_ambient + slack;
    return r;
}

SandwichReport fid_sandwich_check(const tensorio::FeatureMatrix& a, const tensorio::FeatureMatrix& b,
                                  const rasae::Dictionary& dict)
{
    return fid_sandwich_check(a.to_double(), b.to_double(), dict.atoms);
}

double mcdiarmid_bound(std::size_t n, double epsilon, double a, double b)
{
    if (!(b > a) || n < 1 || !(epsilon > 0.0)) {
        throw Error(ErrorKind::Argument, "McDiarmid bound needs b > a, n >= 1 and epsilon > 0");
    }
    const double l = (b - a) / 4.0;
    return 2.0 * std::exp(-2.0 * static_cast<double>(n) * epsilon * epsilon / (l * l));
}

void SamplerSpec::validate() const
{
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
        throw Error(ErrorKind::Argument, "sampler support must be a finite interval with hi > lo");
    }
    if (kind == Kind::TwoPoint && !(p >= 0.0 && p <= 1.0)) {
        throw Error(ErrorKind::Argument, "two-point probability must lie in [0, 1]");
    }
}

double SamplerSpec::mean() const
{
    return kind == Kind::TwoPoint ? lo + p * (hi - lo) : 0.5 * (lo + hi);
}

namespace {

double sample_mean(const SamplerSpec& s, std::size_t n, Rng& rng)
{
    if (s.kind == SamplerSpec::Kind::TwoPoint) {
        std::binomial_distribution<std::uint64_t> bin(n, s.p);
        return s.lo + (s.hi - s.lo) * static_cast<double>(bin(rng)) / static_cast<double>(n);
    }
    std::uniform_real_distribution<double> u(s.lo, s.hi);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sum += u(rng);
    }
    return sum / static_cast<double>(n);
}

} // namespace

BoundReport mcdiarmid_empirical(const SamplerSpec& real, const SamplerSpec& gen, std::size_t n, double epsilon,
                                std::size_t trials, std::uint64_t seed)
{
    real.validate();
    gen.validate();
    if (trials < 1) {
        throw Error(ErrorKind::Argument, "need at least one trial");
    }
    BoundReport r;
    r.n = n;
    r.epsilon = epsilon;
    r.trials = trials;
    r.bound = mcdiarmid_bound(n, epsilon, std::min(real.lo, gen.lo), std::max(real.hi, gen.hi));
    r.population_ediff = concepts::sigmoid(gen.mean() - real.mean());

    std::size_t violations = 0;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(derive_seed(seed, t));
        const double mr = sample_mean(real, n, rng);
        const double mg = sample_mean(gen, n, rng);
        const double est = concepts::sigmoid(mg - mr);
        if (std::abs(est - r.population_ediff) >= epsilon) {
            ++violations;
        }
        sum += est;
        sum_sq += est * est;
    }
    const double tn = static_cast<double>(trials);
    r.empirical_violation_rate = static_cast<double>(violations) / tn;
    r.estimator_mean = sum / tn;
    r.estimator_std = trials > 1 ? std::sqrt(std::max(0.0, (sum_sq - tn * r.estimator_mean * r.estimator_mean) / (tn - 1)))
                                 : 0.0;
    r.holds = r.empirical_violation_rate <= r.bound;
    return r;
}

bool monotonicity_check(std::span<const double> deltas)
{
    std::vector<double> rho(deltas.size());
    std::vector<double> sig(deltas.size());
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        rho[i] = std::exp(deltas[i]);
        sig[i] = concepts::sigmoid(deltas[i]);
        if (std::isfinite(rho[i]) && std::abs(sig[i] - rho[i] / (1.0 + rho[i])) > 1e-12) {
            return false;
        }
    }
    const auto base = argsort(deltas);
    return argsort(rho) == base && argsort(sig) == base;
}

nlohmann::json verify_theorems(const SuiteOptions& opts)
{
    using nlohmann::json;
    json out = json::object();
    out["seed"] = opts.seed;
    out["trials"] = opts.trials;

    {
        Rng rng = make_rng(opts.seed, "monotonicity");
        std::normal_distribution<double> g(0.0, 5.0);
        std::uniform_int_distribution<int> len(1, 200);
        std::size_t failures = 0;
        for (std::size_t t = 0; t < opts.trials; ++t) {
            std::vector<double> d(static_cast<std::size_t>(len(rng)));
            for (auto& x : d) {
                x = std::round(g(rng) * 8.0) / 8.0;
            }
            failures += monotonicity_check(d) ? 0 : 1;
        }
        double worst = 0.0;
        for (int e = -6; e <= 6; ++e) {
            for (int s = 0; s < 10; ++s) {
                const double rho = std::pow(10.0, e + s / 10.0);
                worst = std::max(worst, std::abs(concepts::sigmoid(std::log(rho)) - rho / (1.0 + rho)));
            }
        }
        out["monotonicity"] = {{"vectors", opts.trials},
                               {"failures", failures},
                               {"calibration_max_error", worst},
                               {"pass", failures == 0 && worst <= 1e-12}};
    }

    {
        const double spot = mcdiarmid_bound(10000, 0.01, 0.0, 1.0);
        SamplerSpec real{SamplerSpec::Kind::TwoPoint, 0.0, 1.0, 0.5};
        SamplerSpec gen{SamplerSpec::Kind::TwoPoint, 0.0, 1.0, 0.8};
        const auto conc = mcdiarmid_empirical(real, gen, 10000, 0.02, opts.trials, derive_seed(opts.seed, "mcdiarmid"));
        const auto same = mcdiarmid_empirical(real, real, 10000, 0.02, opts.trials, derive_seed(opts.seed, "mcdiarmid-sym"));
        const double se = conc.estimator_std / std::sqrt(static_cast<double>(conc.trials));
        const bool mean_ok = std::abs(conc.estimator_mean - conc.population_ediff) <= 3.0 * se + 1e-12;
        out["concentration"] = {{"spot_bound_n1e4_eps0.01", spot},
                                {"shifted", conc},
                                {"symmetric", same},
                                {"estimator_within_3se", mean_ok},
                                {"pass", conc.holds && same.holds && conc.empirical_violation_rate == 0.0 &&
                                             same.empirical_violation_rate == 0.0 && mean_ok}};
    }

    {
        Rng rng = make_rng(opts.seed, "fid");
        const Eigen::Index d = 4;
        double worst_iso = 0.0;
        for (int t = 0; t < 50; ++t) {
            const auto k = d + 1 + t % 12;
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian_matrix(k, d, rng));
            const RowMajorD q = qr.householderQ() * Eigen::MatrixXd::Identity(k, d);
            const RowMajorD a = gaussian_sample(200, Eigen::VectorXd::Zero(d), gaussian_matrix(d, d, rng), rng);
            const RowMajorD b =
                gaussian_sample(200, Eigen::VectorXd(gaussian_matrix(d, 1, rng)), gaussian_matrix(d, d, rng), rng);
            const auto rep = fid_sandwich_check(a, b, q);
            worst_iso = std::max(worst_iso, std::abs(rep.fid_embedded - rep.fid_ambient) / (1.0 + rep.fid_ambient));
        }
        std::size_t sandwich_fail = 0;
        for (int t = 0; t < 100; ++t) {
            const RowMajorD map = gaussian_matrix(12, d, rng);
            const RowMajorD a = gaussian_sample(150, Eigen::VectorXd::Zero(d), gaussian_matrix(d, d, rng), rng);
            const RowMajorD b = gaussian_sample(150, Eigen::VectorXd(gaussian_matrix(d, 1, rng)), gaussian_matrix(d, d, rng), rng);
            sandwich_fail += fid_sandwich_check(a, b, map).holds ? 0 : 1;
        }
        const double h = std::sqrt(0.5);
        RowMajorD p(2, 1);
        RowMajorD q(2, 1);
        p << -h, h;
        q << 1.0 - h, 1.0 + h;
        const double one_d = gaussian_fid(p, q);
        out["fid"] = {{"isometry_instances", 50},
                      {"isometry_max_rel_error", worst_iso},
                      {"sandwich_instances", 100},
                      {"sandwich_failures", sandwich_fail},
                      {"unit_shift_1d", one_d},
                      {"pass", worst_iso <= 1e-6 && sandwich_fail == 0 && std::abs(one_d - 1.0) <= 1e-8}};
    }

    out["pass"] = out["monotonicity"]["pass"].get<bool>() && out["concentration"]["pass"].get<bool>() &&
                  out["fid"]["pass"].get<bool>();
    return out;
}

void to_json(nlohmann::json& j, const SandwichReport& r)
{
    j = {{"fid_ambient", r.fid_ambient},   {"fid_embedded", r.fid_embedded}, {"sigma_min_sq", r.sigma_min_sq},
         {"sigma_max_sq", r.sigma_max_sq}, {"holds", r.holds}};
}

void to_json(nlohmann::json& j, const BoundReport& r)
{
    j = {{"n", r.n},
         {"epsilon", r.epsilon},
         {"bound", r.bound},
         {"empirical_violation_rate", r.empirical_violation_rate},
         {"trials", r.trials},
         {"population_ediff", r.population_ediff},
         {"estimator_mean", r.estimator_mean},
         {"estimator_std", r.estimator_std},
         {"holds", r.holds}};
}

} // namespace blindspot::theory
