#include "blindspot/rasae/anchors.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "blindspot/error.hpp"
#include "blindspot/rng.hpp"

namespace blindspot::rasae {

using tensorio::RowMajorD;

namespace {

constexpr int kMaxLloydIterations = 50;

// Squared distances from every row to every centroid, n x m.
RowMajorD squared_distances(const Eigen::Ref<const RowMajorD>& data, const RowMajorD& centroids,
                            const Eigen::VectorXd& data_sq)
{
    RowMajorD d2 = -2.0 * data * centroids.transpose();
    d2.colwise() += data_sq;
    d2.rowwise() += centroids.rowwise().squaredNorm().transpose();
    return d2.cwiseMax(0.0);
}

RowMajorD kmeans_plus_plus(const Eigen::Ref<const RowMajorD>& data, std::size_t m, Rng& rng)
{
    const auto n = data.rows();
    RowMajorD centroids(static_cast<Eigen::Index>(m), data.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centroids.row(0) = data.row(pick(rng));
    Eigen::VectorXd closest = (data.rowwise() - centroids.row(0)).rowwise().squaredNorm();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t c = 1; c < m; ++c) {
        const double total = closest.sum();
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            double target = unit(rng) * total;
            for (chosen = 0; chosen < n - 1; ++chosen) {
                target -= closest(chosen);
                if (target <= 0.0) {
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        centroids.row(static_cast<Eigen::Index>(c)) = data.row(chosen);
        closest = closest.cwiseMin((data.rowwise() - data.row(chosen)).rowwise().squaredNorm());
    }
    return centroids;
}

} // namespace

RowMajorD fit_anchors(const Eigen::Ref<const RowMajorD>& data, std::size_t m, AnchorStrategy strategy,
                      std::uint64_t seed)
{
    const auto n = static_cast<std::size_t>(data.rows());
    if (m < 1) {
        throw Error(ErrorKind::Argument, "anchor count must be >= 1");
    }
    auto rng = make_rng(seed, "sae/anchors");

    if (strategy == AnchorStrategy::Random) {
        if (m > n) {
            throw Error(ErrorKind::Argument, "cannot sample " + std::to_string(m) + " anchors from " +
                                                 std::to_string(n) + " rows without replacement");
        }
        std::vector<Eigen::Index> order(n);
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        // Partial Fisher-Yates: the first m slots are a uniform sample.
        for (std::size_t i = 0; i < m; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(order[i], order[pick(rng)]);
        }
        RowMajorD out(static_cast<Eigen::Index>(m), data.cols());
        for (std::size_t i = 0; i < m; ++i) {
            out.row(static_cast<Eigen::Index>(i)) = data.row(order[i]);
        }
        return out;
    }

    if (n == 0) {
        throw Error(ErrorKind::Argument, "k-means needs at least one data row");
    }
    RowMajorD centroids = kmeans_plus_plus(data, m, rng);
    const Eigen::VectorXd data_sq = data.rowwise().squaredNorm();
    std::vector<Eigen::Index> assign(n, -1);
    for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
        const RowMajorD d2 = squared_distances(data, centroids, data_sq);
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            d2.row(static_cast<Eigen::Index>(i)).minCoeff(&best);
            if (best != assign[i]) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed) {
            break;
        }
        RowMajorD sums = RowMajorD::Zero(static_cast<Eigen::Index>(m), data.cols());
        std::vector<std::size_t> counts(m, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(assign[i]) += data.row(static_cast<Eigen::Index>(i));
            ++counts[static_cast<std::size_t>(assign[i])];
        }
        for (std::size_t c = 0; c < m; ++c) {
            if (counts[c] > 0) {
                centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) /
                                                              static_cast<double>(counts[c]);
            } else {
                // Empty cluster: move it to the row farthest from its current centroid.
                Eigen::Index far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double v = d2(static_cast<Eigen::Index>(i), assign[i]);
                    if (v > far_d) {
                        far_d = v;
                        far = static_cast<Eigen::Index>(i);
                    }
                }
                centroids.row(static_cast<Eigen::Index>(c)) = data.row(far);
            }
        }
    }
    return centroids;
}

} // namespace blindspot::rasae
