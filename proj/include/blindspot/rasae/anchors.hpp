#pragma once

#include <cstddef>
#include <cstdint>

#include "blindspot/rasae/config.hpp"
#include "blindspot/tensorio/feature_matrix.hpp"

namespace blindspot::rasae {

/// m anchor rows: a sample without replacement (Random) or k-means++ seeded
/// Lloyd centroids with at most 50 iterations (KMeans). Deterministic in seed.
tensorio::RowMajorD fit_anchors(const Eigen::Ref<const tensorio::RowMajorD>& data, std::size_t m,
                                AnchorStrategy strategy, std::uint64_t seed);

} // namespace blindspot::rasae
