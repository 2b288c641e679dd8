#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace blindspot::tensorio {

using RowMajorF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMajorD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major float32 matrix: token or image embeddings, one per row.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols);
    FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

    static FeatureMatrix from_eigen(const Eigen::Ref<const RowMajorD>& m);
    static FeatureMatrix from_eigen(const Eigen::Ref<const RowMajorF>& m);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    Eigen::Map<const RowMajorF> view() const
    {
        return {data_.data(), static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_)};
    }

    /// Rows [begin, begin + count) as a new matrix.
    FeatureMatrix slice_rows(std::size_t begin, std::size_t count) const;

    /// Copy widened to double.
    RowMajorD to_double() const;

    bool all_finite() const noexcept;

    friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

/// Rows stacked in order; all inputs must agree on cols (empty inputs are skipped).
FeatureMatrix vstack(std::span<const FeatureMatrix> parts);

/// Token granularity: tokens_per_image consecutive rows belong to one image.
struct TokenGrouping {
    std::size_t tokens_per_image = 1;
    std::size_t image_count = 0;

    std::size_t token_rows() const noexcept { return tokens_per_image * image_count; }
};

/// Grouping for a matrix of `rows` token rows; throws Shape when t does not divide rows.
TokenGrouping grouping_for(std::size_t rows, std::size_t tokens_per_image);

} // namespace blindspot::tensorio
