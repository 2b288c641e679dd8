#include "blindspot/tensorio/feature_matrix.hpp"

#include <cmath>
#include <string>

#include "blindspot/error.hpp"

namespace blindspot::tensorio {

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0F)
{
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data))
{
    if (data_.size() != rows_ * cols_) {
        throw Error(ErrorKind::Shape, "feature matrix " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                                          " given " + std::to_string(data_.size()) + " values");
    }
}

FeatureMatrix FeatureMatrix::from_eigen(const Eigen::Ref<const RowMajorD>& m)
{
    FeatureMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    Eigen::Map<RowMajorF>(out.data_.data(), m.rows(), m.cols()) = m.cast<float>();
    return out;
}

FeatureMatrix FeatureMatrix::from_eigen(const Eigen::Ref<const RowMajorF>& m)
{
    FeatureMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    Eigen::Map<RowMajorF>(out.data_.data(), m.rows(), m.cols()) = m;
    return out;
}

FeatureMatrix FeatureMatrix::slice_rows(std::size_t begin, std::size_t count) const
{
    if (begin + count > rows_) {
        throw Error(ErrorKind::Shape, "row slice [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                                          ") exceeds " + std::to_string(rows_) + " rows");
    }
    const auto first = data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_);
    return {count, cols_, std::vector<float>(first, first + static_cast<std::ptrdiff_t>(count * cols_))};
}

RowMajorD FeatureMatrix::to_double() const
{
    return view().cast<double>();
}

bool FeatureMatrix::all_finite() const noexcept
{
    for (float v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

FeatureMatrix vstack(std::span<const FeatureMatrix> parts)
{
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool have_cols = false;
    for (const auto& p : parts) {
        if (p.rows() == 0) {
            continue;
        }
        if (have_cols && p.cols() != cols) {
            throw Error(ErrorKind::Shape, "vstack: column mismatch " + std::to_string(p.cols()) + " vs " +
                                              std::to_string(cols));
        }
        cols = p.cols();
        have_cols = true;
        rows += p.rows();
    }
    std::vector<float> data;
    data.reserve(rows * cols);
    for (const auto& p : parts) {
        if (p.rows() != 0) {
            data.insert(data.end(), p.data().begin(), p.data().end());
        }
    }
    return {rows, cols, std::move(data)};
}

TokenGrouping grouping_for(std::size_t rows, std::size_t tokens_per_image)
{
    if (tokens_per_image == 0) {
        throw Error(ErrorKind::Shape, "tokens_per_image must be >= 1");
    }
    if (rows % tokens_per_image != 0) {
        throw Error(ErrorKind::Shape, std::to_string(rows) + " token rows not divisible by tokens_per_image=" +
                                          std::to_string(tokens_per_image));
    }
    return {tokens_per_image, rows / tokens_per_image};
}

} // namespace blindspot::tensorio
