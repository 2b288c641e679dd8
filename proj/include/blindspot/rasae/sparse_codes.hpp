#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "blindspot/tensorio/feature_matrix.hpp"

namespace blindspot::rasae {

struct CodeEntry {
    std::uint32_t index;
    double activation;

    friend bool operator==(const CodeEntry&, const CodeEntry&) = default;
};

/// Row-compressed nonnegative sparse codes: n rows over n_concepts latents.
/// Zero activations are never stored.
class SparseCodeMatrix {
public:
    SparseCodeMatrix() : row_ptr_{0} {}
    explicit SparseCodeMatrix(std::size_t n_concepts) : n_concepts_(n_concepts), row_ptr_{0} {}

    /// Appends one row. Entries must have activation > 0 and concept < n_concepts.
    void push_row(std::span<const CodeEntry> entries);

    std::size_t rows() const noexcept { return row_ptr_.size() - 1; }
    std::size_t n_concepts() const noexcept { return n_concepts_; }
    std::size_t nonzeros() const noexcept { return entries_.size(); }

    std::span<const CodeEntry> row(std::size_t r) const
    {
        return {entries_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]};
    }

    std::size_t max_row_nonzeros() const noexcept;

    /// Dense n x n_concepts copy.
    tensorio::RowMajorD to_dense() const;
    static SparseCodeMatrix from_dense(const Eigen::Ref<const tensorio::RowMajorD>& dense);

    void save(const std::filesystem::path& path) const;
    static SparseCodeMatrix load(const std::filesystem::path& path);

    friend bool operator==(const SparseCodeMatrix&, const SparseCodeMatrix&) = default;

private:
    std::size_t n_concepts_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<CodeEntry> entries_;
};

} // namespace blindspot::rasae
