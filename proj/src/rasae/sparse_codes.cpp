#include "blindspot/rasae/sparse_codes.hpp"

#include <algorithm>
#include <string>

#include "blindspot/error.hpp"
#include "blindspot/tensorio/cbfm.hpp"

namespace blindspot::rasae {

void SparseCodeMatrix::push_row(std::span<const CodeEntry> entries)
{
    for (const auto& e : entries) {
        if (e.index >= n_concepts_) {
            throw Error(ErrorKind::Corruption, "code index " + std::to_string(e.index) + " >= n_concepts " +
                                                   std::to_string(n_concepts_));
        }
        if (!(e.activation > 0.0)) {
            throw Error(ErrorKind::Corruption, "non-positive activation stored in sparse code");
        }
    }
    entries_.insert(entries_.end(), entries.begin(), entries.end());
    row_ptr_.push_back(entries_.size());
}

std::size_t SparseCodeMatrix::max_row_nonzeros() const noexcept
{
    std::size_t best = 0;
    for (std::size_t r = 0; r + 1 < row_ptr_.size(); ++r) {
        best = std::max(best, row_ptr_[r + 1] - row_ptr_[r]);
    }
    return best;
}

tensorio::RowMajorD SparseCodeMatrix::to_dense() const
{
    tensorio::RowMajorD out =
        tensorio::RowMajorD::Zero(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(n_concepts_));
    for (std::size_t r = 0; r < rows(); ++r) {
        for (const auto& e : row(r)) {
            out(static_cast<Eigen::Index>(r), e.index) = e.activation;
        }
    }
    return out;
}

SparseCodeMatrix SparseCodeMatrix::from_dense(const Eigen::Ref<const tensorio::RowMajorD>& dense)
{
    SparseCodeMatrix out(static_cast<std::size_t>(dense.cols()));
    std::vector<CodeEntry> row;
    for (Eigen::Index r = 0; r < dense.rows(); ++r) {
        row.clear();
        for (Eigen::Index c = 0; c < dense.cols(); ++c) {
            if (dense(r, c) > 0.0) {
                row.push_back({static_cast<std::uint32_t>(c), dense(r, c)});
            }
        }
        out.push_row(row);
    }
    return out;
}

void SparseCodeMatrix::save(const std::filesystem::path& path) const
{
    tensorio::SectionedFile f;
    f.put_json("shape", {{"kind", "sparse_codes"}, {"rows", rows()}, {"n_concepts", n_concepts_}});
    std::vector<std::uint64_t> ptr(row_ptr_.begin(), row_ptr_.end());
    std::vector<std::uint32_t> idx;
    std::vector<double> val;
    idx.reserve(entries_.size());
    val.reserve(entries_.size());
    for (const auto& e : entries_) {
        idx.push_back(e.index);
        val.push_back(e.activation);
    }
    f.put_u64("row_ptr", ptr);
    f.put_u32("index", idx);
    f.put_f64("value", val.size(), 1, val);
    f.write(path);
}

SparseCodeMatrix SparseCodeMatrix::load(const std::filesystem::path& path)
{
    const auto f = tensorio::SectionedFile::read(path);
    const auto shape = f.get_json("shape");
    if (shape.value("kind", std::string{}) != "sparse_codes") {
        throw Error(ErrorKind::Format, path.string() + ": not a sparse code file");
    }
    const auto n_concepts = shape.at("n_concepts").get<std::size_t>();
    const auto ptr = f.get_u64("row_ptr");
    const auto idx = f.get_u32("index");
    const auto val = f.get_f64("value");
    if (ptr.empty() || ptr.front() != 0 || ptr.back() != idx.size() ||
        static_cast<std::size_t>(val.size()) != idx.size()) {
        throw Error(ErrorKind::Corruption, path.string() + ": inconsistent sparse code sections");
    }
    SparseCodeMatrix out(n_concepts);
    std::vector<CodeEntry> row;
    for (std::size_t r = 0; r + 1 < ptr.size(); ++r) {
        if (ptr[r + 1] < ptr[r]) {
            throw Error(ErrorKind::Corruption, path.string() + ": row pointers not monotone");
        }
        row.clear();
        for (auto i = ptr[r]; i < ptr[r + 1]; ++i) {
            row.push_back({idx[i], val(static_cast<Eigen::Index>(i), 0)});
        }
        out.push_row(row);
    }
    return out;
}

} // namespace blindspot::rasae
