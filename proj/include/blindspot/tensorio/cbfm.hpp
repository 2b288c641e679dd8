#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "blindspot/tensorio/feature_matrix.hpp"

namespace blindspot::tensorio {

// CBFM layout (all integers little-endian):
//   version 1:  "CBFM" | u32 version | u64 rows | u64 cols | rows*cols f32
//   version 2:  "CBFM" | u32 version | u64 section_count | sections...
//     section:  u32 name_len | name | u32 kind | u64 rows | u64 cols | payload
inline constexpr char kMagic[4] = {'C', 'B', 'F', 'M'};
inline constexpr std::uint32_t kMatrixVersion = 1;
inline constexpr std::uint32_t kSectionedVersion = 2;

void write_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path);
FeatureMatrix read_feature_matrix(const std::filesystem::path& path);

/// Reads only the header of a version-1 file. Returns {rows, cols}.
std::pair<std::uint64_t, std::uint64_t> read_feature_matrix_shape(const std::filesystem::path& path);

enum class SectionKind : std::uint32_t {
    F32 = 1,
    F64 = 2,
    U32 = 3,
    U64 = 4,
    Bytes = 5,
};

struct Section {
    std::string name;
    SectionKind kind = SectionKind::Bytes;
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    std::vector<unsigned char> payload; // host byte order for numeric kinds
};

/// Named-section container used for model state, sparse codes, and energies.
class SectionedFile {
public:
    void put_f32(const std::string& name, const FeatureMatrix& m);
    void put_f64(const std::string& name, std::uint64_t rows, std::uint64_t cols, std::span<const double> values);
    void put_f64(const std::string& name, const Eigen::Ref<const RowMajorD>& m);
    void put_u32(const std::string& name, std::span<const std::uint32_t> values);
    void put_u64(const std::string& name, std::span<const std::uint64_t> values);
    void put_json(const std::string& name, const nlohmann::json& value);

    bool has(const std::string& name) const noexcept;
    const Section& section(const std::string& name) const;

    FeatureMatrix get_f32(const std::string& name) const;
    RowMajorD get_f64(const std::string& name) const;
    std::vector<std::uint32_t> get_u32(const std::string& name) const;
    std::vector<std::uint64_t> get_u64(const std::string& name) const;
    nlohmann::json get_json(const std::string& name) const;

    const std::vector<Section>& sections() const noexcept { return sections_; }

    void write(const std::filesystem::path& path) const;
    static SectionedFile read(const std::filesystem::path& path);

private:
    void put(Section s);
    const Section& expect(const std::string& name, SectionKind kind) const;

    std::vector<Section> sections_;
};

} // namespace blindspot::tensorio
