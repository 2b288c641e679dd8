#include "blindspot/tensorio/cbfm.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "blindspot/error.hpp"

namespace blindspot::tensorio {

namespace {

constexpr std::uint64_t kMaxSections = 1U << 16;
constexpr std::uint32_t kMaxNameLength = 4096;

// Copies `count` elements of `width` bytes, swapping to/from little-endian when needed.
void copy_le(const unsigned char* src, unsigned char* dst, std::size_t count, std::size_t width)
{
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(dst, src, count * width);
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::reverse_copy(src + i * width, src + (i + 1) * width, dst + i * width);
        }
    }
}

std::size_t element_width(SectionKind kind)
{
    switch (kind) {
    case SectionKind::F32: return 4;
    case SectionKind::F64: return 8;
    case SectionKind::U32: return 4;
    case SectionKind::U64: return 8;
    case SectionKind::Bytes: return 1;
    }
    return 0;
}

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc)
    {
        if (!out_) {
            throw Error(ErrorKind::Io, "cannot open for writing: " + path.string());
        }
    }

    template <typename T>
    void scalar(T v)
    {
        unsigned char buf[sizeof(T)];
        copy_le(reinterpret_cast<const unsigned char*>(&v), buf, 1, sizeof(T));
        raw(buf, sizeof(T));
    }

    void raw(const void* p, std::size_t n)
    {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    }

    void array(const unsigned char* p, std::size_t count, std::size_t width)
    {
        if constexpr (std::endian::native == std::endian::little) {
            raw(p, count * width);
        } else {
            std::vector<unsigned char> buf(count * width);
            copy_le(p, buf.data(), count, width);
            raw(buf.data(), buf.size());
        }
    }

    void finish()
    {
        out_.flush();
        if (!out_) {
            throw Error(ErrorKind::Io, "write failed: " + path_.string());
        }
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw Error(ErrorKind::Io, "cannot open for reading: " + path.string());
        }
        bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

    void need(std::uint64_t n, const char* what) const
    {
        if (n > remaining()) {
            throw Error(ErrorKind::Truncation, path_.string() + ": truncated " + what + " (need " + std::to_string(n) +
                                                   " bytes, have " + std::to_string(remaining()) + ")");
        }
    }

    template <typename T>
    T scalar(const char* what)
    {
        need(sizeof(T), what);
        T v{};
        copy_le(reinterpret_cast<const unsigned char*>(bytes_.data() + pos_), reinterpret_cast<unsigned char*>(&v), 1,
                sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    void array(unsigned char* dst, std::size_t count, std::size_t width, const char* what)
    {
        need(static_cast<std::uint64_t>(count) * width, what);
        copy_le(reinterpret_cast<const unsigned char*>(bytes_.data() + pos_), dst, count, width);
        pos_ += count * width;
    }

    std::string string(std::size_t n, const char* what)
    {
        need(n, what);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }

    void header(std::uint32_t expected_version)
    {
        need(4, "magic");
        if (std::memcmp(bytes_.data(), kMagic, 4) != 0) {
            throw Error(ErrorKind::Format, path_.string() + ": bad magic (not a CBFM file)");
        }
        pos_ = 4;
        const auto version = scalar<std::uint32_t>("version");
        if (version != expected_version) {
            throw Error(ErrorKind::Format, path_.string() + ": CBFM version " + std::to_string(version) +
                                               ", expected " + std::to_string(expected_version));
        }
    }

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

std::uint64_t checked_product(std::uint64_t a, std::uint64_t b, const std::filesystem::path& path)
{
    if (a != 0 && b > UINT64_MAX / a) {
        throw Error(ErrorKind::Format, path.string() + ": header dimensions overflow");
    }
    return a * b;
}

} // namespace

void write_feature_matrix(const FeatureMatrix& matrix, const std::filesystem::path& path)
{
    if (!matrix.all_finite()) {
        throw Error(ErrorKind::Validation, "refusing to write non-finite values to " + path.string());
    }
    Writer w(path);
    w.raw(kMagic, 4);
    w.scalar<std::uint32_t>(kMatrixVersion);
    w.scalar<std::uint64_t>(matrix.rows());
    w.scalar<std::uint64_t>(matrix.cols());
    w.array(reinterpret_cast<const unsigned char*>(matrix.data().data()), matrix.data().size(), sizeof(float));
    w.finish();
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& path)
{
    Reader r(path);
    r.header(kMatrixVersion);
    const auto rows = r.scalar<std::uint64_t>("rows");
    const auto cols = r.scalar<std::uint64_t>("cols");
    const auto count = checked_product(rows, cols, path);
    r.need(checked_product(count, sizeof(float), path), "payload");
    if (r.remaining() != count * sizeof(float)) {
        throw Error(ErrorKind::Format, path.string() + ": trailing bytes after payload");
    }
    std::vector<float> data(count);
    r.array(reinterpret_cast<unsigned char*>(data.data()), count, sizeof(float), "payload");
    FeatureMatrix m(rows, cols, std::move(data));
    if (!m.all_finite()) {
        throw Error(ErrorKind::Validation, path.string() + ": contains non-finite values");
    }
    return m;
}

std::pair<std::uint64_t, std::uint64_t> read_feature_matrix_shape(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open for reading: " + path.string());
    }
    unsigned char head[24];
    in.read(reinterpret_cast<char*>(head), sizeof head);
    if (in.gcount() != static_cast<std::streamsize>(sizeof head)) {
        throw Error(ErrorKind::Truncation, path.string() + ": truncated header");
    }
    if (std::memcmp(head, kMagic, 4) != 0) {
        throw Error(ErrorKind::Format, path.string() + ": bad magic (not a CBFM file)");
    }
    std::uint32_t version = 0;
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;
    copy_le(head + 4, reinterpret_cast<unsigned char*>(&version), 1, 4);
    copy_le(head + 8, reinterpret_cast<unsigned char*>(&rows), 1, 8);
    copy_le(head + 16, reinterpret_cast<unsigned char*>(&cols), 1, 8);
    if (version != kMatrixVersion) {
        throw Error(ErrorKind::Format, path.string() + ": not a plain feature matrix (version " +
                                           std::to_string(version) + ")");
    }
    return {rows, cols};
}

void SectionedFile::put(Section s)
{
    auto it = std::find_if(sections_.begin(), sections_.end(), [&](const Section& x) { return x.name == s.name; });
    if (it != sections_.end()) {
        *it = std::move(s);
    } else {
        sections_.push_back(std::move(s));
    }
}

void SectionedFile::put_f32(const std::string& name, const FeatureMatrix& m)
{
    Section s{name, SectionKind::F32, m.rows(), m.cols(), {}};
    s.payload.resize(m.data().size() * sizeof(float));
    std::memcpy(s.payload.data(), m.data().data(), s.payload.size());
    put(std::move(s));
}

void SectionedFile::put_f64(const std::string& name, std::uint64_t rows, std::uint64_t cols,
                            std::span<const double> values)
{
    if (values.size() != rows * cols) {
        throw Error(ErrorKind::Shape, "section '" + name + "' size mismatch");
    }
    Section s{name, SectionKind::F64, rows, cols, {}};
    s.payload.resize(values.size() * sizeof(double));
    std::memcpy(s.payload.data(), values.data(), s.payload.size());
    put(std::move(s));
}

void SectionedFile::put_f64(const std::string& name, const Eigen::Ref<const RowMajorD>& m)
{
    const RowMajorD copy = m;
    put_f64(name, static_cast<std::uint64_t>(copy.rows()), static_cast<std::uint64_t>(copy.cols()),
            std::span<const double>(copy.data(), static_cast<std::size_t>(copy.size())));
}

void SectionedFile::put_u32(const std::string& name, std::span<const std::uint32_t> values)
{
    Section s{name, SectionKind::U32, values.size(), 1, {}};
    s.payload.resize(values.size_bytes());
    std::memcpy(s.payload.data(), values.data(), s.payload.size());
    put(std::move(s));
}

void SectionedFile::put_u64(const std::string& name, std::span<const std::uint64_t> values)
{
    Section s{name, SectionKind::U64, values.size(), 1, {}};
    s.payload.resize(values.size_bytes());
    std::memcpy(s.payload.data(), values.data(), s.payload.size());
    put(std::move(s));
}

void SectionedFile::put_json(const std::string& name, const nlohmann::json& value)
{
    const std::string text = value.dump();
    Section s{name, SectionKind::Bytes, text.size(), 1, {}};
    s.payload.assign(text.begin(), text.end());
    put(std::move(s));
}

bool SectionedFile::has(const std::string& name) const noexcept
{
    return std::any_of(sections_.begin(), sections_.end(), [&](const Section& s) { return s.name == name; });
}

const Section& SectionedFile::section(const std::string& name) const
{
    for (const auto& s : sections_) {
        if (s.name == name) {
            return s;
        }
    }
    throw Error(ErrorKind::Format, "missing section '" + name + "'");
}

const Section& SectionedFile::expect(const std::string& name, SectionKind kind) const
{
    const auto& s = section(name);
    if (s.kind != kind) {
        throw Error(ErrorKind::Format, "section '" + name + "' has unexpected kind " +
                                           std::to_string(static_cast<std::uint32_t>(s.kind)));
    }
    return s;
}

FeatureMatrix SectionedFile::get_f32(const std::string& name) const
{
    const auto& s = expect(name, SectionKind::F32);
    std::vector<float> data(s.rows * s.cols);
    std::memcpy(data.data(), s.payload.data(), s.payload.size());
    return {s.rows, s.cols, std::move(data)};
}

RowMajorD SectionedFile::get_f64(const std::string& name) const
{
    const auto& s = expect(name, SectionKind::F64);
    RowMajorD m(static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
    std::memcpy(m.data(), s.payload.data(), s.payload.size());
    return m;
}

std::vector<std::uint32_t> SectionedFile::get_u32(const std::string& name) const
{
    const auto& s = expect(name, SectionKind::U32);
    std::vector<std::uint32_t> v(s.rows * s.cols);
    std::memcpy(v.data(), s.payload.data(), s.payload.size());
    return v;
}

std::vector<std::uint64_t> SectionedFile::get_u64(const std::string& name) const
{
    const auto& s = expect(name, SectionKind::U64);
    std::vector<std::uint64_t> v(s.rows * s.cols);
    std::memcpy(v.data(), s.payload.data(), s.payload.size());
    return v;
}

nlohmann::json SectionedFile::get_json(const std::string& name) const
{
    const auto& s = expect(name, SectionKind::Bytes);
    try {
        return nlohmann::json::parse(s.payload.begin(), s.payload.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, "section '" + name + "' is not valid JSON: " + e.what());
    }
}

void SectionedFile::write(const std::filesystem::path& path) const
{
    Writer w(path);
    w.raw(kMagic, 4);
    w.scalar<std::uint32_t>(kSectionedVersion);
    w.scalar<std::uint64_t>(sections_.size());
    for (const auto& s : sections_) {
        w.scalar<std::uint32_t>(static_cast<std::uint32_t>(s.name.size()));
        w.raw(s.name.data(), s.name.size());
        w.scalar<std::uint32_t>(static_cast<std::uint32_t>(s.kind));
        w.scalar<std::uint64_t>(s.rows);
        w.scalar<std::uint64_t>(s.cols);
        const auto width = element_width(s.kind);
        w.array(s.payload.data(), s.payload.size() / width, width);
    }
    w.finish();
}

SectionedFile SectionedFile::read(const std::filesystem::path& path)
{
    Reader r(path);
    r.header(kSectionedVersion);
    const auto count = r.scalar<std::uint64_t>("section count");
    if (count > kMaxSections) {
        throw Error(ErrorKind::Format, path.string() + ": implausible section count " + std::to_string(count));
    }
    SectionedFile file;
    for (std::uint64_t i = 0; i < count; ++i) {
        Section s;
        const auto name_len = r.scalar<std::uint32_t>("section name length");
        if (name_len > kMaxNameLength) {
            throw Error(ErrorKind::Format, path.string() + ": implausible section name length");
        }
        s.name = r.string(name_len, "section name");
        const auto kind = r.scalar<std::uint32_t>("section kind");
        if (kind < 1 || kind > 5) {
            throw Error(ErrorKind::Format, path.string() + ": unknown section kind " + std::to_string(kind));
        }
        s.kind = static_cast<SectionKind>(kind);
        s.rows = r.scalar<std::uint64_t>("section rows");
        s.cols = r.scalar<std::uint64_t>("section cols");
        const auto width = element_width(s.kind);
        const auto n = checked_product(s.rows, s.cols, path);
        r.need(checked_product(n, width, path), "section payload");
        s.payload.resize(n * width);
        r.array(s.payload.data(), n, width, "section payload");
        file.sections_.push_back(std::move(s));
    }
    if (r.remaining() != 0) {
        throw Error(ErrorKind::Format, path.string() + ": trailing bytes after last section");
    }
    return file;
}

} // namespace blindspot::tensorio
