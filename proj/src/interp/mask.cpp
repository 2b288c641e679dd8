#include <algorithm>
#include <cmath>
#include <iterator>

#include <png.h>

#include "blindspot/error.hpp"
#include "blindspot/interp/interp.hpp"
#include "blindspot/stats.hpp"

namespace blindspot::interp {

Bitmap read_png(const std::filesystem::path& path)
{
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorKind::Io, "image not found: " + path.string());
    }
    if (png_image_begin_read_from_file(&img, path.c_str()) == 0) {
        throw Error(ErrorKind::Format, "cannot decode PNG " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_RGBA;
    Bitmap b;
    b.width = img.width;
    b.height = img.height;
    b.rgba.resize(PNG_IMAGE_SIZE(img));
    if (png_image_finish_read(&img, nullptr, b.rgba.data(), 0, nullptr) == 0) {
        png_image_free(&img);
        throw Error(ErrorKind::Corruption, "PNG " + path.string() + " is damaged: " + img.message);
    }
    return b;
}

namespace {

void check_bitmap(const Bitmap& b)
{
    if (b.width == 0 || b.height == 0 || b.rgba.size() != b.width * b.height * 4) {
        throw Error(ErrorKind::Shape, "bitmap buffer does not match its dimensions");
    }
}

png_image header_for(const Bitmap& b)
{
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(b.width);
    img.height = static_cast<png_uint_32>(b.height);
    img.format = PNG_FORMAT_RGBA;
    return img;
}

} // namespace

void write_png(const Bitmap& bitmap, const std::filesystem::path& path)
{
    check_bitmap(bitmap);
    png_image img = header_for(bitmap);
    if (png_image_write_to_file(&img, path.c_str(), 0, bitmap.rgba.data(), 0, nullptr) == 0) {
        throw Error(ErrorKind::Io, "cannot write PNG " + path.string() + ": " + img.message);
    }
}

std::vector<std::uint8_t> encode_png(const Bitmap& bitmap)
{
    check_bitmap(bitmap);
    png_image img = header_for(bitmap);
    png_alloc_size_t size = 0;
    if (png_image_write_to_memory(&img, nullptr, &size, 0, bitmap.rgba.data(), 0, nullptr) == 0) {
        throw Error(ErrorKind::Format, std::string("PNG encoding failed: ") + img.message);
    }
    std::vector<std::uint8_t> out(size);
    if (png_image_write_to_memory(&img, out.data(), &size, 0, bitmap.rgba.data(), 0, nullptr) == 0) {
        throw Error(ErrorKind::Format, std::string("PNG encoding failed: ") + img.message);
    }
    out.resize(size);
    return out;
}

void SpatialActivationMap::validate() const
{
    if (h == 0 || w == 0 || values.size() != h * w) {
        throw Error(ErrorKind::Shape, "activation map needs h * w values");
    }
    for (double v : values) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw Error(ErrorKind::Validation, "activation map values must be finite and >= 0");
        }
    }
}

SpatialActivationMap activation_map(const rasae::SparseCodeMatrix& codes, const tensorio::TokenGrouping& grouping,
                                    std::size_t image_index, std::size_t concept_id, std::size_t h, std::size_t w,
                                    std::string image_id)
{
    if (h * w != grouping.tokens_per_image) {
        throw Error(ErrorKind::Shape, "grid " + std::to_string(h) + "x" + std::to_string(w) + " does not hold " +
                                          std::to_string(grouping.tokens_per_image) + " tokens");
    }
    if (codes.rows() != grouping.token_rows() || image_index >= grouping.image_count) {
        throw Error(ErrorKind::Shape, "image index or code rows do not match the grouping");
    }
    SpatialActivationMap m{image_id.empty() ? std::to_string(image_index) : std::move(image_id), h, w,
                           std::vector<double>(h * w, 0.0)};
    for (std::size_t tok = 0; tok < grouping.tokens_per_image; ++tok) {
        for (const auto& e : codes.row(image_index * grouping.tokens_per_image + tok)) {
            if (e.index == concept_id) {
                m.values[tok] = e.activation;
            }
        }
    }
    return m;
}

Bitmap alpha_mask(const Bitmap& image, const SpatialActivationMap& map, double q)
{
    check_bitmap(image);
    map.validate();
    if (!(q > 0.0 && q < 1.0)) {
        throw Error(ErrorKind::Argument, "mask quantile must lie in (0, 1)");
    }
    if (image.width % map.w != 0 || image.height % map.h != 0) {
        throw Error(ErrorKind::Shape, "image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                                          " does not divide into a " + std::to_string(map.h) + "x" +
                                          std::to_string(map.w) + " grid");
    }
    std::vector<double> positive;
    std::copy_if(map.values.begin(), map.values.end(), std::back_inserter(positive), [](double v) { return v > 0; });
    if (positive.empty()) {
        throw Error(ErrorKind::Argument, "activation map of '" + map.image_id + "' is all zero; nothing to mask toward");
    }
    const double threshold = quantile(positive, q);
    const std::size_t ph = image.height / map.h;
    const std::size_t pw = image.width / map.w;
    Bitmap out = image;
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            const double v = map.values[(y / ph) * map.w + x / pw];
            out.rgba[(y * image.width + x) * 4 + 3] = v < threshold ? 0 : 255;
        }
    }
    return out;
}

double visible_fraction(const Bitmap& bitmap)
{
    check_bitmap(bitmap);
    std::size_t visible = 0;
    for (std::size_t i = 3; i < bitmap.rgba.size(); i += 4) {
        visible += bitmap.rgba[i] > 0 ? 1 : 0;
    }
    return static_cast<double>(visible) / static_cast<double>(bitmap.width * bitmap.height);
}

} // namespace blindspot::interp
