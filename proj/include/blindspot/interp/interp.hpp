#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "blindspot/rasae/sparse_codes.hpp"
#include "blindspot/tensorio/feature_matrix.hpp"

namespace blindspot::interp {

/// 8-bit RGBA, row-major, 4 bytes per pixel.
struct Bitmap {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgba;

    friend bool operator==(const Bitmap&, const Bitmap&) = default;
};

Bitmap read_png(const std::filesystem::path& path);
void write_png(const Bitmap& bitmap, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const Bitmap& bitmap);

/// One concept's token activations laid out on the patch grid.
struct SpatialActivationMap {
    std::string image_id;
    std::size_t h = 0;
    std::size_t w = 0;
    std::vector<double> values; // h * w, row-major

    void validate() const;
};

/// Tokens of image `image_index` for `concept_id`, reshaped to h x w (h * w must equal tokens per image).
SpatialActivationMap activation_map(const rasae::SparseCodeMatrix& codes, const tensorio::TokenGrouping& grouping,
                                    std::size_t image_index, std::size_t concept_id, std::size_t h, std::size_t w,
                                    std::string image_id = {});

/// Zeroes alpha in patches whose activation falls below the q-quantile of the positive activations.
/// RGB is untouched; the grid is upsampled nearest-neighbour.
Bitmap alpha_mask(const Bitmap& image, const SpatialActivationMap& map, double q = 0.7);

double visible_fraction(const Bitmap& bitmap);

using LogSink = std::function<void(const std::string&)>;

struct VlmConfig {
    std::string endpoint; // e.g. https://api.example.com/v1/chat/completions
    std::string model = "gpt-4o";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string prompt = "Describe the dominant visual concept in the visible region of this image. "
                         "Provide only the description.";
    std::chrono::milliseconds timeout{30000};
    int max_retries = 3;
    std::chrono::milliseconds backoff{500}; // doubled after each retry
    std::size_t concurrency = 4;
    LogSink log;
};

struct Description {
    std::string text;                      // consolidated
    std::vector<std::string> per_exemplar; // one per request, in exemplar order
    std::size_t retries = 0;               // across all requests
};

/// One chat-completions request per exemplar; the answer sharing the most tokens with the others wins.
Description describe_concept(const std::vector<Bitmap>& exemplars, const VlmConfig& config);

/// Index of the text with the highest summed Jaccard token overlap with the rest (ties: lowest index).
std::size_t consensus_index(const std::vector<std::string>& texts);

std::string base64(const std::vector<std::uint8_t>& bytes);

} // namespace blindspot::interp
