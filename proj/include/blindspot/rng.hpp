#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace blindspot {

using Rng = std::mt19937_64;

/// Derives a child seed for a named substream. Stable across platforms.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) noexcept;

/// Derives a child seed for the i-th member of an indexed family (trials, images).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept;

inline Rng make_rng(std::uint64_t root, std::string_view stream)
{
    return Rng(derive_seed(root, stream));
}

} // namespace blindspot
