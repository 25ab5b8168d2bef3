#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>

namespace eoescope {

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// 64-bit difference hash: grayscale, area-resampled to 9x8, bit set where a
/// pixel is brighter than its left neighbour; row-major, first bit is the MSB.
std::uint64_t difference_hash(std::span<const std::uint8_t> image_bytes);
/// Same hash from an 8-bit grayscale raster.
std::uint64_t difference_hash_gray(std::span<const std::uint8_t> gray, int width, int height);

inline int hamming_distance(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

}  // namespace eoescope
