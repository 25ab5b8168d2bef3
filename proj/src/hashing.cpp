#include "eoescope/hashing.hpp"

#include <openssl/evp.h>

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include "eoescope/error.hpp"
#include "eoescope/image.hpp"

namespace eoescope {

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("hashing", "digest-failed", "SHA-256 computation failed");
  }
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    hex.push_back(kDigits[digest[i] >> 4]);
    hex.push_back(kDigits[digest[i] & 0xF]);
  }
  return hex;
}

std::uint64_t difference_hash_gray(std::span<const std::uint8_t> gray, int width, int height) {
  if (width < 1 || height < 1 || gray.size() != static_cast<std::size_t>(width) * height) {
    throw Error("hashing", "degenerate", "grayscale raster has inconsistent dimensions");
  }
  cv::Mat src(height, width, CV_8UC1, const_cast<std::uint8_t*>(gray.data()));
  cv::Mat small;
  cv::resize(src, small, cv::Size(9, 8), 0, 0, cv::INTER_AREA);
  std::uint64_t hash = 0;
  for (int y = 0; y < 8; ++y) {
    const auto* row = small.ptr<std::uint8_t>(y);
    for (int x = 0; x < 8; ++x) {
      hash = (hash << 1) | (row[x + 1] > row[x] ? 1u : 0u);
    }
  }
  return hash;
}

std::uint64_t difference_hash(std::span<const std::uint8_t> image_bytes) {
  int w = 0;
  int h = 0;
  auto gray = decode_grayscale(image_bytes, w, h);
  return difference_hash_gray(gray, w, h);
}

}  // namespace eoescope
