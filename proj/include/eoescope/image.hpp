#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eoescope {

enum class RasterFormat { Png, Jpeg, Bmp };

/// Detects a supported raster container from its magic bytes.
std::optional<RasterFormat> sniff_format(std::span<const std::uint8_t> bytes);
std::string_view content_type(RasterFormat format);

/// RGB image with float channels in [0, 1], stored row-major (HWC).
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  float& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool empty() const { return data.empty(); }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Decodes PNG, JPEG or BMP bytes. Throws Error{"image","unsupported-format"}
/// for other payloads and Error{"image","decode-failed"} for corrupt ones.
Image decode_image(std::span<const std::uint8_t> bytes);
/// PNG bytes of the image quantized to 8 bits per channel.
std::vector<std::uint8_t> encode_png(const Image& image);
std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality = 95);

/// 8-bit grayscale (ITU-R 601 luma) of decoded bytes, as rows of pixels.
std::vector<std::uint8_t> decode_grayscale(std::span<const std::uint8_t> bytes, int& width, int& height);

/// Bilinear resize with half-pixel centers.
Image resize_bilinear(const Image& image, int width, int height);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace eoescope
