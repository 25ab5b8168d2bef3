#include "eoescope/image.hpp"

#include <fstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "eoescope/error.hpp"

namespace eoescope {

std::optional<RasterFormat> sniff_format(std::span<const std::uint8_t> bytes) {
  static constexpr std::uint8_t kPng[] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::equal(std::begin(kPng), std::end(kPng), bytes.begin())) return RasterFormat::Png;
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return RasterFormat::Jpeg;
  if (bytes.size() >= 2 && bytes[0] == 'B' && bytes[1] == 'M') return RasterFormat::Bmp;
  return std::nullopt;
}

std::string_view content_type(RasterFormat format) {
  switch (format) {
    case RasterFormat::Png: return "image/png";
    case RasterFormat::Jpeg: return "image/jpeg";
    case RasterFormat::Bmp: return "image/bmp";
  }
  return "application/octet-stream";
}

namespace {

cv::Mat decode_mat(std::span<const std::uint8_t> bytes, int flags) {
  if (!sniff_format(bytes)) throw Error("image", "unsupported-format", "payload is not PNG, JPEG or BMP");
  cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat decoded;
  try {
    decoded = cv::imdecode(raw, flags);
  } catch (const cv::Exception& e) {
    throw Error("image", "decode-failed", std::string("cannot decode image: ") + e.what());
  }
  if (decoded.empty()) throw Error("image", "decode-failed", "cannot decode image bytes");
  return decoded;
}

cv::Mat to_bgr8(const Image& image) {
  cv::Mat out(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = out.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(y, x, c), 0.0f, 1.0f);
        row[x][2 - c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> encode(const Image& image, const std::string& ext, const std::vector<int>& params) {
  if (image.empty()) throw Error("image", "empty", "cannot encode an empty image");
  std::vector<std::uint8_t> out;
  if (!cv::imencode(ext, to_bgr8(image), out, params)) throw Error("image", "encode-failed", "encoding failed");
  return out;
}

}  // namespace

Image decode_image(std::span<const std::uint8_t> bytes) {
  cv::Mat bgr = decode_mat(bytes, cv::IMREAD_COLOR);
  Image img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(row[x][2 - c]) / 255.0f;
    }
  }
  return img;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  return encode(image, ".png", {cv::IMWRITE_PNG_COMPRESSION, 6});
}

std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality) {
  return encode(image, ".jpg", {cv::IMWRITE_JPEG_QUALITY, quality});
}

std::vector<std::uint8_t> decode_grayscale(std::span<const std::uint8_t> bytes, int& width, int& height) {
  cv::Mat bgr = decode_mat(bytes, cv::IMREAD_COLOR);
  cv::Mat gray;
  cv::cvtColor(bgr, gray, cv::COLOR_BGR2GRAY);
  width = gray.cols;
  height = gray.rows;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) std::copy_n(gray.ptr<std::uint8_t>(y), width, out.begin() + y * width);
  return out;
}

Image resize_bilinear(const Image& image, int width, int height) {
  if (image.empty() || width <= 0 || height <= 0) throw Error("image", "degenerate", "cannot resize an empty image");
  Image out(width, height);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - wx) * image.at(y0, x0, c) + wx * image.at(y0, x1, c);
        const double bottom = (1 - wx) * image.at(y1, x0, c) + wx * image.at(y1, x1, c);
        out.at(y, x, c) = static_cast<float>((1 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "not-found", "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "write-failed", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace eoescope
