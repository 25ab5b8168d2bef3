#include <doctest.h>

#include "eoescope/error.hpp"
#include "eoescope/image.hpp"
#include "fixtures.hpp"

using namespace eoescope;

TEST_CASE("format sniffing") {
  const auto png = encode_png(fixtures::pattern_image(8, 8, 1));
  const auto jpg = encode_jpeg(fixtures::pattern_image(8, 8, 1));
  CHECK(sniff_format(png) == RasterFormat::Png);
  CHECK(sniff_format(jpg) == RasterFormat::Jpeg);
  const std::vector<std::uint8_t> text{'h', 'e', 'l', 'l', 'o'};
  CHECK_FALSE(sniff_format(text));
  CHECK(content_type(RasterFormat::Png) == "image/png");
}

TEST_CASE("PNG round trip is exact at 8 bits") {
  Image img(5, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i * 7 % 256) / 255.0f;
  const Image back = decode_image(encode_png(img));
  REQUIRE(back.width == 5);
  REQUIRE(back.height == 3);
  for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
}

TEST_CASE("decode errors") {
  const std::vector<std::uint8_t> text{'n', 'o', 't', ' ', 'a', 'n', ' ', 'i', 'm', 'a', 'g', 'e'};
  try {
    decode_image(text);
    FAIL("expected unsupported-format");
  } catch (const Error& e) {
    CHECK(e.code() == "unsupported-format");
  }
  auto png = encode_png(fixtures::pattern_image(16, 16, 2));
  png.resize(40);
  CHECK_THROWS_AS(decode_image(png), Error);
}

TEST_CASE("bilinear resize keeps constants and shapes") {
  const Image flat(40, 30, 0.25f);
  const Image r = resize_bilinear(flat, 17, 9);
  CHECK(r.width == 17);
  CHECK(r.height == 9);
  for (float v : r.data) CHECK(v == doctest::Approx(0.25f));
  const Image same = resize_bilinear(fixtures::pattern_image(12, 12, 3), 12, 12);
  CHECK(same == fixtures::pattern_image(12, 12, 3));
}
