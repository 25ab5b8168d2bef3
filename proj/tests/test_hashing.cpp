#include <doctest.h>

#include "eoescope/hashing.hpp"
#include "eoescope/image.hpp"
#include "fixtures.hpp"

using namespace eoescope;

TEST_CASE("sha256 of a known string") {
  const std::string abc = "abc";
  const std::vector<std::uint8_t> bytes(abc.begin(), abc.end());
  CHECK(sha256_hex(bytes) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("difference hash of a block image") {
  // Frozen: block (r, c) = (37r + 101c) mod 256, bits computed from the block grid.
  fixtures::BlockGrid g{};
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 9; ++c) g[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = (r * 37 + c * 101) % 256;
  }
  const auto png = encode_png(fixtures::block_image(g));
  const std::uint64_t h = difference_hash(png);
  CHECK(phash_to_hex(h) == "dad6b5adad6b5ada");
  CHECK(std::popcount(h) == 39);
  CHECK(h == fixtures::grid_hash(g));
}

TEST_CASE("hamming distance") {
  CHECK(hamming_distance(0, 0) == 0);
  CHECK(hamming_distance(0, ~std::uint64_t{0}) == 64);
  CHECK(hamming_distance(0b1011, 0b0001) == 2);
}

TEST_CASE("walk images hash to their planted bits") {
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    const auto w = fixtures::random_walk_image(rng);
    CHECK(difference_hash(encode_png(fixtures::block_image(w.grid()))) == w.bits);
    const auto n = fixtures::near_duplicate(w, 1 + i % 5, rng);
    CHECK(hamming_distance(difference_hash(encode_png(fixtures::block_image(n.grid()))), w.bits) == 1 + i % 5);
  }
}

TEST_CASE("difference hash survives mild rescaling") {
  const Image img = fixtures::pattern_image(200, 160, 4);
  const auto a = difference_hash(encode_png(img));
  const auto b = difference_hash(encode_png(resize_bilinear(img, 150, 120)));
  CHECK(hamming_distance(a, b) <= 5);
}
