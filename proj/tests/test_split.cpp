#include <doctest.h>

#include "eoescope/error.hpp"
#include "eoescope/split.hpp"
#include "fixtures.hpp"

using namespace eoescope;
using fixtures::make_record;

TEST_CASE("largest remainder apportionment") {
  // Frozen from an exact rational computation.
  using V = std::vector<std::size_t>;
  const std::vector<double> w{0.7, 0.1, 0.2};
  CHECK(largest_remainder(1, w) == V{1, 0, 0});
  CHECK(largest_remainder(2, w) == V{2, 0, 0});
  CHECK(largest_remainder(3, w) == V{2, 0, 1});
  CHECK(largest_remainder(5, w) == V{4, 0, 1});
  CHECK(largest_remainder(10, w) == V{7, 1, 2});
  CHECK(largest_remainder(11, w) == V{8, 1, 2});
  CHECK(largest_remainder(14, w) == V{10, 1, 3});
  CHECK(largest_remainder(644, w) == V{451, 64, 129});
  CHECK(largest_remainder(6406, w) == V{4484, 641, 1281});
  CHECK(largest_remainder(3, {0.0, 0.1, 0.2}) == V{0, 1, 2});
  CHECK(largest_remainder(5, {0.0, 0.1, 0.2}) == V{0, 2, 3});
  CHECK(largest_remainder(0, w) == V{0, 0, 0});
}

TEST_CASE("e-book records never land in train") {
  std::vector<ImageRecord> rs;
  for (int i = 0; i < 30; ++i) rs.push_back(make_record("e" + std::to_string(i), SourceType::EBook, {"rings"}));
  const auto out = assign_splits(DatasetManifest(rs), SplitSpec{{7, 1, 2}, 1});
  std::size_t val = 0, test = 0;
  for (const auto& r : out.manifest.records()) {
    CHECK(r.split != Split::Train);
    val += r.split == Split::Val;
    test += r.split == Split::Test;
  }
  CHECK(val == 10);
  CHECK(test == 20);
  CHECK_FALSE(out.notes.empty());
}

TEST_CASE("non-accepted records stay unassigned, unlabeled accepted records throw") {
  const DatasetManifest m({make_record("w", SourceType::WebMined, {}, ReviewStatus::PrescreenPassed, Split::Train),
                           make_record("s", SourceType::Site, {"normal"})});
  const auto out = assign_splits(m, SplitSpec{{7, 1, 2}, 0});
  CHECK(out.manifest.find("w")->split == Split::Unassigned);
  CHECK(out.manifest.find("s")->split != Split::Unassigned);

  auto bad = make_record("x", SourceType::Site, {});
  CHECK_THROWS_AS(assign_splits(DatasetManifest({bad}), SplitSpec{}), Error);
}

TEST_CASE("seed determinism and seed sensitivity") {
  Rng rng(5);
  const auto m = fixtures::random_manifest(rng, 300);
  const auto a = assign_splits(m, SplitSpec{{7, 1, 2}, 11}).manifest;
  const auto b = assign_splits(m, SplitSpec{{7, 1, 2}, 11}).manifest;
  const auto c = assign_splits(m, SplitSpec{{7, 1, 2}, 12}).manifest;
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.split_spec()->seed == 11);
}
