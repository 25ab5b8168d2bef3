#include <doctest.h>

#include "eoescope/error.hpp"
#include "eoescope/taxonomy.hpp"

using namespace eoescope;

TEST_CASE("class order and groups are fixed") {
  const auto& names = class_names();
  REQUIRE(names.size() == 11);
  CHECK(names[0] == "normal");
  CHECK(names[5] == "stricture");
  CHECK(names[6] == "esophagitis");
  CHECK(names[10] == "retroflex-stomach");
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const auto id = static_cast<ClassId>(k);
    CHECK(class_group(id) == (k <= 5 ? ClassGroup::EoE : ClassGroup::NonEoE));
    CHECK(class_from_name(names[k]) == id);
  }
  CHECK_FALSE(class_from_name("polyp"));
  CHECK_FALSE(is_erefs_feature(ClassId::Normal));
  CHECK(is_erefs_feature(ClassId::Stricture));
}

TEST_CASE("encode and decode labels") {
  const auto v = encode_labels({"rings", "furrows"});
  CHECK(v.to_array() == std::array<int, 11>{0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0});
  CHECK(decode_labels(v) == std::vector<std::string>{"rings", "furrows"});
  CHECK(encode_labels({"pylorus"}).to_array() == std::array<int, 11>{0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0});
}

TEST_CASE("label rule violations") {
  auto code_of = [](std::vector<std::string> names, LabelRules rules = LabelRules::Strict) {
    try {
      encode_labels(names, rules);
    } catch (const Error& e) {
      CHECK(e.module() == "taxonomy");
      return e.code();
    }
    return std::string("ok");
  };
  CHECK(code_of({"normal", "edema"}) == "normal-with-feature");
  CHECK(code_of({"edema", "pylorus"}) == "cross-group");
  CHECK(code_of({}) == "empty");
  CHECK(code_of({"polyp"}) == "unknown-class");
  CHECK(code_of({"pylorus", "z-line"}) == "multiple-non-eoe");
  CHECK(code_of({"pylorus", "z-line"}, LabelRules::PublicImport) == "ok");
  CHECK(code_of({"edema", "rings", "exudates", "furrows", "stricture"}) == "ok");
}

TEST_CASE("binary reductions") {
  CHECK(encode_labels({"furrows"}).eoe_positive());
  CHECK_FALSE(encode_labels({"normal"}).eoe_positive());
  CHECK_FALSE(encode_labels({"normal"}).non_eoe_positive());
  CHECK(encode_labels({"barretts"}).non_eoe_positive());
  CHECK(LabelVector{}.violation() == "empty");
}
