#include "eoescope/taxonomy.hpp"

#include "eoescope/error.hpp"

namespace eoescope {

namespace {

constexpr std::array<std::string_view, kNumClasses> kNames = {
    "normal",      "edema",  "rings",    "exudates", "furrows",           "stricture",
    "esophagitis", "z-line", "barretts", "pylorus",  "retroflex-stomach",
};

constexpr std::size_t kFirstNonEoE = index_of(ClassId::Esophagitis);

}  // namespace

const std::array<std::string_view, kNumClasses>& class_names() { return kNames; }

std::string_view class_name(ClassId id) { return kNames[index_of(id)]; }

std::optional<ClassId> class_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (kNames[i] == name) return static_cast<ClassId>(i);
  }
  return std::nullopt;
}

ClassGroup class_group(ClassId id) {
  return index_of(id) < kFirstNonEoE ? ClassGroup::EoE : ClassGroup::NonEoE;
}

std::string_view group_name(ClassGroup group) {
  return group == ClassGroup::EoE ? "eoe" : "non-eoe";
}

bool is_erefs_feature(ClassId id) {
  return class_group(id) == ClassGroup::EoE && id != ClassId::Normal;
}

LabelVector LabelVector::from_array(const std::array<int, kNumClasses>& values) {
  LabelVector v;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (values[i] != 0 && values[i] != 1) {
      throw Error("taxonomy", "non-binary", "label entries must be 0 or 1");
    }
    v.set(i, values[i] == 1);
  }
  return v;
}

std::array<int, kNumClasses> LabelVector::to_array() const {
  std::array<int, kNumClasses> out{};
  for (std::size_t i = 0; i < kNumClasses; ++i) out[i] = bits_.test(i) ? 1 : 0;
  return out;
}

bool LabelVector::any_in(ClassGroup group) const {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (bits_.test(i) && class_group(static_cast<ClassId>(i)) == group) return true;
  }
  return false;
}

bool LabelVector::eoe_positive() const {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (bits_.test(i) && is_erefs_feature(static_cast<ClassId>(i))) return true;
  }
  return false;
}

bool LabelVector::non_eoe_positive() const { return any_in(ClassGroup::NonEoE); }

std::optional<std::string> LabelVector::violation(LabelRules rules) const {
  if (bits_.none()) return "empty";
  const bool eoe = any_in(ClassGroup::EoE);
  const bool non_eoe = any_in(ClassGroup::NonEoE);
  if (eoe && non_eoe) return "cross-group";
  if (test(ClassId::Normal) && count() > 1) return "normal-with-feature";
  if (non_eoe && count() > 1 && rules == LabelRules::Strict) return "multiple-non-eoe";
  return std::nullopt;
}

LabelVector encode_labels(const std::vector<std::string>& names, LabelRules rules) {
  if (names.empty()) throw Error("taxonomy", "empty", "label set is empty");
  LabelVector v;
  for (const auto& name : names) {
    auto id = class_from_name(name);
    if (!id) throw Error("taxonomy", "unknown-class", "unknown class name '" + name + "'");
    v.set(*id);
  }
  if (auto why = v.violation(rules)) {
    std::string joined;
    for (const auto& n : names) joined += (joined.empty() ? "" : ",") + n;
    throw Error("taxonomy", *why, "invalid label set {" + joined + "}: " + *why);
  }
  return v;
}

std::vector<std::string> decode_labels(const LabelVector& labels) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (labels.test(i)) out.emplace_back(kNames[i]);
  }
  return out;
}

}  // namespace eoescope
