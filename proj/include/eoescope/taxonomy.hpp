#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace eoescope {

inline constexpr std::size_t kNumClasses = 11;
inline constexpr std::string_view kTaxonomyVersion = "eoe-upper-gi-11/v1";

enum class ClassId : std::size_t {
  Normal = 0,
  Edema,
  Rings,
  Exudates,
  Furrows,
  Stricture,
  Esophagitis,
  ZLine,
  Barretts,
  Pylorus,
  RetroflexStomach,
};

enum class ClassGroup { EoE, NonEoE };

/// Fixed class order shared by manifests, the model head and reports.
const std::array<std::string_view, kNumClasses>& class_names();

std::string_view class_name(ClassId id);
std::optional<ClassId> class_from_name(std::string_view name);
ClassGroup class_group(ClassId id);
std::string_view group_name(ClassGroup group);

inline constexpr std::size_t index_of(ClassId id) { return static_cast<std::size_t>(id); }

/// The five EREFS features (edema through stricture).
bool is_erefs_feature(ClassId id);

/// Which combinations a label vector may carry.
///
/// `Strict` is the clinician-entry rule set: one group only, `normal` alone,
/// and a single non-EoE finding. `PublicImport` additionally allows several
/// non-EoE findings on one image, which the published upper-GI counts require.
enum class LabelRules { Strict, PublicImport };

/// Binary presence vector over the fixed taxonomy. Construction does not
/// enforce the taxonomy rules; predictions may legitimately be all-zero.
class LabelVector {
 public:
  LabelVector() = default;
  explicit LabelVector(std::bitset<kNumClasses> bits) : bits_(bits) {}

  static LabelVector from_array(const std::array<int, kNumClasses>& values);

  bool test(ClassId id) const { return bits_.test(index_of(id)); }
  bool test(std::size_t index) const { return bits_.test(index); }
  void set(ClassId id, bool value = true) { bits_.set(index_of(id), value); }
  void set(std::size_t index, bool value = true) { bits_.set(index, value); }

  std::size_t count() const { return bits_.count(); }
  bool none() const { return bits_.none(); }
  const std::bitset<kNumClasses>& bits() const { return bits_; }
  std::array<int, kNumClasses> to_array() const;

  /// Empty when the vector satisfies `rules`, otherwise the violated rule
  /// ("empty", "cross-group", "normal-with-feature", "multiple-non-eoe").
  std::optional<std::string> violation(LabelRules rules = LabelRules::Strict) const;
  bool is_valid(LabelRules rules = LabelRules::Strict) const { return !violation(rules); }

  bool any_in(ClassGroup group) const;
  bool eoe_positive() const;      // any EREFS feature
  bool non_eoe_positive() const;  // any non-EoE finding

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  std::bitset<kNumClasses> bits_;
};

/// Encodes class names into a validated label vector; throws
/// Error{"taxonomy", code} with code one of unknown-class, empty, cross-group,
/// normal-with-feature, multiple-non-eoe.
LabelVector encode_labels(const std::vector<std::string>& names,
                          LabelRules rules = LabelRules::Strict);

/// Names of the set bits in taxonomy order.
std::vector<std::string> decode_labels(const LabelVector& labels);

}  // namespace eoescope
