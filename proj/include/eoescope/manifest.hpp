#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "eoescope/taxonomy.hpp"

namespace eoescope {

enum class SourceType { Site, WebMined, EBook, Kvasir };
enum class Split { Train, Val, Test, Unassigned };
enum class ReviewStatus { Unreviewed, PrescreenPassed, PrescreenRejected, Accepted, Rejected };

inline constexpr std::array<SourceType, 4> kAllSources = {SourceType::Site, SourceType::WebMined,
                                                          SourceType::EBook, SourceType::Kvasir};
inline constexpr std::array<Split, 3> kAssignedSplits = {Split::Train, Split::Val, Split::Test};

std::string_view to_string(SourceType source);
std::string_view to_string(Split split);
std::string_view to_string(ReviewStatus status);
SourceType parse_source(std::string_view text);
Split parse_split(std::string_view text);
ReviewStatus parse_review_status(std::string_view text);

/// Site, public-dataset and e-book images arrive with trusted labels.
bool born_accepted(SourceType source);

/// Label rules that apply to records of a given source.
LabelRules label_rules_for(SourceType source);

struct ImageRecord {
  std::string id;
  SourceType source = SourceType::Site;
  std::string uri;
  std::string byte_hash;  // hex SHA-256 of the file bytes
  std::uint64_t phash = 0;
  std::optional<LabelVector> labels;  // nullopt = unlabeled
  Split split = Split::Unassigned;
  ReviewStatus review_status = ReviewStatus::Unreviewed;
  std::map<std::string, std::string> provenance;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// Train:val:test ratios plus the seed used for the assignment shuffle.
struct SplitSpec {
  std::array<double, 3> ratios{7.0, 1.0, 2.0};
  std::uint64_t seed = 0;

  /// Ratios scaled to sum to one; throws on non-positive entries.
  std::array<double, 3> normalized() const;

  static SplitSpec parse_ratios(std::string_view text, std::uint64_t seed);

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

/// Ordered, immutable collection of records with unique ids.
class DatasetManifest {
 public:
  DatasetManifest() = default;
  /// Throws Error{"manifest","duplicate-id"} naming the repeated id.
  explicit DatasetManifest(std::vector<ImageRecord> records,
                           std::optional<SplitSpec> split_spec = std::nullopt);

  std::span<const ImageRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::optional<SplitSpec>& split_spec() const { return split_spec_; }

  const ImageRecord* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  /// New manifest with `extra` appended (ids must stay unique).
  DatasetManifest with_appended(std::vector<ImageRecord> extra) const;
  /// New manifest with the record carrying `record.id` replaced.
  DatasetManifest with_replaced(const ImageRecord& record) const;
  DatasetManifest with_split_spec(SplitSpec spec) const;

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
    return a.records_ == b.records_ && a.split_spec_ == b.split_spec_;
  }

 private:
  std::vector<ImageRecord> records_;
  std::optional<SplitSpec> split_spec_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Returns `base` if unused in `manifest` (and `reserved`), else base-1, base-2, ...
std::string unique_record_id(const DatasetManifest& manifest, const std::string& base,
                             const std::vector<std::string>& reserved = {});

// Line-delimited JSON persistence: one header object, then one record per line.
DatasetManifest parse_manifest(std::string_view text);
std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

std::string phash_to_hex(std::uint64_t phash);
std::uint64_t phash_from_hex(std::string_view hex);

}  // namespace eoescope
