#pragma once

#include <cstdio>
#include <filesystem>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "eoescope/manifest.hpp"

namespace eoescope {

enum class Decision { Accept, Reject };

std::string_view to_string(Decision decision);
Decision parse_decision(std::string_view text);

struct ReviewVerdict {
  std::string record_id;
  Decision decision = Decision::Accept;
  std::optional<LabelVector> labels;  // required for accept
  std::string reviewer;
  std::string timestamp;

  friend bool operator==(const ReviewVerdict&, const ReviewVerdict&) = default;
};

inline constexpr int kVerdictSchemaVersion = 1;

std::string verdict_to_json(const ReviewVerdict& verdict);
/// Throws Error{"review","invalid-verdict"} for malformed payloads and
/// Error{"review","invalid-labels"} for unknown class names.
ReviewVerdict verdict_from_json(std::string_view text);

/// Web-mined records that passed prescreening, or were already reviewed.
bool is_reviewable(const ImageRecord& record);

/// Checks a verdict against the manifest and returns the updated record.
/// Errors: unknown-record, not-reviewable, invalid-labels.
ImageRecord apply_verdict(const DatasetManifest& manifest, const ReviewVerdict& verdict);

/// Current state = base manifest with every verdict applied in order.
DatasetManifest replay(const DatasetManifest& base, std::span<const ReviewVerdict> log);

std::vector<ReviewVerdict> read_verdict_log(const std::filesystem::path& path);

struct ReviewMetrics {
  std::size_t queue = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t verdicts = 0;
};

struct SubmitOutcome {
  ImageRecord record;
  bool superseded = false;  // an earlier verdict for this record existed
  bool unchanged = false;   // identical to the record's latest verdict; nothing appended
};

/// Base manifest plus an append-only verdict log. Writes are serialized and
/// flushed to disk (fsync) before the state changes.
class ReviewStore {
 public:
  ReviewStore(DatasetManifest base, std::filesystem::path log_path);
  ~ReviewStore();
  ReviewStore(const ReviewStore&) = delete;
  ReviewStore& operator=(const ReviewStore&) = delete;

  SubmitOutcome submit(ReviewVerdict verdict);

  DatasetManifest current() const;
  const DatasetManifest& base() const { return base_; }
  std::vector<ReviewVerdict> log() const;
  /// Prescreen-passed records in manifest order, at most `limit`.
  std::vector<ImageRecord> queue(std::size_t limit) const;
  std::optional<ImageRecord> find(const std::string& id) const;
  ReviewMetrics metrics() const;

 private:
  DatasetManifest base_;
  DatasetManifest current_;
  std::vector<ReviewVerdict> log_;
  std::filesystem::path log_path_;
  std::FILE* log_file_ = nullptr;
  mutable std::shared_mutex state_mutex_;
  std::mutex write_mutex_;
};

}  // namespace eoescope
