#include "eoescope/review.hpp"

#include <fstream>
#include <unistd.h>

#include <json.hpp>

#include "eoescope/error.hpp"
#include "eoescope/ingestion.hpp"

namespace eoescope {

namespace {

[[noreturn]] void fail(const std::string& code, const std::string& message) {
  throw Error("review", code, message);
}

}  // namespace

std::string_view to_string(Decision decision) { return decision == Decision::Accept ? "accept" : "reject"; }

Decision parse_decision(std::string_view text) {
  if (text == "accept") return Decision::Accept;
  if (text == "reject") return Decision::Reject;
  fail("invalid-verdict", "decision must be 'accept' or 'reject', got '" + std::string(text) + "'");
}

std::string verdict_to_json(const ReviewVerdict& v) {
  nlohmann::json j = {{"schema_version", kVerdictSchemaVersion},
                      {"record_id", v.record_id},
                      {"decision", to_string(v.decision)},
                      {"reviewer", v.reviewer},
                      {"timestamp", v.timestamp}};
  j["labels"] = v.labels ? nlohmann::json(decode_labels(*v.labels)) : nlohmann::json(nullptr);
  return j.dump();
}

ReviewVerdict verdict_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    fail("invalid-verdict", "verdict is not valid JSON");
  }
  if (!j.is_object()) fail("invalid-verdict", "verdict must be an object");
  ReviewVerdict v;
  try {
    v.record_id = j.at("record_id").get<std::string>();
    v.decision = parse_decision(j.at("decision").get<std::string>());
    v.reviewer = j.value("reviewer", "");
    v.timestamp = j.value("timestamp", "");
  } catch (const nlohmann::json::exception& e) {
    fail("invalid-verdict", std::string("malformed verdict: ") + e.what());
  }
  if (j.contains("labels") && !j["labels"].is_null()) {
    if (!j["labels"].is_array()) fail("invalid-verdict", "labels must be an array of class names");
    LabelVector l;
    for (const auto& name : j["labels"]) {
      if (!name.is_string()) fail("invalid-verdict", "labels must be an array of class names");
      const auto id = class_from_name(name.get<std::string>());
      if (!id) fail("invalid-labels", "unknown class '" + name.get<std::string>() + "'");
      l.set(*id);
    }
    v.labels = l;
  }
  return v;
}

bool is_reviewable(const ImageRecord& r) {
  return r.source == SourceType::WebMined &&
         (r.review_status == ReviewStatus::PrescreenPassed || r.review_status == ReviewStatus::Accepted ||
          r.review_status == ReviewStatus::Rejected);
}

ImageRecord apply_verdict(const DatasetManifest& manifest, const ReviewVerdict& v) {
  const ImageRecord* found = manifest.find(v.record_id);
  if (!found) fail("unknown-record", "no record '" + v.record_id + "'");
  if (!is_reviewable(*found)) {
    fail("not-reviewable", "record '" + v.record_id + "' is " + std::string(to_string(found->review_status)) +
                               " (" + std::string(to_string(found->source)) + ")");
  }
  ImageRecord r = *found;
  if (v.decision == Decision::Accept) {
    if (!v.labels) fail("invalid-labels", "accept requires labels");
    if (auto why = v.labels->violation(label_rules_for(r.source))) {
      fail("invalid-labels", "labels violate taxonomy rules: " + std::string(*why));
    }
    r.review_status = ReviewStatus::Accepted;
    r.labels = v.labels;
  } else {
    r.review_status = ReviewStatus::Rejected;
    r.labels.reset();
  }
  r.split = Split::Unassigned;
  r.provenance["reviewer"] = v.reviewer;
  r.provenance["reviewed_at"] = v.timestamp;
  return r;
}

DatasetManifest replay(const DatasetManifest& base, std::span<const ReviewVerdict> log) {
  DatasetManifest state = base;
  for (const auto& v : log) state = state.with_replaced(apply_verdict(state, v));
  return state;
}

std::vector<ReviewVerdict> read_verdict_log(const std::filesystem::path& path) {
  std::vector<ReviewVerdict> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(verdict_from_json(line));
    } catch (const Error& e) {
      fail("corrupt-log", path.string() + " line " + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

ReviewStore::ReviewStore(DatasetManifest base, std::filesystem::path log_path)
    : base_(std::move(base)), log_path_(std::move(log_path)) {
  log_ = read_verdict_log(log_path_);
  current_ = replay(base_, log_);
  if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
  log_file_ = std::fopen(log_path_.c_str(), "a");
  if (!log_file_) fail("io", "cannot open verdict log " + log_path_.string());
}

ReviewStore::~ReviewStore() {
  if (log_file_) std::fclose(log_file_);
}

SubmitOutcome ReviewStore::submit(ReviewVerdict verdict) {
  std::lock_guard write_lock(write_mutex_);
  if (verdict.timestamp.empty()) verdict.timestamp = iso8601_utc(SystemClock().now());
  DatasetManifest snapshot;
  {
    std::shared_lock read(state_mutex_);
    snapshot = current_;
  }
  ImageRecord updated = apply_verdict(snapshot, verdict);

  SubmitOutcome outcome;
  const ReviewVerdict* latest = nullptr;
  for (const auto& v : log_) {
    if (v.record_id == verdict.record_id) latest = &v;
  }
  outcome.superseded = latest != nullptr;
  if (latest && latest->reviewer == verdict.reviewer && latest->decision == verdict.decision &&
      latest->labels == verdict.labels) {
    outcome.unchanged = true;
    outcome.superseded = false;
    outcome.record = *snapshot.find(verdict.record_id);
    return outcome;
  }

  const std::string line = verdict_to_json(verdict) + "\n";
  if (std::fwrite(line.data(), 1, line.size(), log_file_) != line.size() || std::fflush(log_file_) != 0 ||
      ::fsync(fileno(log_file_)) != 0) {
    fail("io", "cannot append to verdict log " + log_path_.string());
  }
  {
    std::unique_lock write(state_mutex_);
    log_.push_back(verdict);
    current_ = current_.with_replaced(updated);
  }
  outcome.record = std::move(updated);
  return outcome;
}

DatasetManifest ReviewStore::current() const {
  std::shared_lock lock(state_mutex_);
  return current_;
}

std::vector<ReviewVerdict> ReviewStore::log() const {
  std::shared_lock lock(state_mutex_);
  return log_;
}

std::vector<ImageRecord> ReviewStore::queue(std::size_t limit) const {
  std::shared_lock lock(state_mutex_);
  std::vector<ImageRecord> out;
  for (const auto& r : current_.records()) {
    if (out.size() >= limit) break;
    if (r.review_status == ReviewStatus::PrescreenPassed) out.push_back(r);
  }
  return out;
}

std::optional<ImageRecord> ReviewStore::find(const std::string& id) const {
  std::shared_lock lock(state_mutex_);
  if (const auto* r = current_.find(id)) return *r;
  return std::nullopt;
}

ReviewMetrics ReviewStore::metrics() const {
  std::shared_lock lock(state_mutex_);
  ReviewMetrics m;
  for (const auto& r : current_.records()) {
    m.queue += r.review_status == ReviewStatus::PrescreenPassed;
    m.accepted += r.review_status == ReviewStatus::Accepted;
    m.rejected += r.review_status == ReviewStatus::Rejected;
  }
  m.verdicts = log_.size();
  return m;
}

}  // namespace eoescope
