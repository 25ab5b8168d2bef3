#include "eoescope/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "eoescope/error.hpp"

namespace eoescope {

using nlohmann::json;

namespace {

constexpr std::string_view kFormat = "eoescope-manifest";
constexpr int kFormatVersion = 1;

[[noreturn]] void fail(const std::string& code, const std::string& message) {
  throw Error("manifest", code, message);
}

}  // namespace

std::string_view to_string(SourceType source) {
  switch (source) {
    case SourceType::Site: return "site";
    case SourceType::WebMined: return "web-mined";
    case SourceType::EBook: return "e-book";
    case SourceType::Kvasir: return "kvasir";
  }
  return "?";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unassigned: return "unassigned";
  }
  return "?";
}

std::string_view to_string(ReviewStatus status) {
  switch (status) {
    case ReviewStatus::Unreviewed: return "unreviewed";
    case ReviewStatus::PrescreenPassed: return "prescreen-passed";
    case ReviewStatus::PrescreenRejected: return "prescreen-rejected";
    case ReviewStatus::Accepted: return "accepted";
    case ReviewStatus::Rejected: return "rejected";
  }
  return "?";
}

SourceType parse_source(std::string_view text) {
  for (auto s : kAllSources) {
    if (to_string(s) == text) return s;
  }
  fail("unknown-source", "unknown source '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  for (auto s : {Split::Train, Split::Val, Split::Test, Split::Unassigned}) {
    if (to_string(s) == text) return s;
  }
  fail("unknown-split", "unknown split '" + std::string(text) + "'");
}

ReviewStatus parse_review_status(std::string_view text) {
  for (auto s : {ReviewStatus::Unreviewed, ReviewStatus::PrescreenPassed,
                 ReviewStatus::PrescreenRejected, ReviewStatus::Accepted, ReviewStatus::Rejected}) {
    if (to_string(s) == text) return s;
  }
  fail("unknown-review-status", "unknown review status '" + std::string(text) + "'");
}

bool born_accepted(SourceType source) { return source != SourceType::WebMined; }

LabelRules label_rules_for(SourceType source) {
  return source == SourceType::Kvasir ? LabelRules::PublicImport : LabelRules::Strict;
}

std::array<double, 3> SplitSpec::normalized() const {
  double total = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) fail("bad-ratios", "split ratios must be positive");
    total += r;
  }
  return {ratios[0] / total, ratios[1] / total, ratios[2] / total};
}

SplitSpec SplitSpec::parse_ratios(std::string_view text, std::uint64_t seed) {
  SplitSpec spec;
  spec.seed = seed;
  std::size_t part = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(':', start);
    if (end == std::string_view::npos) end = text.size();
    if (part >= 3) fail("bad-ratios", "expected three ratios in '" + std::string(text) + "'");
    std::string token(text.substr(start, end - start));
    try {
      std::size_t used = 0;
      spec.ratios[part] = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      fail("bad-ratios", "cannot parse ratio '" + token + "'");
    }
    ++part;
    start = end + 1;
  }
  if (part != 3) fail("bad-ratios", "expected three ratios in '" + std::string(text) + "'");
  spec.normalized();
  return spec;
}

DatasetManifest::DatasetManifest(std::vector<ImageRecord> records,
                                 std::optional<SplitSpec> split_spec)
    : records_(std::move(records)), split_spec_(std::move(split_spec)) {
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].id.empty()) fail("empty-id", "record at position " + std::to_string(i) + " has no id");
    if (!index_.emplace(records_[i].id, i).second) {
      fail("duplicate-id", "duplicate record id '" + records_[i].id + "'");
    }
  }
}

const ImageRecord* DatasetManifest::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &records_[it->second];
}

DatasetManifest DatasetManifest::with_appended(std::vector<ImageRecord> extra) const {
  std::vector<ImageRecord> all = records_;
  all.insert(all.end(), std::make_move_iterator(extra.begin()), std::make_move_iterator(extra.end()));
  return DatasetManifest(std::move(all), split_spec_);
}

DatasetManifest DatasetManifest::with_replaced(const ImageRecord& record) const {
  auto it = index_.find(record.id);
  if (it == index_.end()) fail("unknown-id", "no record with id '" + record.id + "'");
  std::vector<ImageRecord> all = records_;
  all[it->second] = record;
  return DatasetManifest(std::move(all), split_spec_);
}

DatasetManifest DatasetManifest::with_split_spec(SplitSpec spec) const {
  return DatasetManifest(records_, spec);
}

std::string unique_record_id(const DatasetManifest& manifest, const std::string& base,
                             const std::vector<std::string>& reserved) {
  auto taken = [&](const std::string& id) {
    return manifest.contains(id) || std::find(reserved.begin(), reserved.end(), id) != reserved.end();
  };
  if (!taken(base)) return base;
  for (std::size_t n = 1;; ++n) {
    std::string candidate = base + "-" + std::to_string(n);
    if (!taken(candidate)) return candidate;
  }
}

std::string phash_to_hex(std::uint64_t phash) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[phash & 0xF];
    phash >>= 4;
  }
  return out;
}

std::uint64_t phash_from_hex(std::string_view hex) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(hex.data(), hex.data() + hex.size(), value, 16);
  if (ec != std::errc() || ptr != hex.data() + hex.size() || hex.empty() || hex.size() > 16) {
    fail("bad-phash", "malformed perceptual hash '" + std::string(hex) + "'");
  }
  return value;
}

namespace {

json record_to_json(const ImageRecord& r) {
  json j;
  j["id"] = r.id;
  j["source"] = to_string(r.source);
  j["uri"] = r.uri;
  j["byte_hash"] = r.byte_hash;
  j["phash"] = phash_to_hex(r.phash);
  j["labels"] = r.labels ? json(decode_labels(*r.labels)) : json(nullptr);
  j["split"] = to_string(r.split);
  j["review_status"] = to_string(r.review_status);
  j["provenance"] = r.provenance;
  return j;
}

ImageRecord record_from_json(const json& j) {
  ImageRecord r;
  r.id = j.at("id").get<std::string>();
  r.source = parse_source(j.at("source").get<std::string>());
  r.uri = j.at("uri").get<std::string>();
  r.byte_hash = j.at("byte_hash").get<std::string>();
  r.phash = phash_from_hex(j.at("phash").get<std::string>());
  const auto& labels = j.at("labels");
  if (!labels.is_null()) {
    auto names = labels.get<std::vector<std::string>>();
    if (!names.empty()) {
      LabelVector v;
      for (const auto& name : names) {
        auto id = class_from_name(name);
        if (!id) fail("unknown-class", "record '" + r.id + "': unknown class '" + name + "'");
        v.set(*id);
      }
      r.labels = v;
    }
  }
  r.split = parse_split(j.at("split").get<std::string>());
  r.review_status = parse_review_status(j.at("review_status").get<std::string>());
  if (j.contains("provenance")) r.provenance = j.at("provenance").get<std::map<std::string, std::string>>();
  return r;
}

}  // namespace

std::string serialize_manifest(const DatasetManifest& manifest) {
  json header;
  header["type"] = "header";
  header["format"] = kFormat;
  header["format_version"] = kFormatVersion;
  header["taxonomy"] = {{"version", kTaxonomyVersion}, {"classes", class_names()}};
  if (const auto& spec = manifest.split_spec()) {
    header["split_spec"] = {{"ratios", spec->ratios}, {"seed", spec->seed}};
  } else {
    header["split_spec"] = nullptr;
  }
  std::string out = header.dump() + "\n";
  for (const auto& r : manifest.records()) out += record_to_json(r).dump() + "\n";
  return out;
}

DatasetManifest parse_manifest(std::string_view text) {
  std::vector<ImageRecord> records;
  std::optional<SplitSpec> spec;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail("parse-error", "line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        if (j.value("type", "") != "header" || j.value("format", "") != kFormat) {
          fail("parse-error", "line " + std::to_string(line_no) + ": missing manifest header");
        }
        const auto& tax = j.at("taxonomy");
        if (tax.at("classes").get<std::vector<std::string>>().size() != kNumClasses ||
            tax.at("version").get<std::string>() != kTaxonomyVersion) {
          fail("taxonomy-mismatch", "line " + std::to_string(line_no) + ": taxonomy does not match " +
                                        std::string(kTaxonomyVersion));
        }
        if (!j.at("split_spec").is_null()) {
          SplitSpec s;
          s.ratios = j["split_spec"].at("ratios").get<std::array<double, 3>>();
          s.seed = j["split_spec"].at("seed").get<std::uint64_t>();
          spec = s;
        }
        have_header = true;
        continue;
      }
      records.push_back(record_from_json(j));
    } catch (const Error& e) {
      if (e.code() == "parse-error" || e.code() == "taxonomy-mismatch") throw;
      throw Error("manifest", e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      fail("parse-error", "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) fail("parse-error", "line 1: missing manifest header");
  return DatasetManifest(std::move(records), spec);
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open manifest " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_manifest(buffer.str());
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("io", "cannot write manifest " + path.string());
    out << serialize_manifest(manifest);
    if (!out) fail("io", "write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace eoescope
