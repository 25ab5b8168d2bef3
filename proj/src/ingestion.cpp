#include "eoescope/ingestion.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <regex>
#include <set>
#include <thread>
#include <unordered_map>

#include <yaml-cpp/yaml.h>

#include <json.hpp>

#include "eoescope/error.hpp"
#include "eoescope/hashing.hpp"
#include "eoescope/image.hpp"

namespace eoescope {

namespace {

[[noreturn]] void fail(const std::string& code, const std::string& message) {
  throw Error("ingestion", code, message);
}

}  // namespace

std::string_view to_string(SourceKind kind) {
  switch (kind) {
    case SourceKind::SearchEngine: return "search-engine";
    case SourceKind::OpenAccessApi: return "open-access-api";
    case SourceKind::EbookDocument: return "ebook-document";
    case SourceKind::DatasetImport: return "dataset-import";
  }
  return "?";
}

SourceKind parse_source_kind(std::string_view text) {
  for (auto k : {SourceKind::SearchEngine, SourceKind::OpenAccessApi, SourceKind::EbookDocument,
                 SourceKind::DatasetImport}) {
    if (to_string(k) == text) return k;
  }
  fail("unknown-source-kind", "unknown source kind '" + std::string(text) + "'");
}

std::vector<CaptionPattern> default_caption_patterns() {
  return {
      {R"(\bnormal\b)", ClassId::Normal},
      {R"(\b(o?edema|edematous)\b)", ClassId::Edema},
      {R"(\b(rings?|trachealization)\b)", ClassId::Rings},
      {R"(\b(exudates?|white plaques?)\b)", ClassId::Exudates},
      {R"(\bfurrow(s|ing)?\b)", ClassId::Furrows},
      {R"(\bstrictures?\b)", ClassId::Stricture},
  };
}

void FetchQuery::validate() const {
  if (max_results < 1) fail("bad-query", "max results must be at least 1");
  if (!(rate_limit > 0.0)) fail("bad-query", "rate limit must be positive");
  if (parallelism < 1) fail("bad-query", "parallelism must be at least 1");
}

double SystemClock::now() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

void SystemClock::sleep_until(double t) {
  const double wait = t - now();
  if (wait > 0) std::this_thread::sleep_for(std::chrono::duration<double>(wait));
}

double ManualClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void ManualClock::sleep_until(double t) {
  std::lock_guard lock(mu_);
  now_ = std::max(now_, t);
}

void ManualClock::advance(double seconds) {
  std::lock_guard lock(mu_);
  now_ += seconds;
}

RateLimiter::RateLimiter(double rate, Clock& clock) : interval_(1.0 / rate), clock_(clock) {
  if (!(rate > 0.0)) fail("bad-query", "rate limit must be positive");
}

double RateLimiter::acquire() {
  double slot;
  {
    std::lock_guard lock(mu_);
    const double now = clock_.now();
    slot = next_free_ < 0 ? now : std::max(now, next_free_);
    next_free_ = slot + interval_;
  }
  clock_.sleep_until(slot);
  return slot;
}

std::string iso8601_utc(double epoch_seconds) {
  const auto whole = static_cast<std::time_t>(std::floor(epoch_seconds));
  const int millis = static_cast<int>(std::lround((epoch_seconds - std::floor(epoch_seconds)) * 1000.0)) % 1000;
  std::tm tm{};
  gmtime_r(&whole, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, millis);
  return buf;
}

FetchResult fetch(const FetchQuery& query, SourceClient& client, Clock& clock) {
  query.validate();
  RateLimiter limiter(query.rate_limit, clock);
  limiter.acquire();
  std::vector<std::string> locators = client.search(query.text, query.max_results);
  if (locators.size() > query.max_results) locators.resize(query.max_results);

  const std::size_t n = locators.size();
  std::vector<std::optional<CandidateImage>> slots(n);
  std::vector<std::string> errors(n);
  std::vector<char> transport_failed(n, 0);
  std::atomic<std::size_t> next{0};
  std::exception_ptr auth_failure;
  std::mutex auth_mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      {
        std::lock_guard lock(auth_mu);
        if (auth_failure) return;
      }
      const double granted = limiter.acquire();
      try {
        Download d = client.download(locators[i]);
        if (!sniff_format(d.bytes)) {
          errors[i] = "skipped " + locators[i] + ": unsupported or corrupt payload";
          continue;
        }
        try {
          (void)decode_image(d.bytes);
        } catch (const Error& e) {
          errors[i] = "skipped " + locators[i] + ": " + e.what();
          continue;
        }
        CandidateImage c;
        c.bytes = std::move(d.bytes);
        c.content_type = std::move(d.content_type);
        c.locator = locators[i];
        c.query = query.text;
        c.kind = query.kind;
        c.fetched_at = iso8601_utc(granted);
        slots[i] = std::move(c);
      } catch (const Error& e) {
        if (e.code() == "auth-failed") {
          std::lock_guard lock(auth_mu);
          if (!auth_failure) auth_failure = std::current_exception();
          return;
        }
        errors[i] = "failed " + locators[i] + ": " + e.what();
        transport_failed[i] = 1;
      } catch (const std::exception& e) {
        errors[i] = "failed " + locators[i] + ": " + e.what();
        transport_failed[i] = 1;
      }
    }
  };

  const std::size_t workers = std::min(query.parallelism, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (auth_failure) std::rethrow_exception(auth_failure);

  FetchResult result;
  std::size_t failed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) {
      result.candidates.push_back(std::move(*slots[i]));
    } else {
      result.warnings.push_back(errors[i]);
      ++result.skipped;
      failed += transport_failed[i];
    }
  }
  if (n > 0 && failed == n) fail("all-downloads-failed", "every download for '" + query.text + "' failed");
  std::stable_sort(result.candidates.begin(), result.candidates.end(),
                   [](const CandidateImage& a, const CandidateImage& b) { return a.locator < b.locator; });
  return result;
}

// -- e-book ----------------------------------------------------------------

BundleDocument::BundleDocument(std::filesystem::path bundle) : locus_(bundle.string()) {
  nlohmann::json j;
  try {
    auto bytes = read_file(bundle);
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
    const auto base = bundle.parent_path();
    for (const auto& page : j.at("pages")) {
      DocumentPage p;
      for (const auto& img : page.value("images", nlohmann::json::array())) {
        EmbeddedImage e;
        e.name = img.at("file").get<std::string>();
        e.y = img.value("y", 0.0);
        e.bytes = read_file(base / e.name);
        p.images.push_back(std::move(e));
      }
      for (const auto& cap : page.value("captions", nlohmann::json::array())) {
        p.captions.push_back({cap.at("text").get<std::string>(), cap.value("y", 0.0)});
      }
      pages_.push_back(std::move(p));
    }
  } catch (const std::exception& e) {
    fail("document-unreadable", "cannot read document " + locus_ + ": " + e.what());
  }
}

DocumentPage BundleDocument::page(std::size_t index) const {
  if (index >= pages_.size()) fail("bad-page", "page index out of range");
  return pages_[index];
}

LabelVector match_caption(const std::string& text, const std::vector<CaptionPattern>& patterns) {
  LabelVector v;
  for (const auto& p : patterns) {
    const std::regex re(p.regex, std::regex::ECMAScript | std::regex::icase);
    if (std::regex_search(text, re)) v.set(p.label);
  }
  return v;
}

EbookExtraction extract_ebook_figures(const PagedDocument& document,
                                      const std::vector<CaptionPattern>& patterns) {
  EbookExtraction out;
  std::size_t total_images = 0;
  for (std::size_t p = 0; p < document.page_count(); ++p) {
    const DocumentPage page = document.page(p);
    total_images += page.images.size();

    std::vector<std::pair<const TextBlock*, LabelVector>> hits;
    for (const auto& cap : page.captions) {
      auto labels = match_caption(cap.text, patterns);
      if (!labels.none()) hits.emplace_back(&cap, labels);
    }

    std::vector<std::size_t> order(page.images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return page.images[a].y < page.images[b].y; });

    for (std::size_t k : order) {
      const auto& img = page.images[k];
      const std::string locator = document.locus() + "#page=" + std::to_string(p + 1) + "&image=" + img.name;
      const std::pair<const TextBlock*, LabelVector>* best = nullptr;
      for (const auto& h : hits) {
        if (!best || std::abs(h.first->y - img.y) < std::abs(best->first->y - img.y)) best = &h;
      }
      if (!best) {
        ++out.dropped;
        out.notes.push_back(locator + ": no caption matched a pattern");
        continue;
      }
      if (auto why = best->second.violation()) {
        ++out.dropped;
        out.notes.push_back(locator + ": caption gives invalid labels (" + *why + ")");
        continue;
      }
      if (!sniff_format(img.bytes)) {
        ++out.dropped;
        out.notes.push_back(locator + ": unsupported image payload");
        continue;
      }
      CandidateImage c;
      c.bytes = img.bytes;
      c.locator = locator;
      c.caption = best->first->text;
      c.kind = SourceKind::EbookDocument;
      c.content_type = std::string(content_type(*sniff_format(img.bytes)));
      c.labels = best->second;
      out.figures.push_back(std::move(c));
    }
  }
  if (total_images == 0) fail("no-images", "document " + document.locus() + " has no extractable images");
  return out;
}

// -- public dataset import -------------------------------------------------

std::map<std::string, ClassId> default_kvasir_folder_map() {
  return {
      {"esophagitis", ClassId::Esophagitis},
      {"esophagitis-a", ClassId::Esophagitis},
      {"esophagitis-b-d", ClassId::Esophagitis},
      {"z-line", ClassId::ZLine},
      {"normal-z-line", ClassId::ZLine},
      {"barretts", ClassId::Barretts},
      {"barretts-short-segment", ClassId::Barretts},
      {"pylorus", ClassId::Pylorus},
      {"normal-pylorus", ClassId::Pylorus},
      {"retroflex-stomach", ClassId::RetroflexStomach},
  };
}

ImportResult import_public_dataset(const std::filesystem::path& root,
                                   const std::map<std::string, ClassId>& folder_map) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) fail("empty-root", "dataset root " + root.string() + " is not a directory");

  std::vector<fs::path> dirs;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());

  ImportResult out;
  std::set<std::string> ids;
  std::size_t seen_files = 0;
  for (const auto& dir : dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    seen_files += files.size();
    const std::string folder = dir.filename().string();
    auto mapped = folder_map.find(folder);
    if (mapped == folder_map.end()) {
      if (!files.empty()) {
        out.warnings.push_back("skipped unmapped folder '" + folder + "' (" + std::to_string(files.size()) +
                               " files)");
      }
      continue;
    }
    for (const auto& file : files) {
      auto bytes = read_file(file);
      if (!sniff_format(bytes)) {
        out.warnings.push_back("skipped non-image file " + file.string());
        continue;
      }
      ImageRecord r;
      r.byte_hash = sha256_hex(bytes);
      try {
        r.phash = difference_hash(bytes);
      } catch (const Error& e) {
        out.warnings.push_back("skipped undecodable file " + file.string() + ": " + e.what());
        continue;
      }
      std::string id = "kvasir-" + r.byte_hash.substr(0, 12);
      for (std::size_t n = 1; ids.count(id); ++n) id = "kvasir-" + r.byte_hash.substr(0, 12) + "-" + std::to_string(n);
      ids.insert(id);
      r.id = id;
      r.source = SourceType::Kvasir;
      r.uri = file.string();
      LabelVector labels;
      labels.set(mapped->second);
      r.labels = labels;
      r.review_status = ReviewStatus::Accepted;
      r.provenance = {{"folder", folder}, {"dataset_root", root.string()}};
      out.records.push_back(std::move(r));
    }
  }
  if (seen_files == 0) fail("empty-root", "dataset root " + root.string() + " contains no files");
  return out;
}

// -- dedup -----------------------------------------------------------------

Fingerprint fingerprint(std::span<const std::uint8_t> bytes) {
  return {sha256_hex(bytes), difference_hash(bytes)};
}

DedupResult dedup(std::span<const Fingerprint> candidates, const DatasetManifest& existing,
                  int hamming_threshold) {
  struct Known {
    std::uint64_t phash;
    std::string name;
  };
  std::unordered_map<std::string, std::string> by_bytes;
  std::vector<Known> known;
  for (const auto& r : existing.records()) {
    if (!r.byte_hash.empty()) by_bytes.emplace(r.byte_hash, r.id);
    known.push_back({r.phash, r.id});
  }

  DedupResult out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (auto it = by_bytes.find(c.byte_hash); it != by_bytes.end()) {
      out.dropped.push_back({i, "byte-duplicate", it->second, 0});
      continue;
    }
    const Known* nearest = nullptr;
    int best = 65;
    if (hamming_threshold >= 0) {
      for (const auto& k : known) {
        const int d = hamming_distance(k.phash, c.phash);
        if (d <= hamming_threshold && d < best) {
          best = d;
          nearest = &k;
        }
      }
    }
    if (nearest) {
      out.dropped.push_back({i, "near-duplicate", nearest->name, best});
      continue;
    }
    const std::string name = "candidate:" + std::to_string(i);
    by_bytes.emplace(c.byte_hash, name);
    known.push_back({c.phash, name});
    out.kept.push_back(i);
  }
  return out;
}

// -- prescreen -------------------------------------------------------------

std::string ConstantScorer::version() const {
  char buf[48];
  std::snprintf(buf, sizeof buf, "constant-%.4f", value_);
  return buf;
}

std::vector<PrescreenResult> prescreen(std::span<const CandidateImage> candidates, RelevanceScorer& scorer,
                                       double threshold) {
  std::vector<PrescreenResult> out;
  out.reserve(candidates.size());
  const std::string version = scorer.version();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    PrescreenResult r;
    r.candidate = i;
    r.model_version = version;
    try {
      const double s = scorer.score(candidates[i]);
      if (!(s >= 0.0 && s <= 1.0)) throw std::out_of_range("score outside [0, 1]");
      r.score = s;
      r.pass = s >= threshold;
    } catch (const std::exception& e) {
      r.score = 0.0;
      r.pass = false;
      r.error = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string ImageStore::put(std::span<const std::uint8_t> bytes) const {
  const auto format = sniff_format(bytes);
  const char* ext = !format ? ".bin" : *format == RasterFormat::Png ? ".png" : *format == RasterFormat::Jpeg ? ".jpg" : ".bmp";
  const auto path = root_ / (sha256_hex(bytes) + ext);
  if (!std::filesystem::exists(path)) write_file(path, bytes);
  return path.string();
}

namespace {

ImageRecord record_from_candidate(const CandidateImage& c, const DatasetManifest& manifest,
                                  const ImageStore& store, std::vector<std::string>& reserved) {
  ImageRecord r;
  const Fingerprint fp = fingerprint(c.bytes);
  r.byte_hash = fp.byte_hash;
  r.phash = fp.phash;
  const bool ebook = c.kind == SourceKind::EbookDocument;
  r.source = ebook ? SourceType::EBook : SourceType::WebMined;
  r.id = unique_record_id(manifest, std::string(ebook ? "ebook-" : "web-") + fp.byte_hash.substr(0, 12), reserved);
  reserved.push_back(r.id);
  r.uri = store.put(c.bytes);
  r.provenance["locator"] = c.locator;
  r.provenance["source_kind"] = std::string(to_string(c.kind));
  if (!c.query.empty()) r.provenance["query"] = c.query;
  if (!c.caption.empty()) r.provenance["caption"] = c.caption;
  if (!c.fetched_at.empty()) r.provenance["fetched_at"] = c.fetched_at;
  if (ebook) {
    r.labels = c.labels;
    r.review_status = ReviewStatus::Accepted;
  } else if (c.labels && !c.labels->none()) {
    std::string joined;
    for (const auto& n : decode_labels(*c.labels)) joined += (joined.empty() ? "" : ",") + n;
    r.provenance["suggested_labels"] = joined;
  }
  return r;
}

}  // namespace

DatasetManifest enqueue_for_review(std::span<const PrescreenResult> results,
                                   std::span<const CandidateImage> candidates, const DatasetManifest& manifest,
                                   const ImageStore& store) {
  std::vector<ImageRecord> added;
  std::vector<std::string> reserved;
  for (const auto& res : results) {
    if (res.candidate >= candidates.size()) fail("bad-result", "prescreen result refers to a missing candidate");
    const auto& c = candidates[res.candidate];
    ImageRecord r = record_from_candidate(c, manifest, store, reserved);
    if (r.source != SourceType::EBook) {
      r.review_status = res.pass ? ReviewStatus::PrescreenPassed : ReviewStatus::PrescreenRejected;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6f", res.score);
      r.provenance["prescreen_score"] = buf;
      r.provenance["prescreen_model"] = res.model_version;
      if (!res.error.empty()) r.provenance["prescreen_error"] = res.error;
    }
    added.push_back(std::move(r));
  }
  if (added.empty()) return manifest;
  return manifest.with_appended(std::move(added));
}

DatasetManifest add_unreviewed(std::span<const CandidateImage> candidates, const DatasetManifest& manifest,
                               const ImageStore& store) {
  std::vector<ImageRecord> added;
  std::vector<std::string> reserved;
  for (const auto& c : candidates) added.push_back(record_from_candidate(c, manifest, store, reserved));
  if (added.empty()) return manifest;
  return manifest.with_appended(std::move(added));
}

DatasetManifest apply_prescreen(const DatasetManifest& manifest, std::span<const std::string> record_ids,
                                std::span<const PrescreenResult> results) {
  std::vector<ImageRecord> records(manifest.records().begin(), manifest.records().end());
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < records.size(); ++i) pos.emplace(records[i].id, i);
  for (const auto& res : results) {
    if (res.candidate >= record_ids.size()) fail("bad-result", "prescreen result refers to a missing record");
    auto it = pos.find(record_ids[res.candidate]);
    if (it == pos.end()) fail("bad-result", "unknown record '" + record_ids[res.candidate] + "'");
    auto& r = records[it->second];
    if (r.review_status != ReviewStatus::Unreviewed) continue;
    r.review_status = res.pass ? ReviewStatus::PrescreenPassed : ReviewStatus::PrescreenRejected;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", res.score);
    r.provenance["prescreen_score"] = buf;
    r.provenance["prescreen_model"] = res.model_version;
    if (!res.error.empty()) r.provenance["prescreen_error"] = res.error;
  }
  return DatasetManifest(std::move(records), manifest.split_spec());
}

// -- configuration ---------------------------------------------------------

CrawlConfig parse_crawl_config(const std::string& yaml_text) {
  CrawlConfig cfg;
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    fail("bad-config", std::string("cannot parse crawl config: ") + e.what());
  }
  try {
    if (root["rate_limit"]) cfg.rate_limit = root["rate_limit"].as<double>();
    if (root["max_results"]) cfg.max_results = root["max_results"].as<std::size_t>();
    if (root["parallelism"]) cfg.parallelism = root["parallelism"].as<std::size_t>();
    if (root["prescreen_threshold"]) cfg.prescreen_threshold = root["prescreen_threshold"].as<double>();
    if (root["hamming_threshold"]) cfg.hamming_threshold = root["hamming_threshold"].as<int>();
    if (root["credentials_env"]) cfg.credentials_env = root["credentials_env"].as<std::string>();
    if (auto oa = root["open_access_api"]) {
      if (oa["base_url"]) cfg.open_access_base_url = oa["base_url"].as<std::string>();
    }
    if (auto se = root["search_engine"]) {
      if (se["endpoint"]) cfg.search_endpoint = se["endpoint"].as<std::string>();
      if (se["results_path"]) cfg.search_results_path = se["results_path"].as<std::string>();
      if (se["url_field"]) cfg.search_url_field = se["url_field"].as<std::string>();
    }
    if (auto pats = root["caption_patterns"]) {
      cfg.caption_patterns.clear();
      for (const auto& p : pats) {
        const auto cls = p["class"].as<std::string>();
        auto id = class_from_name(cls);
        if (!id) fail("unknown-class", "caption pattern maps to unknown class '" + cls + "'");
        const auto re = p["pattern"].as<std::string>();
        try {
          std::regex check(re, std::regex::ECMAScript | std::regex::icase);
        } catch (const std::regex_error& e) {
          fail("bad-config", "invalid caption pattern '" + re + "'");
        }
        cfg.caption_patterns.push_back({re, *id});
      }
    }
  } catch (const YAML::Exception& e) {
    fail("bad-config", std::string("invalid crawl config value: ") + e.what());
  }
  if (!(cfg.rate_limit > 0.0)) fail("bad-config", "rate_limit must be positive");
  if (cfg.max_results < 1) fail("bad-config", "max_results must be at least 1");
  if (!(cfg.prescreen_threshold >= 0.0 && cfg.prescreen_threshold <= 1.0)) {
    fail("bad-config", "prescreen_threshold must lie in [0, 1]");
  }
  return cfg;
}

CrawlConfig load_crawl_config(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return parse_crawl_config(std::string(bytes.begin(), bytes.end()));
}

std::map<std::string, ClassId> load_folder_map(const std::filesystem::path& path) {
  std::map<std::string, ClassId> out;
  try {
    YAML::Node root = YAML::LoadFile(path.string());
    for (const auto& kv : root) {
      const auto cls = kv.second.as<std::string>();
      auto id = class_from_name(cls);
      if (!id) fail("unknown-class", "folder map uses unknown class '" + cls + "'");
      out.emplace(kv.first.as<std::string>(), *id);
    }
  } catch (const YAML::Exception& e) {
    fail("bad-config", std::string("cannot parse folder map: ") + e.what());
  }
  return out;
}

}  // namespace eoescope
