#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eoescope/manifest.hpp"
#include "eoescope/taxonomy.hpp"

namespace eoescope {

enum class SourceKind { SearchEngine, OpenAccessApi, EbookDocument, DatasetImport };

std::string_view to_string(SourceKind kind);
SourceKind parse_source_kind(std::string_view text);

/// Regular expression (case-insensitive) that maps caption text to a class.
struct CaptionPattern {
  std::string regex;
  ClassId label;
};

std::vector<CaptionPattern> default_caption_patterns();

struct FetchQuery {
  std::string text;
  SourceKind kind = SourceKind::SearchEngine;
  std::size_t max_results = 1;
  double rate_limit = 1.0;  // requests per second
  std::size_t parallelism = 4;
  std::vector<CaptionPattern> caption_patterns;

  void validate() const;
};

struct Download {
  std::vector<std::uint8_t> bytes;
  std::string content_type;
};

/// Everything that touches the network goes through this interface.
/// Implementations signal credential problems with Error{..., "auth-failed"};
/// any other exception from `download` is treated as a per-item failure.
class SourceClient {
 public:
  virtual ~SourceClient() = default;
  virtual std::vector<std::string> search(const std::string& text, std::size_t limit) = 0;
  virtual Download download(const std::string& locator) = 0;
  virtual std::string name() const = 0;
};

/// Seconds since the Unix epoch.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() = 0;
  virtual void sleep_until(double t) = 0;
};

class SystemClock final : public Clock {
 public:
  double now() override;
  void sleep_until(double t) override;
};

/// Virtual time for tests: sleeping advances the clock instead of blocking.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(double start = 1.7e9) : now_(start) {}
  double now() override;
  void sleep_until(double t) override;
  void advance(double seconds);

 private:
  std::mutex mu_;
  double now_;
};

/// Token bucket of capacity one: successive grants are at least 1/rate apart.
class RateLimiter {
 public:
  RateLimiter(double rate, Clock& clock);
  /// Blocks (through the clock) until the next slot; returns the granted time.
  double acquire();

 private:
  std::mutex mu_;
  double interval_;
  double next_free_ = -1.0;
  Clock& clock_;
};

struct CandidateImage {
  std::vector<std::uint8_t> bytes;
  std::string locator;  // URL or document locus
  std::string caption;
  std::string fetched_at;  // ISO-8601 UTC
  std::string query;
  SourceKind kind = SourceKind::SearchEngine;
  std::string content_type;
  std::optional<LabelVector> labels;  // caption-derived, e-book only
};

struct FetchResult {
  std::vector<CandidateImage> candidates;
  std::vector<std::string> warnings;
  std::size_t skipped = 0;
};

/// Searches, then downloads up to `query.max_results` locators with bounded
/// parallelism under a shared rate limit (search included). Undecodable or
/// failed downloads become warnings; results are ordered by locator.
FetchResult fetch(const FetchQuery& query, SourceClient& client, Clock& clock);

std::string iso8601_utc(double epoch_seconds);

// -- e-book figures --------------------------------------------------------

struct EmbeddedImage {
  std::vector<std::uint8_t> bytes;
  double y = 0.0;  // vertical position on the page
  std::string name;
};

struct TextBlock {
  std::string text;
  double y = 0.0;
};

struct DocumentPage {
  std::vector<EmbeddedImage> images;
  std::vector<TextBlock> captions;
};

class PagedDocument {
 public:
  virtual ~PagedDocument() = default;
  virtual std::size_t page_count() const = 0;
  virtual DocumentPage page(std::size_t index) const = 0;
  virtual std::string locus() const = 0;
};

/// Document exported as a JSON bundle:
/// {"title": ..., "pages": [{"images": [{"file": "a.png", "y": 120}],
///                            "captions": [{"text": "...", "y": 300}]}]}
/// with image files relative to the bundle.
class BundleDocument final : public PagedDocument {
 public:
  explicit BundleDocument(std::filesystem::path bundle);
  std::size_t page_count() const override { return pages_.size(); }
  DocumentPage page(std::size_t index) const override;
  std::string locus() const override { return locus_; }

 private:
  std::string locus_;
  std::vector<DocumentPage> pages_;
};

struct EbookExtraction {
  std::vector<CandidateImage> figures;  // each carries caption-derived labels
  std::size_t dropped = 0;
  std::vector<std::string> notes;
};

/// Pairs each embedded image with the nearest caption on its page that hits a
/// pattern and labels it with every class whose pattern matches. Images with
/// no matching caption, or whose caption yields an invalid label set, are dropped.
EbookExtraction extract_ebook_figures(const PagedDocument& document,
                                      const std::vector<CaptionPattern>& patterns);

/// Classes whose patterns match `text`.
LabelVector match_caption(const std::string& text, const std::vector<CaptionPattern>& patterns);

// -- public dataset import -------------------------------------------------

std::map<std::string, ClassId> default_kvasir_folder_map();

struct ImportResult {
  std::vector<ImageRecord> records;
  std::vector<std::string> warnings;
};

/// Walks `root` for folders named in `folder_map` and creates accepted kvasir
/// records labeled by folder. Unmapped folders holding images are skipped
/// with a warning.
ImportResult import_public_dataset(const std::filesystem::path& root,
                                   const std::map<std::string, ClassId>& folder_map);

// -- deduplication ---------------------------------------------------------

struct Fingerprint {
  std::string byte_hash;
  std::uint64_t phash = 0;
};

Fingerprint fingerprint(std::span<const std::uint8_t> bytes);

struct DedupDrop {
  std::size_t index = 0;
  std::string reason;   // "byte-duplicate" or "near-duplicate"
  std::string matched;  // record id or "candidate:<index>"
  int distance = 0;
};

struct DedupResult {
  std::vector<std::size_t> kept;
  std::vector<DedupDrop> dropped;
};

inline constexpr int kDefaultHammingThreshold = 5;

/// First occurrence wins in input order. A candidate is dropped when its byte
/// hash matches an existing record or an earlier kept candidate, or when its
/// perceptual hash is within `hamming_threshold` (inclusive) of one.
DedupResult dedup(std::span<const Fingerprint> candidates, const DatasetManifest& existing,
                  int hamming_threshold = kDefaultHammingThreshold);

// -- prescreen -------------------------------------------------------------

class RelevanceScorer {
 public:
  virtual ~RelevanceScorer() = default;
  /// Relevance in [0, 1].
  virtual double score(const CandidateImage& candidate) = 0;
  virtual std::string version() const = 0;
};

class ConstantScorer final : public RelevanceScorer {
 public:
  explicit ConstantScorer(double value) : value_(value) {}
  double score(const CandidateImage&) override { return value_; }
  std::string version() const override;

 private:
  double value_;
};

class FunctionScorer final : public RelevanceScorer {
 public:
  FunctionScorer(std::function<double(const CandidateImage&)> fn, std::string version)
      : fn_(std::move(fn)), version_(std::move(version)) {}
  double score(const CandidateImage& c) override { return fn_(c); }
  std::string version() const override { return version_; }

 private:
  std::function<double(const CandidateImage&)> fn_;
  std::string version_;
};

inline constexpr double kDefaultPrescreenThreshold = 0.5;

struct PrescreenResult {
  std::size_t candidate = 0;
  double score = 0.0;
  bool pass = false;
  std::string model_version;
  std::string error;
};

/// One result per candidate, in input order. A scorer failure (exception or
/// out-of-range score) rejects that item with score 0 and an error note.
std::vector<PrescreenResult> prescreen(std::span<const CandidateImage> candidates, RelevanceScorer& scorer,
                                       double threshold = kDefaultPrescreenThreshold);

/// Content-addressed file store for fetched image bytes.
class ImageStore {
 public:
  explicit ImageStore(std::filesystem::path root) : root_(std::move(root)) {}
  /// Writes the bytes (if absent) and returns the file path used as record uri.
  std::string put(std::span<const std::uint8_t> bytes) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

/// Turns prescreened candidates into records. Passing web candidates become
/// prescreen-passed, failing ones prescreen-rejected; e-book candidates enter
/// accepted with their caption labels. Colliding ids get a numeric suffix.
DatasetManifest enqueue_for_review(std::span<const PrescreenResult> results,
                                   std::span<const CandidateImage> candidates, const DatasetManifest& manifest,
                                   const ImageStore& store);

/// Adds candidates as unreviewed web-mined records (no prescreen yet).
DatasetManifest add_unreviewed(std::span<const CandidateImage> candidates, const DatasetManifest& manifest,
                               const ImageStore& store);

/// Applies prescreen results computed for existing unreviewed records.
DatasetManifest apply_prescreen(const DatasetManifest& manifest, std::span<const std::string> record_ids,
                                std::span<const PrescreenResult> results);

// -- configuration ---------------------------------------------------------

struct CrawlConfig {
  double rate_limit = 1.0;
  std::size_t max_results = 50;
  std::size_t parallelism = 4;
  double prescreen_threshold = kDefaultPrescreenThreshold;
  int hamming_threshold = kDefaultHammingThreshold;
  std::vector<CaptionPattern> caption_patterns = default_caption_patterns();
  std::string open_access_base_url = "https://openi.nlm.nih.gov";
  std::string search_endpoint;      // URL template with {query} and {limit}
  std::string search_results_path;  // JSON pointer to the results array
  std::string search_url_field = "url";
  std::string credentials_env = "EOESCOPE_API_KEY";
};

CrawlConfig load_crawl_config(const std::filesystem::path& path);
CrawlConfig parse_crawl_config(const std::string& yaml_text);
std::map<std::string, ClassId> load_folder_map(const std::filesystem::path& path);

}  // namespace eoescope
