#include <doctest.h>

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "eoescope/error.hpp"
#include "eoescope/hashing.hpp"
#include "eoescope/ingestion.hpp"
#include "fake_sources.hpp"

using namespace eoescope;
using fixtures::FakeSource;
using fixtures::RecordingClock;

namespace {

FetchQuery query(std::size_t max_results, double rate = 2.0, std::size_t parallelism = 1) {
  FetchQuery q;
  q.text = "eosinophilic esophagitis endoscopy";
  q.max_results = max_results;
  q.rate_limit = rate;
  q.parallelism = parallelism;
  return q;
}

}  // namespace

TEST_CASE("fetch truncates to max results and stamps candidates") {
  FakeSource src(12);
  RecordingClock clock;
  const auto res = fetch(query(5), src, clock);
  CHECK(res.candidates.size() == 5);
  CHECK(src.downloads == 5);
  CHECK(src.requested_limit == 5);
  for (const auto& c : res.candidates) {
    CHECK(c.query == "eosinophilic esophagitis endoscopy");
    CHECK(c.fetched_at.size() == 24);
    CHECK(c.fetched_at.back() == 'Z');
    CHECK(c.kind == SourceKind::SearchEngine);
  }
  CHECK(std::is_sorted(res.candidates.begin(), res.candidates.end(),
                       [](const auto& a, const auto& b) { return a.locator < b.locator; }));
}

TEST_CASE("rate limit schedule") {
  // Frozen: one search plus six downloads at 2/s are granted at 0, 0.5, ..., 3.0 s.
  FakeSource src(6);
  RecordingClock clock;
  fetch(query(6, 2.0, 3), src, clock);
  REQUIRE(clock.grants.size() == 7);
  std::sort(clock.grants.begin(), clock.grants.end());
  for (std::size_t i = 0; i < 7; ++i) CHECK(clock.grants[i] - 1.7e9 == doctest::Approx(0.5 * i));
  CHECK(clock.now() - 1.7e9 == doctest::Approx(3.0));
}

TEST_CASE("undecodable payloads are skipped with a warning") {
  FakeSource src(4);
  src.corrupt.insert(src.locators()[1]);
  RecordingClock clock;
  const auto res = fetch(query(4), src, clock);
  CHECK(res.candidates.size() == 3);
  CHECK(res.skipped == 1);
  REQUIRE(res.warnings.size() == 1);
  CHECK(res.warnings[0].find(src.locators()[1]) != std::string::npos);
}

TEST_CASE("transport failures only abort when every download fails") {
  FakeSource src(3);
  src.failing.insert(src.locators()[0]);
  RecordingClock clock;
  CHECK(fetch(query(3), src, clock).candidates.size() == 2);

  FakeSource dead(2);
  for (const auto& l : dead.locators()) dead.failing.insert(l);
  try {
    fetch(query(2), dead, clock);
    FAIL("expected all-downloads-failed");
  } catch (const Error& e) {
    CHECK(e.code() == "all-downloads-failed");
  }
}

TEST_CASE("auth failures propagate") {
  FakeSource src(3);
  src.auth_broken = true;
  RecordingClock clock;
  try {
    fetch(query(3, 2.0, 2), src, clock);
    FAIL("expected auth-failed");
  } catch (const Error& e) {
    CHECK(e.code() == "auth-failed");
  }
}

TEST_CASE("invalid queries") {
  FakeSource src(1);
  RecordingClock clock;
  CHECK_THROWS_AS(fetch(query(0), src, clock), Error);
  CHECK_THROWS_AS(fetch(query(1, 0.0), src, clock), Error);
}

TEST_CASE("dedup drops byte and near duplicates, first wins") {
  Rng rng(3);
  const auto a = fixtures::random_walk_image(rng);
  const auto b = fixtures::random_walk_image(rng);
  const auto a_near = fixtures::near_duplicate(a, 5, rng);
  const auto a_far = fixtures::near_duplicate(a, 6, rng);
  std::vector<Fingerprint> fps;
  for (const auto* w : {&a, &b, &a, &a_near, &a_far}) fps.push_back(fingerprint(encode_png(fixtures::block_image(w->grid()))));
  const auto res = dedup(fps, DatasetManifest{});
  CHECK(res.kept == std::vector<std::size_t>{0, 1, 4});
  REQUIRE(res.dropped.size() == 2);
  CHECK(res.dropped[0].reason == "byte-duplicate");
  CHECK(res.dropped[0].matched == "candidate:0");
  CHECK(res.dropped[1].reason == "near-duplicate");
  CHECK(res.dropped[1].distance == 5);

  // Against an existing manifest.
  ImageRecord existing = fixtures::make_record("site-a", SourceType::Site, {"normal"});
  existing.byte_hash = fps[0].byte_hash;
  existing.phash = fps[0].phash;
  const auto res2 = dedup(fps, DatasetManifest({existing}));
  CHECK(res2.kept == std::vector<std::size_t>{1, 4});
  CHECK(res2.dropped[0].matched == "site-a");
}

TEST_CASE("prescreen marks scorer failures as rejects") {
  std::vector<CandidateImage> cs(3);
  int calls = 0;
  FunctionScorer scorer(
      [&](const CandidateImage&) -> double {
        ++calls;
        if (calls == 2) throw std::runtime_error("model crashed");
        if (calls == 3) return 1.5;
        return 0.7;
      },
      "fn-v1");
  const auto res = prescreen(cs, scorer, 0.5);
  CHECK(res[0].pass);
  CHECK(res[0].score == 0.7);
  CHECK_FALSE(res[1].pass);
  CHECK(res[1].score == 0.0);
  CHECK(res[1].error == "model crashed");
  CHECK_FALSE(res[2].pass);
  CHECK_FALSE(res[2].error.empty());
  CHECK(res[0].model_version == "fn-v1");
}

TEST_CASE("enqueue turns candidates into records") {
  fixtures::TempDir dir;
  ImageStore store(dir / "images");
  std::vector<CandidateImage> cs(2);
  cs[0].bytes = encode_png(fixtures::pattern_image(40, 40, 1));
  cs[0].locator = "https://example.org/a.png";
  cs[0].caption = "linear furrows";
  cs[0].labels = encode_labels({"furrows"});
  cs[1].bytes = encode_png(fixtures::pattern_image(40, 40, 2));
  cs[1].locator = "https://example.org/b.png";
  ConstantScorer hi(0.9);
  auto results = prescreen(cs, hi);
  results[1].pass = false;
  const auto m = enqueue_for_review(results, cs, DatasetManifest{}, store);
  REQUIRE(m.size() == 2);
  const auto& r0 = m.records()[0];
  CHECK(r0.source == SourceType::WebMined);
  CHECK(r0.review_status == ReviewStatus::PrescreenPassed);
  CHECK(r0.id == "web-" + sha256_hex(cs[0].bytes).substr(0, 12));
  CHECK(r0.provenance.at("prescreen_model") == "constant-0.9000");
  CHECK(r0.provenance.at("suggested_labels") == "furrows");
  CHECK_FALSE(r0.labels);
  CHECK(m.records()[1].review_status == ReviewStatus::PrescreenRejected);
  CHECK(std::filesystem::exists(r0.uri));
  CHECK(r0.phash == difference_hash(cs[0].bytes));
}

TEST_CASE("e-book bundle extraction pairs images with captions") {
  fixtures::TempDir dir;
  write_file(dir / "fig1.png", encode_png(fixtures::pattern_image(40, 40, 1)));
  write_file(dir / "fig2.png", encode_png(fixtures::pattern_image(40, 40, 2)));
  write_file(dir / "fig3.png", encode_png(fixtures::pattern_image(40, 40, 3)));
  nlohmann::json bundle = {
      {"pages",
       {{{"images", {{{"file", "fig1.png"}, {"y", 100}}, {{"file", "fig2.png"}, {"y", 500}}}},
         {"captions", {{{"text", "Figure 1. Rings and linear furrows."}, {"y", 180}},
                       {{"text", "Figure 2. Normal mucosa and white exudates."}, {"y", 560}}}}},
        {{"images", {{{"file", "fig3.png"}, {"y", 50}}}}, {"captions", {{{"text", "Chapter summary"}, {"y", 90}}}}}}}};
  std::ofstream(dir / "book.json") << bundle.dump();
  BundleDocument doc(dir / "book.json");
  const auto ex = extract_ebook_figures(doc, default_caption_patterns());
  REQUIRE(ex.figures.size() == 1);
  CHECK(decode_labels(*ex.figures[0].labels) == std::vector<std::string>{"rings", "furrows"});
  CHECK(ex.dropped == 2);  // normal-with-feature caption, caption without a pattern hit
  CHECK(ex.figures[0].locator.find("#page=1&image=fig1.png") != std::string::npos);

  std::ofstream(dir / "broken.json") << "{";
  try {
    BundleDocument bad(dir / "broken.json");
    FAIL("expected document-unreadable");
  } catch (const Error& e) {
    CHECK(e.code() == "document-unreadable");
  }
}

TEST_CASE("public dataset import labels by folder") {
  fixtures::TempDir dir;
  std::filesystem::create_directories(dir / "kvasir" / "pylorus");
  std::filesystem::create_directories(dir / "kvasir" / "polyps");
  write_file(dir / "kvasir" / "pylorus" / "a.png", encode_png(fixtures::pattern_image(40, 40, 1)));
  write_file(dir / "kvasir" / "pylorus" / "b.jpg", encode_jpeg(fixtures::pattern_image(40, 40, 2)));
  write_file(dir / "kvasir" / "polyps" / "c.png", encode_png(fixtures::pattern_image(40, 40, 3)));
  const auto res = import_public_dataset(dir / "kvasir", default_kvasir_folder_map());
  REQUIRE(res.records.size() == 2);
  for (const auto& r : res.records) {
    CHECK(r.source == SourceType::Kvasir);
    CHECK(decode_labels(*r.labels) == std::vector<std::string>{"pylorus"});
    CHECK(r.review_status == ReviewStatus::Accepted);
    CHECK(r.id.rfind("kvasir-", 0) == 0);
  }
  REQUIRE(res.warnings.size() == 1);
  CHECK(res.warnings[0].find("polyps") != std::string::npos);

  std::filesystem::create_directories(dir / "empty");
  CHECK_THROWS_AS(import_public_dataset(dir / "empty", default_kvasir_folder_map()), Error);
}

TEST_CASE("crawl config parsing") {
  const auto cfg = parse_crawl_config(R"(
rate_limit: 0.5
max_results: 20
parallelism: 2
prescreen_threshold: 0.6
search_engine:
  endpoint: "https://search.example/api?q={query}&n={limit}"
  results_path: "/items"
  url_field: "media"
caption_patterns:
  - {pattern: "ringed", class: rings}
)");
  CHECK(cfg.rate_limit == 0.5);
  CHECK(cfg.max_results == 20);
  CHECK(cfg.search_results_path == "/items");
  REQUIRE(cfg.caption_patterns.size() == 1);
  CHECK(cfg.caption_patterns[0].label == ClassId::Rings);
  CHECK_THROWS_AS(parse_crawl_config("caption_patterns:\n  - {pattern: x, class: polyp}\n"), Error);
}
