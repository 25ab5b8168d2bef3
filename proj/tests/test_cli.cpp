#include <doctest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "eoescope/manifest.hpp"
#include "fixtures.hpp"

using namespace eoescope;

namespace {

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

Run run(const std::string& args, const fixtures::TempDir& dir) {
  const auto err_path = dir / "stderr.txt";
  const std::string cmd = std::string(EOESCOPE_CLI) + " " + args + " 2>" + err_path.string();
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(err_path);
  std::stringstream ss;
  ss << in.rdbuf();
  r.err = ss.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Labeled manifest with real image files next to it.
void write_labeled_manifest(const fixtures::TempDir& dir, std::size_t n, Split split = Split::Unassigned) {
  const std::vector<std::vector<std::string>> combos{
      {"normal"}, {"rings", "furrows"}, {"edema", "exudates", "stricture"}, {"esophagitis"},
      {"z-line"}, {"barretts"},         {"pylorus"},                       {"retroflex-stomach"}};
  std::vector<ImageRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = fixtures::make_record("s" + std::to_string(i), SourceType::Site, combos[i % combos.size()],
                                   ReviewStatus::Accepted, split);
    r.uri = "img/s" + std::to_string(i) + ".png";
    write_file(dir / r.uri, encode_png(fixtures::pattern_image(32, 32, i)));
    records.push_back(r);
  }
  save_manifest(DatasetManifest(records), dir / "m.jsonl");
}

void write_predictions(const fixtures::TempDir& dir, const std::string& name, bool perfect,
                       const std::vector<std::string>& sources) {
  const auto m = load_manifest(dir / "m.jsonl");
  std::ofstream out(dir / name);
  out << nlohmann::json{{"training_sources", sources}}.dump() << "\n";
  for (const auto& r : m.records()) {
    auto labels = decode_labels(*r.labels);
    if (!perfect && r.id == "s1") labels = {"edema"};
    out << nlohmann::json{{"id", r.id}, {"labels", labels}}.dump() << "\n";
  }
}

}  // namespace

TEST_CASE("split is deterministic across runs") {
  fixtures::TempDir dir;
  write_labeled_manifest(dir, 30);
  const auto m = (dir / "m.jsonl").string();
  const auto a = run("split --manifest " + m + " --ratios 7:1:2 --seed 1 --out " + (dir / "a.jsonl").string(), dir);
  const auto b = run("split --manifest " + m + " --ratios 7:1:2 --seed 1 --out " + (dir / "b.jsonl").string(), dir);
  REQUIRE(a.status == 0);
  REQUIRE(b.status == 0);
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK(a.out == b.out);
  const auto counts = nlohmann::json::parse(a.out);
  // Six label strata of 4 cut [3,0,1] and two of 3 cut [2,0,1].
  CHECK(counts["site"].value("train", 0) == 22);
  CHECK(counts["site"].value("val", 0) == 0);
  CHECK(counts["site"].value("test", 0) == 8);
}

TEST_CASE("eval on perfect predictions prints 100.00 everywhere") {
  fixtures::TempDir dir;
  write_labeled_manifest(dir, 8, Split::Test);
  write_predictions(dir, "p.jsonl", true, {"site"});
  const auto r = run("eval --manifest " + (dir / "m.jsonl").string() + " --predictions " +
                         (dir / "p.jsonl").string() + " --split test --out " + (dir / "site.eval").string(),
                     dir);
  REQUIRE(r.status == 0);
  CHECK(r.out.find("[EoE]") != std::string::npos);
  int rows = 0, cells = 0;
  std::istringstream lines(r.out);
  for (std::string line; std::getline(lines, line);) {
    if (line.rfind("site ", 0) != 0) continue;
    ++rows;
    std::istringstream words(line);
    std::string w;
    words >> w >> w;  // descriptor, site mark
    while (words >> w) {
      CHECK(w == "100.00");
      ++cells;
    }
  }
  CHECK(rows == 2);
  CHECK(cells == 13);
  const auto j = nlohmann::json::parse(slurp(dir / "site.eval"));
  CHECK(j["classes"]["rings"]["f1"] == 1.0);
  CHECK(j["aggregates"]["EoE"]["f1"] == 1.0);
}

TEST_CASE("report compares two evaluations with bolding") {
  fixtures::TempDir dir;
  write_labeled_manifest(dir, 8, Split::Test);
  write_predictions(dir, "a.jsonl", false, {"site"});
  write_predictions(dir, "b.jsonl", true, {"site", "web-mined"});
  const auto m = (dir / "m.jsonl").string();
  REQUIRE(run("eval --manifest " + m + " --predictions " + (dir / "a.jsonl").string() + " --out " +
                  (dir / "siteonly.eval").string(),
              dir)
              .status == 0);
  REQUIRE(run("eval --manifest " + m + " --predictions " + (dir / "b.jsonl").string() + " --out " +
                  (dir / "sitewEB.eval").string(),
              dir)
              .status == 0);
  const auto r = run("report --compare " + (dir / "siteonly.eval").string() + " " + (dir / "sitewEB.eval").string() +
                         " --out " + (dir / "table.txt").string(),
                     dir);
  REQUIRE(r.status == 0);
  CHECK(r.out.find("**100.00**") != std::string::npos);
  CHECK(r.out.find("site+web-mined") != std::string::npos);
  CHECK(slurp(dir / "table.txt") == r.out);
}

TEST_CASE("errors are one machine-parsable line") {
  fixtures::TempDir dir;
  auto r = run("split --bogus", dir);
  CHECK(r.status != 0);
  CHECK(r.err.rfind("error: cli: ", 0) == 0);

  std::ofstream(dir / "bad.jsonl") << "not a manifest\n";
  r = run("split --manifest " + (dir / "bad.jsonl").string(), dir);
  CHECK(r.status == 1);
  CHECK(r.err.rfind("error: manifest: ", 0) == 0);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("train, visualize and prescreen end to end") {
  fixtures::TempDir dir;
  write_labeled_manifest(dir, 8, Split::Train);
  const auto m = (dir / "m.jsonl").string();
  const auto ck = (dir / "m.ckpt").string();
  auto r = run("train --manifest " + m + " --out " + ck + " --epochs 2 --image-size 32 --patch-size 8 --seed 3", dir);
  REQUIRE(r.status == 0);
  CHECK(nlohmann::json::parse(r.out)["epochs"] == 2);
  CHECK(r.err.find("\"epoch\":1") != std::string::npos);

  r = run("visualize --image " + (dir / "img/s1.png").string() + " --checkpoint " + ck +
              " --class rings --out " + (dir / "o.png").string() + " --map-out " + (dir / "o.json").string(),
          dir);
  REQUIRE(r.status == 0);
  const auto overlay = decode_image(read_file(dir / "o.png"));
  CHECK(overlay.width == 32);
  CHECK(nlohmann::json::parse(slurp(dir / "o.json"))["grid"].size() == 4);

  r = run("visualize --image " + (dir / "img/s1.png").string() + " --checkpoint " + ck + " --class 12 --out " +
              (dir / "x.png").string(),
          dir);
  CHECK(r.status == 1);
  CHECK(r.err.find("invalid-target") != std::string::npos);
}
