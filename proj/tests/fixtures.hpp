#pragma once

#include <array>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "eoescope/counts.hpp"
#include "eoescope/image.hpp"
#include "eoescope/ingestion.hpp"
#include "eoescope/manifest.hpp"
#include "eoescope/rng.hpp"
#include "eoescope/vit.hpp"

namespace fixtures {

using namespace eoescope;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "eoescope-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline ImageRecord make_record(std::string id, SourceType source, std::vector<std::string> labels,
                               ReviewStatus status = ReviewStatus::Accepted, Split split = Split::Unassigned) {
  ImageRecord r;
  r.id = std::move(id);
  r.source = source;
  r.uri = "images/" + r.id + ".png";
  r.byte_hash = std::string(64, '0');
  for (std::size_t i = 0; i < r.id.size() && i < 64; ++i) r.byte_hash[i] = "0123456789abcdef"[r.id[i] % 16];
  r.phash = derive_seed(0, r.id);
  if (!labels.empty()) r.labels = encode_labels(labels, label_rules_for(source));
  r.review_status = status;
  r.split = split;
  return r;
}

/// Manifest whose summary reproduces a count table. In every (source, split)
/// row the first `normal` images are labeled normal alone; the label columns
/// of the remaining classes are dealt round-robin over the other images with
/// a pointer that carries across classes, so every image gets at least one
/// label and no image gets the same class twice.
inline DatasetManifest synthesize(const CountTable& table) {
  std::vector<ImageRecord> records;
  for (const auto& [key, images] : table.cells()) {
    const auto& [source, split, column] = key;
    if (column != CountTable::kImages || images == 0) continue;
    const long normal = table.get(source, split, "normal");
    const long rest = images - normal;
    std::vector<LabelVector> labels(static_cast<std::size_t>(images));
    for (long i = 0; i < normal; ++i) labels[static_cast<std::size_t>(i)].set(ClassId::Normal);
    long pointer = 0;
    for (std::size_t k = 1; k < kNumClasses; ++k) {
      const long count = table.get(source, split, std::string(class_names()[k]));
      for (long j = 0; j < count; ++j) {
        labels[static_cast<std::size_t>(normal + pointer)].set(k);
        pointer = (pointer + 1) % rest;
      }
    }
    for (long i = 0; i < images; ++i) {
      ImageRecord r = make_record(std::string(to_string(source)) + "-" + std::string(to_string(split)) + "-" +
                                      std::to_string(i),
                                  source, {}, ReviewStatus::Accepted, split);
      r.labels = labels[static_cast<std::size_t>(i)];
      records.push_back(std::move(r));
    }
  }
  return DatasetManifest(std::move(records));
}

/// Random accepted manifest with every source and a spread of label sets.
inline DatasetManifest random_manifest(Rng& rng, std::size_t n) {
  static const std::vector<std::vector<std::string>> eoe_sets{
      {"normal"}, {"edema"}, {"rings"}, {"edema", "furrows"}, {"exudates", "furrows", "rings"}, {"stricture"}};
  static const std::vector<std::string> non_eoe{"esophagitis", "z-line", "barretts", "pylorus", "retroflex-stomach"};
  static const std::array<SourceType, 4> sources{SourceType::Site, SourceType::WebMined, SourceType::EBook,
                                                 SourceType::Kvasir};
  std::vector<ImageRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    const SourceType s = sources[rng.below(4)];
    std::vector<std::string> labels;
    if (s == SourceType::Kvasir) {
      labels = {non_eoe[rng.below(non_eoe.size())]};
    } else {
      labels = eoe_sets[rng.below(eoe_sets.size())];
    }
    ReviewStatus status = ReviewStatus::Accepted;
    if (s == SourceType::WebMined && rng.bernoulli(0.2)) {
      status = rng.bernoulli(0.5) ? ReviewStatus::PrescreenPassed : ReviewStatus::Rejected;
    }
    ImageRecord r = make_record("r" + std::to_string(i), s, status == ReviewStatus::Accepted ? labels
                                                                                             : std::vector<std::string>{},
                                status);
    records.push_back(std::move(r));
  }
  return DatasetManifest(std::move(records));
}

/// 8 rows x 9 columns of gray levels; the difference hash of the 72x64 image
/// built from 8x8 blocks of these levels is determined by the grid alone.
using BlockGrid = std::array<std::array<int, 9>, 8>;

inline Image block_image(const BlockGrid& grid) {
  Image img(72, 64);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 72; ++x) {
      const float v = static_cast<float>(grid[static_cast<std::size_t>(y / 8)][static_cast<std::size_t>(x / 8)]) / 255.0f;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = v;
    }
  }
  return img;
}

inline std::uint64_t grid_hash(const BlockGrid& grid) {
  std::uint64_t h = 0;
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 8; ++c) h = (h << 1) | (grid[r][c + 1] > grid[r][c] ? 1u : 0u);
  }
  return h;
}

/// Grid whose rows walk up for 1-bits and down for 0-bits of `bits`.
struct WalkImage {
  std::uint64_t bits = 0;
  std::array<int, 8> starts{};
  std::array<std::array<int, 8>, 8> steps{};

  BlockGrid grid() const {
    BlockGrid g{};
    for (std::size_t r = 0; r < 8; ++r) {
      int v = starts[r];
      g[r][0] = v;
      for (std::size_t c = 0; c < 8; ++c) {
        const bool up = (bits >> (63 - (r * 8 + c))) & 1u;
        v += up ? steps[r][c] : -steps[r][c];
        g[r][c + 1] = v;
      }
    }
    return g;
  }
};

inline WalkImage random_walk_image(Rng& rng) {
  WalkImage w;
  w.bits = rng.next();
  for (std::size_t r = 0; r < 8; ++r) {
    w.starts[r] = 100 + static_cast<int>(rng.below(56));
    for (std::size_t c = 0; c < 8; ++c) w.steps[r][c] = 3 + static_cast<int>(rng.below(10));
  }
  return w;
}

/// Same image with `flips` distinct hash bits inverted (only affected rows change).
inline WalkImage near_duplicate(const WalkImage& base, int flips, Rng& rng) {
  WalkImage w = base;
  std::vector<int> positions(64);
  for (int i = 0; i < 64; ++i) positions[static_cast<std::size_t>(i)] = i;
  rng.shuffle(positions.begin(), positions.end());
  for (int i = 0; i < flips; ++i) w.bits ^= std::uint64_t{1} << (63 - positions[static_cast<std::size_t>(i)]);
  if (flips == 0) w.starts[0] += 1;  // different bytes, same hash
  return w;
}

/// Small model configuration for fast unit tests.
inline ClassifierConfig tiny_config() {
  ClassifierConfig c;
  c.image_size = 32;
  c.patch_size = 8;
  c.embed_dim = 16;
  c.depth = 2;
  c.heads = 2;
  c.batch_size = 4;
  c.epochs = 3;
  return c;
}

/// Smooth colored image, deterministic in the seed.
inline Image pattern_image(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  const double a = rng.uniform(0.02, 0.2), b = rng.uniform(0.02, 0.2), p = rng.uniform(0, 6);
  Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(y, x, 0) = static_cast<float>(0.5 + 0.4 * std::sin(a * x + p));
      img.at(y, x, 1) = static_cast<float>(0.5 + 0.4 * std::cos(b * y + p));
      img.at(y, x, 2) = static_cast<float>(0.5 + 0.3 * std::sin(a * x + b * y));
    }
  }
  return img;
}

}  // namespace fixtures
