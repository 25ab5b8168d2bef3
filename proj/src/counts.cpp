#include "eoescope/counts.hpp"

#include <set>
#include <sstream>

#include "eoescope/error.hpp"

namespace eoescope {

void CountTable::set(SourceType source, Split split, const std::string& column, long count) {
  if (count < 0) throw Error("manifest", "negative-count", "count table cells must be non-negative");
  cells_[{source, split, column}] = count;
}

void CountTable::add(SourceType source, Split split, const std::string& column, long delta) {
  auto& cell = cells_[{source, split, column}];
  cell += delta;
  if (cell < 0) throw Error("manifest", "negative-count", "count table cells must be non-negative");
}

long CountTable::get(SourceType source, Split split, const std::string& column) const {
  auto it = cells_.find({source, split, column});
  return it == cells_.end() ? 0 : it->second;
}

long CountTable::total(std::optional<SourceType> source, std::optional<Split> split,
                       const std::string& column) const {
  long sum = 0;
  for (const auto& [key, value] : cells_) {
    const auto& [s, sp, col] = key;
    if (col != column) continue;
    if (source && s != *source) continue;
    if (split && sp != *split) continue;
    sum += value;
  }
  return sum;
}

CountTable CountTable::merge(const CountTable& a, const CountTable& b) {
  CountTable out = a;
  for (const auto& [key, value] : b.cells_) {
    auto [it, inserted] = out.cells_.emplace(key, value);
    if (!inserted && it->second != value) {
      throw Error("manifest", "table-conflict", "count tables disagree on a shared cell");
    }
  }
  return out;
}

bool operator==(const CountTable& a, const CountTable& b) {
  // Zero cells are equivalent to absent cells.
  auto nonzero = [](const CountTable& t) {
    std::map<CountTable::Key, long> m;
    for (const auto& [k, v] : t.cells_) {
      if (v != 0) m.emplace(k, v);
    }
    return m;
  };
  return nonzero(a) == nonzero(b);
}

namespace {

void put_row(CountTable& t, SourceType source, Split split, long images,
             std::initializer_list<std::pair<ClassId, long>> labels) {
  t.set(source, split, CountTable::kImages, images);
  for (const auto& [id, count] : labels) t.set(source, split, std::string(class_name(id)), count);
}

void put_eoe_row(CountTable& t, SourceType source, Split split, long images, long normal, long edema,
                 long rings, long exudates, long furrows, long stricture) {
  put_row(t, source, split, images,
          {{ClassId::Normal, normal},
           {ClassId::Edema, edema},
           {ClassId::Rings, rings},
           {ClassId::Exudates, exudates},
           {ClassId::Furrows, furrows},
           {ClassId::Stricture, stricture}});
}

void put_upper_gi_row(CountTable& t, Split split, long images, long esophagitis, long zline,
                      long barretts, long pylorus, long retroflex) {
  put_row(t, SourceType::Kvasir, split, images,
          {{ClassId::Esophagitis, esophagitis},
           {ClassId::ZLine, zline},
           {ClassId::Barretts, barretts},
           {ClassId::Pylorus, pylorus},
           {ClassId::RetroflexStomach, retroflex}});
}

}  // namespace

const CountTable& published_eoe_counts() {
  static const CountTable table = [] {
    CountTable t;
    using S = SourceType;
    put_eoe_row(t, S::Site, Split::Train, 304, 183, 113, 17, 16, 68, 0);
    put_eoe_row(t, S::WebMined, Split::Train, 108, 19, 38, 27, 25, 42, 13);
    put_eoe_row(t, S::Site, Split::Val, 44, 31, 13, 4, 1, 10, 1);
    put_eoe_row(t, S::WebMined, Split::Val, 16, 3, 3, 5, 5, 7, 2);
    put_eoe_row(t, S::EBook, Split::Val, 20, 3, 6, 8, 8, 9, 3);
    put_eoe_row(t, S::Site, Split::Test, 87, 48, 39, 4, 8, 24, 0);
    put_eoe_row(t, S::WebMined, Split::Test, 31, 2, 11, 9, 7, 15, 5);
    put_eoe_row(t, S::EBook, Split::Test, 34, 6, 5, 14, 15, 13, 3);
    return t;
  }();
  return table;
}

const CountTable& published_upper_gi_counts() {
  static const CountTable table = [] {
    CountTable t;
    put_upper_gi_row(t, Split::Train, 4481, 1133, 1351, 65, 1398, 534);
    put_upper_gi_row(t, Split::Val, 644, 163, 194, 10, 200, 77);
    // Label columns sum to 1283 over 1281 images: two test images carry two findings.
    put_upper_gi_row(t, Split::Test, 1281, 324, 387, 19, 400, 153);
    return t;
  }();
  return table;
}

CountTable summarize(const DatasetManifest& manifest) {
  CountTable t;
  std::set<std::pair<SourceType, Split>> rows;
  for (const auto& r : manifest.records()) {
    if (rows.emplace(r.source, r.split).second) {
      t.add(r.source, r.split, CountTable::kImages, 0);
      for (auto name : class_names()) t.add(r.source, r.split, std::string(name), 0);
    }
    t.add(r.source, r.split, CountTable::kImages, 1);
    if (!r.labels) continue;
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      if (r.labels->test(i)) t.add(r.source, r.split, std::string(class_names()[i]), 1);
    }
  }
  return t;
}

std::vector<std::string> structural_failures(const DatasetManifest& manifest) {
  std::vector<std::string> out;
  for (const auto& r : manifest.records()) {
    const std::string who = "record '" + r.id + "'";
    if (r.labels) {
      if (auto why = r.labels->violation(label_rules_for(r.source))) {
        out.push_back(who + ": invalid labels (" + *why + ")");
      }
    }
    if (r.split == Split::Unassigned) {
      if (r.review_status == ReviewStatus::Accepted) out.push_back(who + ": accepted but unassigned");
      continue;
    }
    if (!r.labels) out.push_back(who + ": in " + std::string(to_string(r.split)) + " split without labels");
    if (r.review_status != ReviewStatus::Accepted) {
      out.push_back(who + ": in " + std::string(to_string(r.split)) + " split with review status " +
                    std::string(to_string(r.review_status)));
    }
    if (r.source == SourceType::EBook && r.split == Split::Train) {
      out.push_back(who + ": e-book record in train split");
    }
  }
  return out;
}

ValidationReport validate_manifest(const DatasetManifest& manifest, const CountTable& expected) {
  for (const auto& r : manifest.records()) {
    if (r.labels && r.labels->none()) {
      throw Error("manifest", "malformed", "record '" + r.id + "' has an empty label vector");
    }
  }
  const CountTable actual = summarize(manifest);
  std::set<CountTable::Key> keys;
  for (const auto& [k, v] : expected.cells()) keys.insert(k);
  for (const auto& [k, v] : actual.cells()) keys.insert(k);

  ValidationReport report;
  for (const auto& key : keys) {
    const auto& [source, split, column] = key;
    // Unassigned rows hold audit records outside the dataset; accepted ones are flagged structurally.
    if (split == Split::Unassigned) continue;
    report.cells.push_back({source, split, column, expected.get(source, split, column),
                            actual.get(source, split, column)});
  }
  report.structural_failures = structural_failures(manifest);
  report.pass = report.structural_failures.empty() && report.failed_cells().empty();
  return report;
}

std::vector<CellCheck> ValidationReport::failed_cells() const {
  std::vector<CellCheck> out;
  for (const auto& c : cells) {
    if (!c.pass()) out.push_back(c);
  }
  return out;
}

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << ": " << cells.size() << " cells, " << failed_cells().size()
     << " mismatched, " << structural_failures.size() << " structural failures\n";
  for (const auto& c : failed_cells()) {
    os << "  cell " << to_string(c.source) << "/" << to_string(c.split) << "/" << c.column
       << ": expected " << c.expected << ", actual " << c.actual << " (delta " << (c.delta() > 0 ? "+" : "")
       << c.delta() << ")\n";
  }
  for (const auto& s : structural_failures) os << "  " << s << "\n";
  return os.str();
}

}  // namespace eoescope
