#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "eoescope/manifest.hpp"

namespace eoescope {

/// Per (source, split) image counts and per (source, split, class) label
/// counts. Absent cells read as zero.
class CountTable {
 public:
  using Key = std::tuple<SourceType, Split, std::string>;  // column: "images" or a class name
  static constexpr const char* kImages = "images";

  void set(SourceType source, Split split, const std::string& column, long count);
  void add(SourceType source, Split split, const std::string& column, long delta);
  long get(SourceType source, Split split, const std::string& column) const;

  long images(SourceType source, Split split) const { return get(source, split, kImages); }
  long label(SourceType source, Split split, ClassId id) const {
    return get(source, split, std::string(class_name(id)));
  }

  /// Sum of a column over sources and/or splits (nullopt = all).
  long total(std::optional<SourceType> source, std::optional<Split> split,
             const std::string& column) const;

  const std::map<Key, long>& cells() const { return cells_; }

  /// Cells of both tables merged; throws if the same cell appears in both with different values.
  static CountTable merge(const CountTable& a, const CountTable& b);

  friend bool operator==(const CountTable& a, const CountTable& b);

 private:
  std::map<Key, long> cells_;
};

/// Expected counts of the EoE dataset (site, web-mined and e-book rows).
const CountTable& published_eoe_counts();
/// Expected counts of the public upper-GI dataset (kvasir rows).
const CountTable& published_upper_gi_counts();

CountTable summarize(const DatasetManifest& manifest);

struct CellCheck {
  SourceType source;
  Split split;
  std::string column;
  long expected = 0;
  long actual = 0;
  bool pass() const { return expected == actual; }
  long delta() const { return actual - expected; }
};

struct ValidationReport {
  std::vector<CellCheck> cells;
  std::vector<std::string> structural_failures;
  bool pass = false;

  std::vector<CellCheck> failed_cells() const;
  std::string to_text() const;
};

/// Compares the manifest's actual counts against `expected` over the union of
/// both tables' cells and checks structural invariants. Mismatches are report
/// content; a record with malformed labels throws.
ValidationReport validate_manifest(const DatasetManifest& manifest, const CountTable& expected);

/// Structural invariant violations (split/label/status/e-book rules), one line each.
std::vector<std::string> structural_failures(const DatasetManifest& manifest);

}  // namespace eoescope
