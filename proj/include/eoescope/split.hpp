#pragma once

#include <string>
#include <vector>

#include "eoescope/manifest.hpp"

namespace eoescope {

struct SplitOutcome {
  DatasetManifest manifest;
  std::vector<std::string> notes;  // conditions worth logging, e.g. e-book strata
};

/// Stratified train/val/test assignment of every accepted record.
///
/// Strata are (source, exact label combination); strata smaller than three
/// fall back to (source, label group). Each stratum is shuffled with a
/// deterministic generator seeded from `spec.seed` and the stratum key, then
/// cut with largest-remainder rounding. E-book strata never receive train
/// records and are divided by the val:test ratio alone. Records that are not
/// accepted stay unassigned. Throws Error{"split","unlabeled"} when an
/// accepted record carries no labels.
SplitOutcome assign_splits(const DatasetManifest& manifest, const SplitSpec& spec);

/// Largest-remainder apportionment of n items over the given weights.
/// Ties in the fractional part go to the lower index.
std::vector<std::size_t> largest_remainder(std::size_t n, const std::vector<double>& weights);

}  // namespace eoescope
