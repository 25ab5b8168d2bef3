#include "eoescope/split.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "eoescope/error.hpp"
#include "eoescope/rng.hpp"

namespace eoescope {

std::vector<std::size_t> largest_remainder(std::size_t n, const std::vector<double>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> counts(weights.size(), 0);
  if (n == 0 || total <= 0.0) return counts;
  // Remainders are compared on a 1e-9 grid so that float noise in the quotas
  // cannot break exact ties.
  std::vector<std::pair<long long, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double quota = static_cast<double>(n) * weights[i] / total;
    counts[i] = static_cast<std::size_t>(std::floor(quota + 1e-9));
    assigned += counts[i];
    remainders.emplace_back(std::llround((quota - static_cast<double>(counts[i])) * 1e9), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];
  return counts;
}

namespace {

std::string label_key(const LabelVector& labels) { return labels.bits().to_string(); }

std::string group_key(const LabelVector& labels) {
  return std::string(group_name(labels.any_in(ClassGroup::NonEoE) ? ClassGroup::NonEoE : ClassGroup::EoE));
}

}  // namespace

SplitOutcome assign_splits(const DatasetManifest& manifest, const SplitSpec& spec) {
  const auto ratios = spec.normalized();
  std::vector<ImageRecord> records(manifest.records().begin(), manifest.records().end());

  // Exact (source, label combination) strata first.
  std::map<std::string, std::vector<std::size_t>> exact;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    if (r.review_status != ReviewStatus::Accepted) {
      r.split = Split::Unassigned;
      continue;
    }
    if (!r.labels || r.labels->none()) {
      throw Error("split", "unlabeled", "accepted record '" + r.id + "' has no labels");
    }
    exact[std::string(to_string(r.source)) + "|" + label_key(*r.labels)].push_back(i);
  }

  std::map<std::string, std::vector<std::size_t>> strata;
  for (auto& [key, members] : exact) {
    if (members.size() >= 3) {
      strata[key] = std::move(members);
      continue;
    }
    const auto& r = records[members.front()];
    auto& fallback = strata[std::string(to_string(r.source)) + "|group:" + group_key(*r.labels)];
    fallback.insert(fallback.end(), members.begin(), members.end());
  }

  SplitOutcome outcome{DatasetManifest{}, {}};
  for (auto& [key, members] : strata) {
    std::sort(members.begin(), members.end(),
              [&](std::size_t a, std::size_t b) { return records[a].id < records[b].id; });
    Rng rng(derive_seed(spec.seed, key));
    rng.shuffle(members.begin(), members.end());

    const bool ebook = records[members.front()].source == SourceType::EBook;
    std::vector<double> weights{ratios[0], ratios[1], ratios[2]};
    if (ebook) {
      weights[0] = 0.0;
      outcome.notes.push_back("stratum " + key + ": " + std::to_string(members.size()) +
                              " e-book records divided between val and test only");
    }
    const auto counts = largest_remainder(members.size(), weights);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t k = 0; k < counts[s]; ++k) records[members[pos++]].split = kAssignedSplits[s];
    }
  }
  outcome.manifest = DatasetManifest(std::move(records), spec);
  return outcome;
}

}  // namespace eoescope
