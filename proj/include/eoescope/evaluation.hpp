#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "eoescope/manifest.hpp"
#include "eoescope/taxonomy.hpp"

namespace eoescope {

struct EvalPair {
  std::string id;
  LabelVector truth;
  std::array<double, kNumClasses> probabilities{};
  LabelVector predicted;
};

/// Builds a pair from 0/1 arrays; throws Error{"evaluation","length-mismatch"}
/// unless both have 11 entries.
EvalPair make_pair(std::string id, std::span<const int> truth, std::span<const int> predicted);

struct Confusion {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  friend bool operator==(const Confusion&, const Confusion&) = default;
};

Confusion confusion(std::span<const EvalPair> pairs, std::size_t class_index);

/// 2tp / (2tp + fp + fn), 0 when the denominator is 0. Throws on negative counts.
double f1(long tp, long fp, long fn);
double precision(const Confusion& c);
double recall(const Confusion& c);

enum class AggregateGroup { EoE, NonEoE };

struct BinaryScore {
  Confusion counts;
  double f1 = 0.0;
};

/// EoE-positive: any of edema, rings, exudates, furrows, stricture.
/// Non-EoE-positive: any of the five non-EoE classes.
BinaryScore aggregate_binary(std::span<const EvalPair> pairs, AggregateGroup group);

/// Confusion summed over all classes and its F1.
BinaryScore micro(std::span<const EvalPair> pairs);

struct ClassMetrics {
  Confusion counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline constexpr std::string_view kAggregateRule = "any-positive binary reduction";

struct EvalReport {
  std::string descriptor;
  std::vector<SourceType> training_sources;
  std::size_t pairs = 0;
  std::array<ClassMetrics, kNumClasses> classes{};
  ClassMetrics eoe;
  ClassMetrics non_eoe;
  ClassMetrics micro;  // extension: not a column of the published table
  std::string aggregate_rule = std::string(kAggregateRule);
};

EvalReport report(std::span<const EvalPair> pairs, std::string descriptor,
                  std::vector<SourceType> training_sources = {});

/// Column headers of the two panels, in order.
const std::vector<std::string>& eoe_panel_columns();
const std::vector<std::string>& non_eoe_panel_columns();

/// Percent with two decimals, zero-padded to five characters ("00.00").
std::string format_percent(double fraction);

/// Two-panel plain-text table with one row per report. With two or more
/// reports the unique best cell of every column is wrapped in ** **.
std::string format_table(std::span<const EvalReport> reports);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

}  // namespace eoescope
