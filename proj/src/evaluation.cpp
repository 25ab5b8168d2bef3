#include "eoescope/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "eoescope/error.hpp"

namespace eoescope {

namespace {

[[noreturn]] void fail(const std::string& code, const std::string& message) {
  throw Error("evaluation", code, message);
}

void require_pairs(std::span<const EvalPair> pairs) {
  if (pairs.empty()) fail("empty", "no evaluation pairs");
}

ClassMetrics metrics(const Confusion& c) {
  return {c, precision(c), recall(c), f1(c.tp, c.fp, c.fn)};
}

}  // namespace

EvalPair make_pair(std::string id, std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != kNumClasses || predicted.size() != kNumClasses) {
    fail("length-mismatch", "expected " + std::to_string(kNumClasses) + " entries, got " +
                                std::to_string(truth.size()) + " and " + std::to_string(predicted.size()));
  }
  EvalPair p;
  p.id = std::move(id);
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    p.truth.set(k, truth[k] != 0);
    p.predicted.set(k, predicted[k] != 0);
    p.probabilities[k] = predicted[k] != 0 ? 1.0 : 0.0;
  }
  return p;
}

Confusion confusion(std::span<const EvalPair> pairs, std::size_t class_index) {
  require_pairs(pairs);
  if (class_index >= kNumClasses) fail("invalid-class", "class index " + std::to_string(class_index));
  Confusion c;
  for (const auto& p : pairs) {
    const bool t = p.truth.test(class_index), y = p.predicted.test(class_index);
    c.tp += t && y;
    c.fp += !t && y;
    c.fn += t && !y;
  }
  return c;
}

double f1(long tp, long fp, long fn) {
  if (tp < 0 || fp < 0 || fn < 0) fail("negative-count", "confusion counts must be non-negative");
  const long denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double precision(const Confusion& c) {
  return c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

double recall(const Confusion& c) {
  return c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

BinaryScore aggregate_binary(std::span<const EvalPair> pairs, AggregateGroup group) {
  Confusion c;
  for (const auto& p : pairs) {
    const bool t = group == AggregateGroup::EoE ? p.truth.eoe_positive() : p.truth.non_eoe_positive();
    const bool y = group == AggregateGroup::EoE ? p.predicted.eoe_positive() : p.predicted.non_eoe_positive();
    c.tp += t && y;
    c.fp += !t && y;
    c.fn += t && !y;
  }
  return {c, f1(c.tp, c.fp, c.fn)};
}

BinaryScore micro(std::span<const EvalPair> pairs) {
  Confusion total;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    const Confusion c = confusion(pairs, k);
    total.tp += c.tp;
    total.fp += c.fp;
    total.fn += c.fn;
  }
  return {total, f1(total.tp, total.fp, total.fn)};
}

EvalReport report(std::span<const EvalPair> pairs, std::string descriptor, std::vector<SourceType> training_sources) {
  require_pairs(pairs);
  EvalReport r;
  r.descriptor = std::move(descriptor);
  r.training_sources = std::move(training_sources);
  r.pairs = pairs.size();
  for (std::size_t k = 0; k < kNumClasses; ++k) r.classes[k] = metrics(confusion(pairs, k));
  r.eoe = metrics(aggregate_binary(pairs, AggregateGroup::EoE).counts);
  r.non_eoe = metrics(aggregate_binary(pairs, AggregateGroup::NonEoE).counts);
  r.micro = metrics(micro(pairs).counts);
  return r;
}

const std::vector<std::string>& eoe_panel_columns() {
  static const std::vector<std::string> cols{"EoE", "Normal", "Edema", "Rings", "Exudates", "Furrows", "Stricture"};
  return cols;
}

const std::vector<std::string>& non_eoe_panel_columns() {
  static const std::vector<std::string> cols{"Non EoE", "Esophagitis", "Z-line", "Barretts", "Pylorus",
                                             "Retroflex Stomach"};
  return cols;
}

std::string format_percent(double fraction) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05.2f", fraction * 100.0);
  return buf;
}

namespace {

bool trained_on(const EvalReport& r, SourceType s) {
  return std::find(r.training_sources.begin(), r.training_sources.end(), s) != r.training_sources.end();
}

std::vector<double> panel_values(const EvalReport& r, bool eoe_panel) {
  std::vector<double> v;
  if (eoe_panel) {
    v.push_back(r.eoe.f1);
    for (std::size_t k = 0; k <= 5; ++k) v.push_back(r.classes[k].f1);
  } else {
    v.push_back(r.non_eoe.f1);
    for (std::size_t k = 6; k < kNumClasses; ++k) v.push_back(r.classes[k].f1);
  }
  return v;
}

void render_panel(std::ostringstream& out, std::span<const EvalReport> reports, bool eoe_panel) {
  const auto& names = eoe_panel ? eoe_panel_columns() : non_eoe_panel_columns();
  std::vector<std::vector<std::string>> rows;
  std::vector<std::vector<double>> values;
  for (const auto& r : reports) values.push_back(panel_values(r, eoe_panel));

  std::vector<std::string> header{"Model", "Site", "Web-mined"};
  header.insert(header.end(), names.begin(), names.end());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    std::vector<std::string> row{reports[i].descriptor, trained_on(reports[i], SourceType::Site) ? "x" : "",
                                 trained_on(reports[i], SourceType::WebMined) ? "x" : ""};
    for (std::size_t c = 0; c < names.size(); ++c) {
      std::string cell = format_percent(values[i][c]);
      if (reports.size() >= 2) {
        const std::string mine = cell;
        bool best = true;
        for (std::size_t j = 0; j < reports.size(); ++j) {
          if (j == i) continue;
          const std::string other = format_percent(values[j][c]);
          if (values[j][c] > values[i][c] || other == mine) {
            best = false;
          }
        }
        if (best) cell = "**" + cell + "**";
      }
      row.push_back(cell);
    }
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& row : rows) width[c] = std::max(width[c], row[c].size());
  }
  auto emit = [&](const std::vector<std::string>& row) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) line += "  ";
      const std::string pad(width[c] - row[c].size(), ' ');
      line += c == 0 ? row[c] + pad : pad + row[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << "\n";
  };
  emit(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << "\n";
  for (const auto& row : rows) emit(row);
}

}  // namespace

std::string format_table(std::span<const EvalReport> reports) {
  if (reports.empty()) fail("empty", "no reports to format");
  std::ostringstream out;
  out << "[EoE]\n";
  render_panel(out, reports, true);
  out << "\n[Non-EoE]\n";
  render_panel(out, reports, false);
  out << "\n";
  for (const auto& r : reports) {
    out << "micro-F1 (extension) " << r.descriptor << ": " << format_percent(r.micro.f1) << "\n";
  }
  out << "aggregate columns: " << reports.front().aggregate_rule << "\n";
  return out.str();
}

namespace {

nlohmann::json metrics_json(const ClassMetrics& m) {
  return {{"tp", m.counts.tp}, {"fp", m.counts.fp}, {"fn", m.counts.fn},
          {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

ClassMetrics metrics_from(const nlohmann::json& j) {
  ClassMetrics m;
  m.counts = {j.at("tp").get<long>(), j.at("fp").get<long>(), j.at("fn").get<long>()};
  m.precision = j.at("precision");
  m.recall = j.at("recall");
  m.f1 = j.at("f1");
  return m;
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  nlohmann::json classes = nlohmann::json::object();
  for (std::size_t k = 0; k < kNumClasses; ++k) classes[std::string(class_names()[k])] = metrics_json(r.classes[k]);
  nlohmann::json sources = nlohmann::json::array();
  for (auto s : r.training_sources) sources.push_back(to_string(s));
  nlohmann::json j = {{"format", "eoescope-eval"},
                      {"format_version", 1},
                      {"descriptor", r.descriptor},
                      {"training_sources", sources},
                      {"pairs", r.pairs},
                      {"classes", classes},
                      {"aggregates", {{"EoE", metrics_json(r.eoe)}, {"Non EoE", metrics_json(r.non_eoe)}}},
                      {"extensions", {{"micro", metrics_json(r.micro)}}},
                      {"metadata", {{"aggregate_rule", r.aggregate_rule}, {"taxonomy_version", kTaxonomyVersion}}}};
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  EvalReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "eoescope-eval") fail("parse-error", "not an evaluation report");
    r.descriptor = j.at("descriptor");
    for (const auto& s : j.at("training_sources")) r.training_sources.push_back(parse_source(s.get<std::string>()));
    r.pairs = j.at("pairs");
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      r.classes[k] = metrics_from(j.at("classes").at(std::string(class_names()[k])));
    }
    r.eoe = metrics_from(j.at("aggregates").at("EoE"));
    r.non_eoe = metrics_from(j.at("aggregates").at("Non EoE"));
    r.micro = metrics_from(j.at("extensions").at("micro"));
    r.aggregate_rule = j.at("metadata").at("aggregate_rule");
  } catch (const nlohmann::json::exception& e) {
    fail("parse-error", std::string("malformed evaluation report: ") + e.what());
  }
  return r;
}

}  // namespace eoescope
