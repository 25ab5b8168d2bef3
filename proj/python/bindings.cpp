// Python bindings over the core library.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "eoescope/classifier.hpp"
#include "eoescope/counts.hpp"
#include "eoescope/error.hpp"
#include "eoescope/evaluation.hpp"
#include "eoescope/hashing.hpp"
#include "eoescope/manifest.hpp"
#include "eoescope/rollout.hpp"
#include "eoescope/split.hpp"
#include "eoescope/taxonomy.hpp"

namespace py = pybind11;
using namespace eoescope;

namespace {

std::vector<std::uint8_t> to_bytes(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

std::vector<EvalPair> to_pairs(const std::vector<std::vector<int>>& truth, const std::vector<std::vector<int>>& pred) {
  if (truth.size() != pred.size()) throw Error("evaluation", "length-mismatch", "truth and predictions differ in length");
  std::vector<EvalPair> pairs;
  for (std::size_t i = 0; i < truth.size(); ++i) pairs.push_back(make_pair(std::to_string(i), truth[i], pred[i]));
  return pairs;
}

py::dict metrics_dict(const ClassMetrics& m) {
  py::dict d;
  d["tp"] = m.counts.tp;
  d["fp"] = m.counts.fp;
  d["fn"] = m.counts.fn;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  return d;
}

/// Count cells as {(source, split, column): count}.
py::dict counts_dict(const CountTable& t) {
  py::dict d;
  for (const auto& [key, value] : t.cells()) {
    const auto& [s, sp, col] = key;
    d[py::make_tuple(std::string(to_string(s)), std::string(to_string(sp)), col)] = value;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Endoscopic image dataset, classifier and attention rollout core";

  py::register_exception<Error>(m, "EoescopeError", PyExc_RuntimeError);

  m.attr("TAXONOMY_VERSION") = std::string(kTaxonomyVersion);
  m.def("class_names", [] {
    std::vector<std::string> out;
    for (auto n : class_names()) out.emplace_back(n);
    return out;
  });
  m.def(
      "encode_labels", [](const std::vector<std::string>& names) { return encode_labels(names).to_array(); },
      py::arg("names"), "Validated 0/1 label vector in taxonomy order.");
  m.def(
      "decode_labels",
      [](const std::array<int, kNumClasses>& values) { return decode_labels(LabelVector::from_array(values)); },
      py::arg("values"));

  m.def(
      "manifest_counts", [](const std::filesystem::path& path) { return counts_dict(summarize(load_manifest(path))); },
      py::arg("path"));
  m.def("published_counts", [] {
    return counts_dict(CountTable::merge(published_eoe_counts(), published_upper_gi_counts()));
  });
  m.def(
      "validate_manifest",
      [](const std::filesystem::path& path) {
        const auto expected = CountTable::merge(published_eoe_counts(), published_upper_gi_counts());
        const auto r = validate_manifest(load_manifest(path), expected);
        return py::make_tuple(r.pass, r.to_text());
      },
      py::arg("path"), "(pass, report text) against the published counts.");
  m.def(
      "assign_splits",
      [](const std::filesystem::path& path, const std::filesystem::path& out, const std::string& ratios,
         std::uint64_t seed) {
        const auto s = assign_splits(load_manifest(path), SplitSpec::parse_ratios(ratios, seed));
        save_manifest(s.manifest, out);
        return s.notes;
      },
      py::arg("path"), py::arg("out"), py::arg("ratios") = "7:1:2", py::arg("seed") = 0);

  m.def("f1", &f1, py::arg("tp"), py::arg("fp"), py::arg("fn"));
  m.def(
      "evaluate",
      [](const std::vector<std::vector<int>>& truth, const std::vector<std::vector<int>>& pred,
         const std::string& descriptor) {
        const auto pairs = to_pairs(truth, pred);
        const auto r = report(pairs, descriptor);
        py::dict d;
        py::list classes;
        for (const auto& c : r.classes) classes.append(metrics_dict(c));
        d["descriptor"] = r.descriptor;
        d["classes"] = classes;
        d["eoe"] = metrics_dict(r.eoe);
        d["non_eoe"] = metrics_dict(r.non_eoe);
        d["micro"] = metrics_dict(r.micro);
        d["json"] = report_to_json(r);
        return d;
      },
      py::arg("truth"), py::arg("predicted"), py::arg("descriptor") = "model");
  m.def(
      "format_table",
      [](const std::vector<std::string>& report_json) {
        std::vector<EvalReport> reports;
        for (const auto& j : report_json) reports.push_back(report_from_json(j));
        return format_table(reports);
      },
      py::arg("reports"));

  m.def(
      "rollout",
      [](const std::vector<std::vector<Matrix>>& attention, const std::vector<std::vector<Matrix>>& gradients,
         int prefix_tokens, int grid_rows, int grid_cols, const std::string& mode) {
        AttentionTrace t;
        t.attention = attention;
        t.gradients = gradients;
        t.layout = {prefix_tokens, grid_rows, grid_cols};
        const auto map = rollout(t, parse_rollout_mode(mode));
        return py::make_tuple(map.grid, map.alphas, map.warning);
      },
      py::arg("attention"), py::arg("gradients"), py::arg("prefix_tokens"), py::arg("grid_rows"),
      py::arg("grid_cols"), py::arg("mode") = "eq1", "(grid, per-layer alphas, all-zero warning).");
  m.def("viridis", &viridis, py::arg("t"));

  m.def("sha256_hex", [](const py::bytes& b) { return sha256_hex(to_bytes(b)); });
  m.def("difference_hash", [](const py::bytes& b) { return difference_hash(to_bytes(b)); });

  m.def(
      "predict",
      [](const std::filesystem::path& checkpoint, const py::bytes& image) {
        const auto ckpt = load_checkpoint(checkpoint);
        const auto p = predict(ckpt.model, to_bytes(image), ckpt.config().threshold);
        return py::make_tuple(p.probabilities, decode_labels(p.labels));
      },
      py::arg("checkpoint"), py::arg("image"), "(probabilities, predicted class names).");
}
