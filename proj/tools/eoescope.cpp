// eoescope command-line front end.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "eoescope/classifier.hpp"
#include "eoescope/counts.hpp"
#include "eoescope/error.hpp"
#include "eoescope/evaluation.hpp"
#include "eoescope/http_sources.hpp"
#include "eoescope/ingestion.hpp"
#include "eoescope/rollout.hpp"
#include "eoescope/service.hpp"
#include "eoescope/split.hpp"

namespace fs = std::filesystem;
using namespace eoescope;
using nlohmann::json;

namespace {

DatasetManifest load_or_empty(const fs::path& path) {
  return fs::exists(path) ? load_manifest(path) : DatasetManifest{};
}

fs::path resolve_record_path(const fs::path& manifest_path, const std::string& uri) {
  fs::path p(uri);
  if (p.is_absolute() || fs::exists(p)) return p;
  return manifest_path.parent_path() / p;
}

RecordLoader loader_for(const fs::path& manifest_path) {
  return [manifest_path](const ImageRecord& r) { return read_file(resolve_record_path(manifest_path, r.uri)); };
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cli", "io", "cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

std::vector<Fingerprint> record_fingerprints(const DatasetManifest& m) {
  std::vector<Fingerprint> fps;
  for (const auto& r : m.records()) fps.push_back({r.byte_hash, r.phash});
  return fps;
}

// -- ingest ------------------------------------------------------------------

struct IngestArgs {
  fs::path manifest, store, config, ebook, kvasir, folder_map, out;
  std::string query, source = "search-engine";
};

int run_ingest(const IngestArgs& a) {
  const CrawlConfig cfg = a.config.empty() ? CrawlConfig{} : load_crawl_config(a.config);
  DatasetManifest manifest = load_or_empty(a.manifest);
  const ImageStore store(a.store.empty() ? a.manifest.parent_path() / "images" : a.store);
  const int modes = !a.query.empty() + !a.ebook.empty() + !a.kvasir.empty();
  if (modes != 1) throw Error("cli", "bad-arguments", "give exactly one of --query, --ebook, --kvasir");

  json summary;
  std::vector<CandidateImage> candidates;
  std::vector<std::string> warnings;
  if (!a.query.empty()) {
    FetchQuery q;
    q.text = a.query;
    q.kind = parse_source_kind(a.source);
    q.max_results = cfg.max_results;
    q.rate_limit = cfg.rate_limit;
    q.parallelism = cfg.parallelism;
    q.caption_patterns = cfg.caption_patterns;
    const char* key = std::getenv(cfg.credentials_env.c_str());
    std::unique_ptr<SourceClient> client;
    if (q.kind == SourceKind::OpenAccessApi) {
      client = std::make_unique<OpenIClient>(cfg.open_access_base_url, key ? key : "");
    } else if (q.kind == SourceKind::SearchEngine) {
      if (cfg.search_endpoint.empty()) throw Error("cli", "bad-config", "search_engine.endpoint is not configured");
      client = std::make_unique<JsonSearchClient>(cfg.search_endpoint, cfg.search_results_path, cfg.search_url_field,
                                                  key ? key : "");
    } else {
      throw Error("cli", "bad-arguments", "--query needs --source search-engine or open-access-api");
    }
    SystemClock clock;
    FetchResult fetched = fetch(q, *client, clock);
    candidates = std::move(fetched.candidates);
    warnings = std::move(fetched.warnings);
  } else if (!a.ebook.empty()) {
    BundleDocument doc(a.ebook);
    EbookExtraction ex = extract_ebook_figures(doc, cfg.caption_patterns);
    candidates = std::move(ex.figures);
    warnings = std::move(ex.notes);
  } else {
    const auto map = a.folder_map.empty() ? default_kvasir_folder_map() : load_folder_map(a.folder_map);
    ImportResult imported = import_public_dataset(a.kvasir, map);
    std::vector<Fingerprint> fps;
    for (const auto& r : imported.records) fps.push_back({r.byte_hash, r.phash});
    const DedupResult d = dedup(fps, manifest, cfg.hamming_threshold);
    std::vector<ImageRecord> keep;
    std::vector<std::string> reserved;
    for (auto i : d.kept) {
      ImageRecord r = imported.records[i];
      r.id = unique_record_id(manifest, r.id, reserved);
      reserved.push_back(r.id);
      keep.push_back(std::move(r));
    }
    manifest = manifest.with_appended(std::move(keep));
    summary = {{"added", d.kept.size()}, {"duplicates", d.dropped.size()}, {"warnings", imported.warnings}};
  }
  if (a.kvasir.empty()) {
    std::vector<Fingerprint> fps;
    for (const auto& c : candidates) fps.push_back(fingerprint(c.bytes));
    const DedupResult d = dedup(fps, manifest, cfg.hamming_threshold);
    std::vector<CandidateImage> keep;
    for (auto i : d.kept) keep.push_back(std::move(candidates[i]));
    manifest = add_unreviewed(keep, manifest, store);
    summary = {{"added", keep.size()}, {"duplicates", d.dropped.size()}, {"warnings", warnings}};
  }
  save_manifest(manifest, a.out.empty() ? a.manifest : a.out);
  std::cout << summary.dump() << "\n";
  return 0;
}

// -- dedup -------------------------------------------------------------------

int run_dedup(const fs::path& manifest_path, const fs::path& out, int threshold) {
  const DatasetManifest m = load_manifest(manifest_path);
  const auto fps = record_fingerprints(m);
  const DedupResult d = dedup(fps, DatasetManifest{}, threshold);
  std::vector<ImageRecord> keep;
  for (auto i : d.kept) keep.push_back(m.records()[i]);
  save_manifest(DatasetManifest(std::move(keep), m.split_spec()), out.empty() ? manifest_path : out);
  json dropped = json::array();
  for (const auto& drop : d.dropped) {
    const std::string matched = drop.matched.rfind("candidate:", 0) == 0
                                    ? m.records()[std::stoul(drop.matched.substr(10))].id
                                    : drop.matched;
    dropped.push_back({{"id", m.records()[drop.index].id}, {"reason", drop.reason}, {"matched", matched},
                       {"distance", drop.distance}});
  }
  std::cout << json{{"kept", d.kept.size()}, {"dropped", dropped}}.dump() << "\n";
  return 0;
}

// -- prescreen ---------------------------------------------------------------

int run_prescreen(const fs::path& manifest_path, const fs::path& out, const fs::path& checkpoint,
                  std::optional<double> constant, double threshold) {
  const DatasetManifest m = load_manifest(manifest_path);
  std::optional<ModelCheckpoint> ckpt;
  std::unique_ptr<RelevanceScorer> scorer;
  if (!checkpoint.empty()) {
    ckpt = load_checkpoint(checkpoint);
    scorer = std::make_unique<ClassifierRelevanceScorer>(ckpt->model);
  } else if (constant) {
    scorer = std::make_unique<ConstantScorer>(*constant);
  } else {
    throw Error("cli", "bad-arguments", "prescreen needs --checkpoint or --constant");
  }
  std::vector<std::string> ids;
  std::vector<CandidateImage> candidates;
  for (const auto& r : m.records()) {
    if (r.source != SourceType::WebMined || r.review_status != ReviewStatus::Unreviewed) continue;
    CandidateImage c;
    c.bytes = read_file(resolve_record_path(manifest_path, r.uri));
    c.locator = r.uri;
    ids.push_back(r.id);
    candidates.push_back(std::move(c));
  }
  const auto results = prescreen(candidates, *scorer, threshold);
  save_manifest(apply_prescreen(m, ids, results), out.empty() ? manifest_path : out);
  std::size_t passed = 0;
  for (const auto& r : results) passed += r.pass;
  std::cout << json{{"scored", results.size()}, {"passed", passed}, {"model", scorer->version()}}.dump() << "\n";
  return 0;
}

// -- split -------------------------------------------------------------------

int run_split(const fs::path& manifest_path, const fs::path& out, const std::string& ratios, std::uint64_t seed) {
  const DatasetManifest m = load_manifest(manifest_path);
  const SplitOutcome s = assign_splits(m, SplitSpec::parse_ratios(ratios, seed));
  save_manifest(s.manifest, out.empty() ? manifest_path : out);
  for (const auto& note : s.notes) std::cerr << "note: " << note << "\n";
  json rows = json::object();
  const CountTable counts = summarize(s.manifest);
  for (const auto& [key, count] : counts.cells()) {
    const auto& [source, split, column] = key;
    if (column != CountTable::kImages) continue;
    rows[std::string(to_string(source))][std::string(to_string(split))] = count;
  }
  std::cout << rows.dump() << "\n";
  return 0;
}

// -- train -------------------------------------------------------------------

struct TrainArgs {
  fs::path manifest, out, pretrained;
  std::string preset = "toy";
  std::optional<int> epochs, batch_size, image_size, patch_size, embed_dim, depth, heads, mlp_ratio;
  std::optional<double> learning_rate, stop_at_f1, threshold, max_positive_weight;
  std::vector<double> mean, stdev;
  std::uint64_t seed = 0;
  bool no_augment = false, no_distillation = false, no_positive_weighting = false;
  AugmentationPolicy policy;
};

int run_train(const TrainArgs& a) {
  ClassifierConfig cfg = a.preset == "deit-small" ? ClassifierConfig::deit_small() : ClassifierConfig::toy();
  if (a.preset != "toy" && a.preset != "deit-small") throw Error("cli", "bad-arguments", "unknown preset " + a.preset);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.image_size) cfg.image_size = *a.image_size;
  if (a.patch_size) cfg.patch_size = *a.patch_size;
  if (a.embed_dim) cfg.embed_dim = *a.embed_dim;
  if (a.depth) cfg.depth = *a.depth;
  if (a.heads) cfg.heads = *a.heads;
  if (a.mlp_ratio) cfg.mlp_ratio = *a.mlp_ratio;
  if (a.learning_rate) cfg.learning_rate = *a.learning_rate;
  if (a.threshold) cfg.threshold = *a.threshold;
  if (a.max_positive_weight) cfg.max_positive_weight = *a.max_positive_weight;
  if (!a.mean.empty()) std::copy(a.mean.begin(), a.mean.end(), cfg.mean.begin());
  if (!a.stdev.empty()) std::copy(a.stdev.begin(), a.stdev.end(), cfg.std.begin());
  if (a.no_distillation) cfg.distillation_token = false;
  if (a.no_positive_weighting) cfg.positive_weighting = false;
  cfg.seed = a.seed;
  cfg.validate();
  a.policy.validate();
  VisionTransformer model(cfg);
  initialize(model, cfg.seed);
  if (!a.pretrained.empty()) {
    const auto names = import_pretrained(model, a.pretrained);
    std::cerr << "imported " << names.size() << " pretrained tensors\n";
  }
  TrainOptions opts;
  opts.augment = !a.no_augment;
  opts.loader = loader_for(a.manifest);
  opts.stop_at_train_f1 = a.stop_at_f1;
  opts.on_epoch = [](const EpochStats& e) {
    json j = {{"epoch", e.epoch}, {"loss", e.loss}, {"train_f1", e.train_f1}};
    j["val_f1"] = e.val_f1 ? json(*e.val_f1) : json(nullptr);
    std::cerr << j.dump() << "\n";
  };
  const ModelCheckpoint ckpt = train(std::move(model), load_manifest(a.manifest), a.policy, opts);
  save_checkpoint(ckpt, a.out);
  std::cout << json{{"checkpoint", a.out.string()}, {"epochs", ckpt.history.size()}, {"best_epoch", ckpt.best_epoch},
                    {"model_version", model_version(ckpt.model)}}
                   .dump()
            << "\n";
  return 0;
}

// -- eval --------------------------------------------------------------------

std::string default_descriptor(const std::vector<SourceType>& sources) {
  std::string out;
  for (auto s : sources) out += (out.empty() ? "" : "+") + std::string(to_string(s));
  return out.empty() ? "model" : out;
}

int run_eval(const fs::path& checkpoint, const fs::path& predictions, const fs::path& manifest_path,
             const std::string& split, const fs::path& out, std::string descriptor) {
  const DatasetManifest m = load_manifest(manifest_path);
  const Split want = parse_split(split);
  std::vector<EvalPair> pairs;
  std::vector<SourceType> sources;
  if (!checkpoint.empty()) {
    const ModelCheckpoint ckpt = load_checkpoint(checkpoint);
    sources = ckpt.training_sources;
    for (const auto& r : m.records()) {
      if (r.split != want) continue;
      if (!r.labels) throw Error("evaluation", "unlabeled", "record '" + r.id + "' has no labels");
      const auto bytes = read_file(resolve_record_path(manifest_path, r.uri));
      const Prediction p = predict(ckpt.model, std::span<const std::uint8_t>(bytes), ckpt.config().threshold);
      pairs.push_back({r.id, *r.labels, p.probabilities, p.labels});
    }
  } else if (!predictions.empty()) {
    std::map<std::string, LabelVector> by_id;
    std::ifstream in(predictions);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (j.contains("training_sources")) {
        for (const auto& s : j["training_sources"]) sources.push_back(parse_source(s.get<std::string>()));
        continue;
      }
      LabelVector predicted;  // may be all-zero
      for (const auto& name : j.at("labels")) {
        const auto id = class_from_name(name.get<std::string>());
        if (!id) throw Error("taxonomy", "unknown-class", "unknown class '" + name.get<std::string>() + "'");
        predicted.set(*id);
      }
      by_id[j.at("id").get<std::string>()] = predicted;
    }
    for (const auto& r : m.records()) {
      if (r.split != want) continue;
      if (!r.labels) throw Error("evaluation", "unlabeled", "record '" + r.id + "' has no labels");
      auto it = by_id.find(r.id);
      if (it == by_id.end()) throw Error("evaluation", "missing-prediction", "no prediction for '" + r.id + "'");
      EvalPair p{r.id, *r.labels, {}, it->second};
      for (std::size_t k = 0; k < kNumClasses; ++k) p.probabilities[k] = it->second.test(k) ? 1.0 : 0.0;
      pairs.push_back(std::move(p));
    }
  } else {
    throw Error("cli", "bad-arguments", "eval needs --checkpoint or --predictions");
  }
  if (descriptor.empty()) descriptor = default_descriptor(sources);
  const EvalReport rep = report(pairs, descriptor, sources);
  if (!out.empty()) write_text(out, report_to_json(rep) + "\n");
  std::cout << format_table(std::span<const EvalReport>(&rep, 1));
  return 0;
}

// -- visualize ---------------------------------------------------------------

int run_visualize(const fs::path& image_path, const fs::path& checkpoint, const std::string& cls,
                  const std::string& mode, const fs::path& out, double alpha, bool distillation,
                  const fs::path& map_out) {
  const ModelCheckpoint ckpt = load_checkpoint(checkpoint);
  int target = -1;
  if (auto id = class_from_name(cls)) {
    target = static_cast<int>(*id);
  } else {
    try {
      target = std::stoi(cls);
    } catch (const std::exception&) {
      throw Error("rollout", "invalid-target", "unknown class '" + cls + "'");
    }
  }
  const Image image = decode_image(read_file(image_path));
  const ImageTensor input = preprocess(image, ckpt.config());
  const RolloutMap map = rollout(capture(ckpt.model, input, target), parse_rollout_mode(mode),
                                 distillation ? Readout::Distillation : Readout::Class);
  write_file(out, encode_png(render_overlay(fit_to_model(image, ckpt.config()), map, alpha)));
  if (!map_out.empty()) write_text(map_out, map_to_json(map) + "\n");
  if (map.warning) std::cerr << "warning: rollout: all-zero map\n";
  std::cout << json{{"overlay", out.string()}, {"class", class_names()[static_cast<std::size_t>(target)]},
                    {"mode", mode}, {"warning", map.warning}}
                   .dump()
            << "\n";
  return 0;
}

// -- report ------------------------------------------------------------------

int run_report(const std::vector<fs::path>& inputs, const fs::path& out) {
  std::vector<EvalReport> reports;
  for (const auto& p : inputs) reports.push_back(report_from_json(read_text(p)));
  const std::string table = format_table(reports);
  if (!out.empty()) write_text(out, table);
  std::cout << table;
  return 0;
}

// -- serve -------------------------------------------------------------------

ReviewService* g_service = nullptr;

int run_serve(ServiceOptions opts) {
  opts.token = resolve_token(opts.token);
  ReviewService service(std::move(opts));
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  const int port = service.bind();
  std::cout << json{{"listening", service.options().host + ":" + std::to_string(port)}}.dump() << std::endl;
  service.run();
  g_service = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eoescope: endoscopic image dataset, classifier and review toolkit"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "fetch, extract or import images into a manifest");
  c_ingest->add_option("--manifest", ingest.manifest, "manifest to extend (created if missing)")->required();
  c_ingest->add_option("--out", ingest.out, "output manifest (default: in place)");
  c_ingest->add_option("--store", ingest.store, "image store directory");
  c_ingest->add_option("--config", ingest.config, "crawl configuration (YAML)")->check(CLI::ExistingFile);
  c_ingest->add_option("--query", ingest.query, "search text");
  c_ingest->add_option("--source", ingest.source, "search-engine or open-access-api");
  c_ingest->add_option("--ebook", ingest.ebook, "e-book figure bundle (JSON)")->check(CLI::ExistingFile);
  c_ingest->add_option("--kvasir", ingest.kvasir, "public dataset root")->check(CLI::ExistingDirectory);
  c_ingest->add_option("--folder-map", ingest.folder_map, "folder to class map (YAML)")->check(CLI::ExistingFile);

  fs::path dd_manifest, dd_out;
  int dd_threshold = kDefaultHammingThreshold;
  auto* c_dedup = app.add_subcommand("dedup", "drop byte and near duplicates from a manifest");
  c_dedup->add_option("--manifest", dd_manifest)->required()->check(CLI::ExistingFile);
  c_dedup->add_option("--out", dd_out);
  c_dedup->add_option("--threshold", dd_threshold, "hamming distance treated as duplicate (inclusive)");

  fs::path ps_manifest, ps_out, ps_checkpoint;
  std::optional<double> ps_constant;
  double ps_threshold = kDefaultPrescreenThreshold;
  auto* c_prescreen = app.add_subcommand("prescreen", "score unreviewed web-mined records");
  c_prescreen->add_option("--manifest", ps_manifest)->required()->check(CLI::ExistingFile);
  c_prescreen->add_option("--out", ps_out);
  c_prescreen->add_option("--checkpoint", ps_checkpoint)->check(CLI::ExistingFile);
  c_prescreen->add_option("--constant", ps_constant, "fixed relevance score");
  c_prescreen->add_option("--threshold", ps_threshold);

  fs::path sp_manifest, sp_out;
  std::string sp_ratios = "7:1:2";
  std::uint64_t sp_seed = 0;
  auto* c_split = app.add_subcommand("split", "assign train/val/test splits");
  c_split->add_option("--manifest", sp_manifest)->required()->check(CLI::ExistingFile);
  c_split->add_option("--out", sp_out);
  c_split->add_option("--ratios", sp_ratios);
  c_split->add_option("--seed", sp_seed);

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "train the classifier on the train split");
  c_train->add_option("--manifest", tr.manifest)->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", tr.out, "checkpoint path")->required();
  c_train->add_option("--preset", tr.preset, "toy or deit-small");
  c_train->add_option("--epochs", tr.epochs);
  c_train->add_option("--batch-size", tr.batch_size);
  c_train->add_option("--image-size", tr.image_size);
  c_train->add_option("--patch-size", tr.patch_size);
  c_train->add_option("--embed-dim", tr.embed_dim);
  c_train->add_option("--depth", tr.depth);
  c_train->add_option("--heads", tr.heads);
  c_train->add_option("--mlp-ratio", tr.mlp_ratio);
  c_train->add_option("--lr", tr.learning_rate);
  c_train->add_option("--threshold", tr.threshold, "decision threshold stored in the checkpoint");
  c_train->add_option("--max-positive-weight", tr.max_positive_weight);
  c_train->add_option("--mean", tr.mean, "per-channel mean (3 values)")->expected(3);
  c_train->add_option("--std", tr.stdev, "per-channel std (3 values)")->expected(3);
  c_train->add_flag("--no-distillation", tr.no_distillation);
  c_train->add_flag("--no-positive-weighting", tr.no_positive_weighting);
  c_train->add_option("--flip-p", tr.policy.flip_probability);
  c_train->add_option("--max-rotation", tr.policy.max_rotation_degrees);
  c_train->add_option("--blur-p", tr.policy.blur_probability);
  c_train->add_option("--blur-kernel", tr.policy.blur_kernel);
  c_train->add_option("--blur-sigma-min", tr.policy.blur_sigma_min);
  c_train->add_option("--blur-sigma-max", tr.policy.blur_sigma_max);
  c_train->add_option("--brightness", tr.policy.brightness);
  c_train->add_option("--contrast", tr.policy.contrast);
  c_train->add_option("--saturation", tr.policy.saturation);
  c_train->add_option("--hue", tr.policy.hue);
  c_train->add_option("--stop-at-f1", tr.stop_at_f1, "stop once training micro-F1 reaches this value");
  c_train->add_option("--pretrained", tr.pretrained, "named-array weight file")->check(CLI::ExistingFile);
  c_train->add_option("--seed", tr.seed);
  c_train->add_flag("--no-augment", tr.no_augment);

  fs::path ev_checkpoint, ev_predictions, ev_manifest, ev_out;
  std::string ev_split = "test", ev_descriptor;
  auto* c_eval = app.add_subcommand("eval", "per-class F1 report on one split");
  c_eval->add_option("--checkpoint", ev_checkpoint)->check(CLI::ExistingFile);
  c_eval->add_option("--predictions", ev_predictions, "JSONL of {id, labels}")->check(CLI::ExistingFile);
  c_eval->add_option("--manifest", ev_manifest)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--split", ev_split);
  c_eval->add_option("--out", ev_out, "structured report (.eval)");
  c_eval->add_option("--descriptor", ev_descriptor, "row name");

  fs::path vz_image, vz_checkpoint, vz_out, vz_map;
  std::string vz_class, vz_mode = "eq1";
  double vz_alpha = 0.5;
  bool vz_dist = false;
  auto* c_vis = app.add_subcommand("visualize", "attention rollout overlay");
  c_vis->add_option("--image", vz_image)->required()->check(CLI::ExistingFile);
  c_vis->add_option("--checkpoint", vz_checkpoint)->required()->check(CLI::ExistingFile);
  c_vis->add_option("--class", vz_class, "class name or index")->required();
  c_vis->add_option("--mode", vz_mode, "eq1 or multiplicative");
  c_vis->add_option("--out", vz_out, "overlay PNG")->required();
  c_vis->add_option("--alpha", vz_alpha);
  c_vis->add_option("--map-out", vz_map, "raw map as JSON");
  c_vis->add_flag("--distillation-readout", vz_dist);

  std::vector<fs::path> rp_inputs;
  fs::path rp_out;
  auto* c_report = app.add_subcommand("report", "compare evaluation reports in table form");
  c_report->add_option("--compare", rp_inputs, ".eval files")->required()->check(CLI::ExistingFile);
  c_report->add_option("--out", rp_out);

  ServiceOptions sv;
  fs::path sv_manifest, sv_checkpoint;
  auto* c_serve = app.add_subcommand("serve", "run the review and prediction HTTP service");
  c_serve->add_option("--manifest", sv_manifest);
  c_serve->add_option("--checkpoint", sv_checkpoint)->check(CLI::ExistingFile);
  c_serve->add_option("--log", sv.verdict_log, "verdict log (default <manifest>.verdicts.jsonl)");
  c_serve->add_option("--host", sv.host);
  c_serve->add_option("--port", sv.port);
  c_serve->add_option("--token", sv.token, "shared token (EOESCOPE_TOKEN overrides)");
  c_serve->add_option("--seed", sv.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: cli: " << e.get_name() << ": " << e.what() << "\n";
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*c_ingest) return run_ingest(ingest);
    if (*c_dedup) return run_dedup(dd_manifest, dd_out, dd_threshold);
    if (*c_prescreen) return run_prescreen(ps_manifest, ps_out, ps_checkpoint, ps_constant, ps_threshold);
    if (*c_split) return run_split(sp_manifest, sp_out, sp_ratios, sp_seed);
    if (*c_train) return run_train(tr);
    if (*c_eval) return run_eval(ev_checkpoint, ev_predictions, ev_manifest, ev_split, ev_out, ev_descriptor);
    if (*c_vis) return run_visualize(vz_image, vz_checkpoint, vz_class, vz_mode, vz_out, vz_alpha, vz_dist, vz_map);
    if (*c_report) return run_report(rp_inputs, rp_out);
    if (*c_serve) {
      if (!sv_manifest.empty()) sv.manifest = sv_manifest;
      if (!sv_checkpoint.empty()) sv.checkpoint = sv_checkpoint;
      return run_serve(std::move(sv));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.module() << ": " << e.code() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: cli: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
