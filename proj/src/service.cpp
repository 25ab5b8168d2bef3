#include "eoescope/service.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "eoescope/error.hpp"
#include "eoescope/hashing.hpp"
#include "eoescope/rollout.hpp"

namespace eoescope {

using nlohmann::json;

std::string resolve_token(const std::string& token) {
  if (const char* env = std::getenv(std::string(kTokenEnv).c_str())) return env;
  return token;
}

namespace {

void send_json(httplib::Response& res, int status, json body) {
  body["schema_version"] = kApiSchemaVersion;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, {{"error", code}, {"message", message}});
}

json record_summary(const ImageRecord& r) {
  json j = {{"id", r.id},
            {"source", to_string(r.source)},
            {"review_status", to_string(r.review_status)},
            {"split", to_string(r.split)}};
  j["labels"] = r.labels ? json(decode_labels(*r.labels)) : json(nullptr);
  return j;
}

int status_for_review_error(const Error& e) {
  if (e.code() == "unknown-record") return 404;
  if (e.code() == "not-reviewable") return 409;
  if (e.code() == "invalid-labels") return 422;
  if (e.code() == "invalid-verdict") return 400;
  return 500;
}

std::optional<int> parse_class(const std::string& text) {
  if (text.empty()) return std::nullopt;
  if (auto id = class_from_name(text)) return static_cast<int>(*id);
  try {
    std::size_t used = 0;
    const int k = std::stoi(text, &used);
    if (used == text.size() && k >= 0 && k < static_cast<int>(kNumClasses)) return k;
  } catch (const std::exception&) {
  }
  throw Error("service", "invalid-class", "unknown class '" + text + "'");
}

}  // namespace

ReviewService::ReviewService(ServiceOptions options) : options_(std::move(options)) {
  if (options_.manifest && std::filesystem::exists(*options_.manifest)) {
    if (options_.verdict_log.empty()) {
      options_.verdict_log = *options_.manifest;
      options_.verdict_log += ".verdicts.jsonl";
    }
    store_ = std::make_unique<ReviewStore>(load_manifest(*options_.manifest), options_.verdict_log);
  }
  if (options_.checkpoint) {
    checkpoint_ = load_checkpoint(*options_.checkpoint);
    model_version_ = model_version(checkpoint_->model);
  }
  server_ = std::make_unique<httplib::Server>();
  routes();
}

ReviewService::~ReviewService() { stop(); }

int ReviewService::bind() {
  if (options_.port == 0) {
    options_.port = server_->bind_to_any_port(options_.host);
    if (options_.port < 0) throw Error("service", "bind-failed", "cannot bind " + options_.host);
  } else if (!server_->bind_to_port(options_.host, options_.port)) {
    throw Error("service", "bind-failed", "cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  return options_.port;
}

void ReviewService::run() { server_->listen_after_bind(); }

void ReviewService::stop() {
  if (server_) server_->stop();
}

std::filesystem::path ReviewService::resolve_uri(const std::string& uri) const {
  std::filesystem::path p(uri);
  if (p.is_absolute() || std::filesystem::exists(p) || !options_.manifest) return p;
  return options_.manifest->parent_path() / p;
}

void ReviewService::routes() {
  auto& s = *server_;
  const std::string token = options_.token;

  s.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
    if (token.empty() || req.path == "/healthz") return httplib::Server::HandlerResponse::Unhandled;
    if (req.get_header_value(std::string(kTokenHeader)) != token) {
      send_error(res, 401, "unauthorized", "missing or wrong " + std::string(kTokenHeader) + " header");
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });

  s.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}, {"manifest_loaded", store_ != nullptr},
                         {"checkpoint_loaded", checkpoint_.has_value()}});
  });

  s.Get("/queue", [this](const httplib::Request& req, httplib::Response& res) {
    if (!store_) return send_error(res, 503, "no-manifest", "no manifest loaded");
    std::size_t limit = 50;
    if (req.has_param("limit")) {
      try {
        const long long v = std::stoll(req.get_param_value("limit"));
        if (v < 0) throw std::invalid_argument("negative");
        limit = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        return send_error(res, 400, "invalid-limit", "limit must be a non-negative integer");
      }
    }
    json items = json::array();
    for (const auto& r : store_->queue(limit)) {
      json item = {{"id", r.id}, {"image_url", "/image/" + r.id}};
      auto get = [&](const char* key) -> json {
        auto it = r.provenance.find(key);
        return it == r.provenance.end() ? json(nullptr) : json(it->second);
      };
      const auto score = r.provenance.find("prescreen_score");
      item["prescreen_score"] = score == r.provenance.end() ? json(nullptr) : json(std::stod(score->second));
      item["caption"] = get("caption");
      item["query"] = get("query");
      item["locator"] = get("locator");
      const auto suggested = r.provenance.find("suggested_labels");
      json labels = json::array();
      if (suggested != r.provenance.end()) {
        std::string cur;
        for (char ch : suggested->second + ",") {
          if (ch == ',') {
            if (!cur.empty()) labels.push_back(cur);
            cur.clear();
          } else {
            cur += ch;
          }
        }
      }
      item["suggested_labels"] = labels;
      item["prediction"] = nullptr;
      items.push_back(item);
    }
    send_json(res, 200, {{"items", items}});
  });

  s.Post("/verdict", [this](const httplib::Request& req, httplib::Response& res) {
    if (!store_) return send_error(res, 503, "no-manifest", "no manifest loaded");
    try {
      const SubmitOutcome out = store_->submit(verdict_from_json(req.body));
      send_json(res, 200, {{"record", record_summary(out.record)},
                           {"superseded", out.superseded},
                           {"unchanged", out.unchanged}});
    } catch (const Error& e) {
      send_error(res, status_for_review_error(e), e.code(), e.what());
    }
  });

  s.Get(R"(/image/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    if (!store_) return send_error(res, 503, "no-manifest", "no manifest loaded");
    const auto record = store_->find(req.matches[1]);
    if (!record) return send_error(res, 404, "unknown-record", "no record '" + std::string(req.matches[1]) + "'");
    std::vector<std::uint8_t> bytes;
    try {
      bytes = read_file(resolve_uri(record->uri));
    } catch (const Error& e) {
      return send_error(res, 404, "image-missing", e.what());
    }
    const auto format = sniff_format(bytes);
    res.status = 200;
    res.set_content(std::string(bytes.begin(), bytes.end()),
                    std::string(format ? content_type(*format) : "application/octet-stream"));
  });

  s.Get(R"(/overlay/([0-9a-f]+)\.png)", [this](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(overlay_mutex_);
    const auto it = overlays_.find(req.matches[1]);
    if (it == overlays_.end()) return send_error(res, 404, "unknown-overlay", "no such overlay");
    res.status = 200;
    res.set_content(std::string(it->second.begin(), it->second.end()), "image/png");
  });

  s.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
    if (!store_) return send_error(res, 503, "no-manifest", "no manifest loaded");
    const auto m = store_->metrics();
    send_json(res, 200, {{"queue", m.queue}, {"accepted", m.accepted}, {"rejected", m.rejected},
                         {"verdicts", m.verdicts}});
  });

  s.Post("/predict", [this](const httplib::Request& req, httplib::Response& res) {
    if (!checkpoint_) return send_error(res, 503, "no-checkpoint", "no checkpoint loaded");
    if (!req.has_file("image")) return send_error(res, 400, "missing-image", "multipart field 'image' is required");
    const auto file = req.get_file_value("image");
    const std::vector<std::uint8_t> bytes(file.content.begin(), file.content.end());
    if (!sniff_format(bytes)) return send_error(res, 415, "unsupported-format", "upload is not PNG, JPEG or BMP");
    std::optional<int> target;
    try {
      if (req.has_file("class")) target = parse_class(req.get_file_value("class").content);
    } catch (const Error& e) {
      return send_error(res, 422, e.code(), e.what());
    }
    try {
      const auto& model = checkpoint_->model;
      const auto& cfg = model.config();
      const Image image = decode_image(bytes);
      const ImageTensor input = preprocess(image, cfg);
      json body;
      std::lock_guard lock(model_mutex_);
      const Prediction p = predict(model, input, cfg.threshold);
      json probs = json::object();
      for (std::size_t k = 0; k < kNumClasses; ++k) probs[std::string(class_names()[k])] = p.probabilities[k];
      body["probabilities"] = probs;
      body["labels"] = decode_labels(p.labels);
      body["threshold"] = cfg.threshold;
      body["model_version"] = model_version_;
      body["overlay_url"] = nullptr;
      if (target) {
        const RolloutMap map = rollout(capture(model, input, *target));
        const Image base = fit_to_model(image, cfg);
        const auto png = encode_png(render_overlay(base, map, options_.overlay_alpha));
        const std::string hash = sha256_hex(png);
        {
          std::lock_guard overlay_lock(overlay_mutex_);
          overlays_.emplace(hash, png);
        }
        body["overlay_url"] = "/overlay/" + hash + ".png";
        body["overlay"] = {{"class", class_names()[static_cast<std::size_t>(*target)]},
                           {"width", base.width},
                           {"height", base.height},
                           {"mode", to_string(map.mode)},
                           {"colormap", kOverlayColormap},
                           {"upsampling", kOverlayUpsampling},
                           {"alpha", options_.overlay_alpha},
                           {"warning", map.warning}};
      }
      send_json(res, 200, body);
    } catch (const Error& e) {
      const int status = e.code() == "unsupported-format" || e.code() == "decode-failed" ? 415 : 422;
      send_error(res, status, e.code(), e.what());
    }
  });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  });
}

}  // namespace eoescope
