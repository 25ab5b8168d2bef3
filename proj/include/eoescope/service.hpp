#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "eoescope/classifier.hpp"
#include "eoescope/review.hpp"

namespace httplib {
class Server;
}

namespace eoescope {

inline constexpr int kApiSchemaVersion = 1;
inline constexpr std::string_view kTokenHeader = "X-Eoescope-Token";
inline constexpr std::string_view kTokenEnv = "EOESCOPE_TOKEN";

struct ServiceOptions {
  std::optional<std::filesystem::path> manifest;
  std::filesystem::path verdict_log;  // defaults to <manifest>.verdicts.jsonl
  std::optional<std::filesystem::path> checkpoint;
  std::string token;  // empty = no authentication
  std::string host = "127.0.0.1";
  int port = 8080;
  std::uint64_t seed = 0;
  double overlay_alpha = 0.5;
};

/// `token` unless the environment variable EOESCOPE_TOKEN is set.
std::string resolve_token(const std::string& token);

/// HTTP front end: GET /queue, POST /verdict, POST /predict, GET /image/{id},
/// GET /overlay/{hash}, GET /metrics, GET /healthz.
class ReviewService {
 public:
  explicit ReviewService(ServiceOptions options);
  ~ReviewService();

  /// Binds (port 0 picks a free port) and returns the bound port.
  int bind();
  /// Blocks serving requests until stop().
  void run();
  void stop();

  ReviewStore* store() { return store_.get(); }
  const ServiceOptions& options() const { return options_; }

 private:
  void routes();
  std::filesystem::path resolve_uri(const std::string& uri) const;

  ServiceOptions options_;
  std::unique_ptr<ReviewStore> store_;
  std::optional<ModelCheckpoint> checkpoint_;
  std::string model_version_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex overlay_mutex_;
  std::map<std::string, std::vector<std::uint8_t>> overlays_;
  std::mutex model_mutex_;
};

}  // namespace eoescope
