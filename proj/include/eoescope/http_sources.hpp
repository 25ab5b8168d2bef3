#pragma once

#include <string>
#include <vector>

#include "eoescope/ingestion.hpp"

namespace eoescope {

/// Splits "https://host:port/path?q" into ("https://host:port", "/path?q").
std::pair<std::string, std::string> split_url(const std::string& url);
std::string url_encode(const std::string& text);

/// NIH Open-i search API: GET {base}/api/search?query=..&m=1&n=..
/// returning {"list": [{"imgLarge": "/imgs/..."}]}.
class OpenIClient final : public SourceClient {
 public:
  explicit OpenIClient(std::string base_url, std::string api_key = {});
  std::vector<std::string> search(const std::string& text, std::size_t limit) override;
  Download download(const std::string& locator) override;
  std::string name() const override { return "open-i"; }

 private:
  std::string base_url_;
  std::string api_key_;
};

/// Generic keyword-search endpoint (search engines, social media gateways).
/// `endpoint` is a URL template with {query} and {limit}; the response is JSON
/// with an array at `results_path` (JSON pointer, empty = document root) whose
/// objects carry the media URL in `url_field`.
class JsonSearchClient final : public SourceClient {
 public:
  JsonSearchClient(std::string endpoint, std::string results_path, std::string url_field,
                   std::string api_key = {});
  std::vector<std::string> search(const std::string& text, std::size_t limit) override;
  Download download(const std::string& locator) override;
  std::string name() const override { return "json-search"; }

 private:
  std::string endpoint_;
  std::string results_path_;
  std::string url_field_;
  std::string api_key_;
};

}  // namespace eoescope
