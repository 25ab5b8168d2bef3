#include "eoescope/http_sources.hpp"

#include <httplib.h>

#include <json.hpp>

#include "eoescope/error.hpp"

namespace eoescope {

namespace {

[[noreturn]] void fail(const std::string& code, const std::string& message) {
  throw Error("ingestion", code, message);
}

httplib::Headers auth_headers(const std::string& key) {
  httplib::Headers h;
  if (!key.empty()) h.emplace("Authorization", "Bearer " + key);
  return h;
}

Download get(const std::string& url, const std::string& key) {
  auto [origin, path] = split_url(url);
  httplib::Client client(origin);
  client.set_follow_location(true);
  client.set_connection_timeout(10);
  client.set_read_timeout(30);
  auto res = client.Get(path, auth_headers(key));
  if (!res) fail("transport", "request to " + url + " failed: " + httplib::to_string(res.error()));
  if (res->status == 401 || res->status == 403) fail("auth-failed", "credentials rejected by " + origin);
  if (res->status != 200) fail("http-status", url + " returned HTTP " + std::to_string(res->status));
  Download d;
  d.bytes.assign(res->body.begin(), res->body.end());
  d.content_type = res->get_header_value("Content-Type");
  return d;
}

nlohmann::json get_json(const std::string& url, const std::string& key) {
  auto d = get(url, key);
  try {
    return nlohmann::json::parse(d.bytes.begin(), d.bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail("bad-response", "search response from " + url + " is not JSON");
  }
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

}  // namespace

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) fail("bad-url", "URL without scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

std::string url_encode(const std::string& text) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

OpenIClient::OpenIClient(std::string base_url, std::string api_key)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)) {}

std::vector<std::string> OpenIClient::search(const std::string& text, std::size_t limit) {
  const auto j = get_json(base_url_ + "/api/search?query=" + url_encode(text) + "&m=1&n=" + std::to_string(limit),
                          api_key_);
  std::vector<std::string> out;
  for (const auto& item : j.value("list", nlohmann::json::array())) {
    if (item.contains("imgLarge") && item["imgLarge"].is_string()) out.push_back(base_url_ + item["imgLarge"].get<std::string>());
    if (out.size() >= limit) break;
  }
  return out;
}

Download OpenIClient::download(const std::string& locator) { return get(locator, api_key_); }

JsonSearchClient::JsonSearchClient(std::string endpoint, std::string results_path, std::string url_field,
                                   std::string api_key)
    : endpoint_(std::move(endpoint)),
      results_path_(std::move(results_path)),
      url_field_(std::move(url_field)),
      api_key_(std::move(api_key)) {
  if (endpoint_.empty()) fail("bad-config", "search endpoint is not configured");
}

std::vector<std::string> JsonSearchClient::search(const std::string& text, std::size_t limit) {
  const auto url = replace_all(replace_all(endpoint_, "{query}", url_encode(text)), "{limit}", std::to_string(limit));
  const auto j = get_json(url, api_key_);
  nlohmann::json results;
  try {
    results = results_path_.empty() ? j : j.at(nlohmann::json::json_pointer(results_path_));
  } catch (const nlohmann::json::exception&) {
    fail("bad-response", "search response has no array at '" + results_path_ + "'");
  }
  std::vector<std::string> out;
  for (const auto& item : results) {
    if (item.is_object() && item.contains(url_field_)) out.push_back(item[url_field_].get<std::string>());
    if (out.size() >= limit) break;
  }
  return out;
}

Download JsonSearchClient::download(const std::string& locator) { return get(locator, api_key_); }

}  // namespace eoescope
