#include <httplib.h>
#include <json.hpp>

#include "solinv/tot.hpp"

namespace solinv::tot {

std::string remote_ask(const std::string& endpoint, const std::string& api_key, int timeout_secs,
                       const std::string& prompt) {
  // endpoint: scheme://host[:port][/path]
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw std::runtime_error("TOT_ENDPOINT needs a scheme: " + endpoint);
  const auto path_start = endpoint.find('/', scheme_end + 3);
  const std::string base = endpoint.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : endpoint.substr(path_start);

  httplib::Client cli(base);
  if (!cli.is_valid()) throw std::runtime_error("unsupported endpoint " + endpoint);
  cli.set_connection_timeout(timeout_secs, 0);
  cli.set_read_timeout(timeout_secs, 0);
  cli.set_write_timeout(timeout_secs, 0);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  const nlohmann::json body{{"prompt", prompt}};
  auto res = cli.Post(path, headers, body.dump(), "application/json");
  if (!res) throw std::runtime_error("request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw std::runtime_error("endpoint answered HTTP " + std::to_string(res->status));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception&) {
    throw AnswerParseError("response is not JSON", res->body.substr(0, 200));
  }
  if (!j.is_object() || !j.contains("answer") || !j["answer"].is_string()) {
    throw AnswerParseError("response lacks a string \"answer\"", res->body.substr(0, 200));
  }
  return j["answer"].get<std::string>();
}

}  // namespace solinv::tot
