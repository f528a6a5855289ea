#include <cstdlib>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "choicesql/translate.hpp"

namespace choicesql {

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

}  // namespace

LiveBackendConfig LiveBackendConfig::from_env() {
  LiveBackendConfig c;
  c.endpoint = env_or("CHOICESQL_LLM_ENDPOINT", "https://api.openai.com/v1/completions");
  c.model = env_or("CHOICESQL_LLM_MODEL", c.model);
  c.api_key = env_or("CHOICESQL_LLM_API_KEY", "");
  return c;
}

LiveBackend::LiveBackend(LiveBackendConfig config) : config_(std::move(config)) {}

std::string LiveBackend::complete(const std::string& prompt, int max_tokens, double temperature) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, url))
    throw BackendUnavailable("invalid completion endpoint: " + config_.endpoint);
  const std::string path = m[2].matched ? m[2].str() : "/";

  httplib::Client client(m[1].str());
  client.set_connection_timeout(config_.timeout_seconds);
  client.set_read_timeout(config_.timeout_seconds);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  nlohmann::json body = {{"model", config_.model},
                         {"prompt", prompt},
                         {"max_tokens", max_tokens},
                         {"temperature", temperature},
                         {"stop", {"\nNL:", "\n###"}}};
  const auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) throw BackendUnavailable("completion request failed: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw BackendUnavailable("completion endpoint returned HTTP " + std::to_string(res->status));
  try {
    const auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendUnavailable(std::string("unexpected completion response: ") + e.what());
  }
}

}  // namespace choicesql
