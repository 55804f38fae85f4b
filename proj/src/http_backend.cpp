#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "codeseq/agents.hpp"

namespace codeseq {

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw std::invalid_argument("HttpBackend: empty base_url");
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }
}

std::string HttpBackend::send(const ChatRequest& request) {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  nlohmann::json body = {
      {"model", config_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.text}}})},
      {"temperature", request.temperature},
  };

  auto result = client.Post(config_.path, headers, body.dump(), "application/json");
  if (!result) {
    throw TransportError("HTTP request to " + config_.base_url + " failed: " + httplib::to_string(result.error()));
  }
  const int status = result->status;
  if (status == 429 || status >= 500) {
    throw TransportError("HTTP " + std::to_string(status) + " from " + config_.base_url);
  }
  if (status != 200) {
    throw AgentError("HTTP " + std::to_string(status) + " from " + config_.base_url + ": " + result->body.substr(0, 200));
  }

  try {
    const auto reply = nlohmann::json::parse(result->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw AgentError(std::string("malformed chat completion response: ") + e.what());
  }
}

}  // namespace codeseq
