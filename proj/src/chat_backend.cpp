// SPDX-License-Identifier: Apache-2.0
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <json.hpp>

#include "numrep/elicitation.hpp"
#include "numrep/error.hpp"

namespace numrep::elicit {

void EndpointConfig::validate() const {
  if (max_parallel < 1) throw InvalidArgument("max_parallel must be >= 1");
  if (retry_limit < 0) throw InvalidArgument("retry_limit must be >= 0");
  if (model_id.empty()) throw InvalidArgument("model_id is required");
  if (!base_url.starts_with("http://") && !base_url.starts_with("https://")) {
    throw InvalidArgument("base_url must start with http:// or https://");
  }
}

ChatCompletionBackend::ChatCompletionBackend(EndpointConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto scheme_end = config_.base_url.find("://") + 3;
  const auto path_start = config_.base_url.find('/', scheme_end);
  scheme_host_port_ = config_.base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (!config_.api_key_env_var.empty()) {
    if (const char* key = std::getenv(config_.api_key_env_var.c_str())) api_key_ = key;
  }
}

std::string ChatCompletionBackend::request_body(const Query& query) const {
  nlohmann::json body = {
      {"model", config_.model_id},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", query.prompt}}})},
      {"temperature", query.temperature},
      {"max_tokens", query.max_tokens > 0 ? query.max_tokens : config_.max_tokens},
  };
  return body.dump();
}

std::string ChatCompletionBackend::parse_response_body(std::string_view body) {
  const auto json = nlohmann::json::parse(body, nullptr, false);
  if (json.is_discarded()) throw Error("chat completion: response is not JSON");
  try {
    return json.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("chat completion: unexpected response shape: ") + e.what());
  }
}

std::string ChatCompletionBackend::complete(const Query& query) {
  httplib::Client client(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(path_prefix_ + "/chat/completions", headers, request_body(query), "application/json");
  if (!res) throw Error("chat completion: transport error: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw Error("chat completion: HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  return parse_response_body(res->body);
}

}  // namespace numrep::elicit
