// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "stratmem/gateway.hpp"

namespace stratmem {

struct HttpBackendOptions {
  std::string endpoint;  // full URL of a chat-completions style endpoint
  std::string model;
  std::string auth_token;  // sent as a bearer token when non-empty
  std::chrono::milliseconds timeout{60000};
  std::size_t max_in_flight = 4;
};

/// Generic JSON-over-HTTP chat backend.
///
/// Request: {"model", "messages": [{"role", "content"}...], "temperature", "max_tokens"}
/// with the system instruction as the leading "system" message.
/// Response: {"choices": [{"message": {"content": "..."}}]}.
/// Connection failures, 429 and 5xx are transient; other statuses are not.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(HttpBackendOptions options);

  std::string generate(const GenerationRequest& request) override;
  std::string id() const override { return "http:" + options_.model; }

  static nlohmann::json request_body(const GenerationRequest& request, const std::string& model);
  static std::string parse_response(const std::string& body);

 private:
  HttpBackendOptions options_;
  std::mutex mutex_;
  std::condition_variable slot_free_;
  std::size_t in_flight_ = 0;
};

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

ParsedUrl parse_url(const std::string& url);

/// POST helper shared by the HTTP model and embedding backends.
std::string http_post_json(const std::string& url, const std::string& body,
                           const std::string& auth_token, std::chrono::milliseconds timeout);

}  // namespace stratmem
