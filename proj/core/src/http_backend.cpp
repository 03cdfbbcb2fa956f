// SPDX-License-Identifier: Apache-2.0
#include "stratmem/http_backend.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "stratmem/error.hpp"

namespace stratmem {

ParsedUrl parse_url(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kInvalidConfig, "endpoint '" + url + "' is not an absolute URL");
  }
  const std::size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string http_post_json(const std::string& url, const std::string& body,
                           const std::string& auth_token, std::chrono::milliseconds timeout) {
  const ParsedUrl parsed = parse_url(url);
  httplib::Client client(parsed.scheme_host_port);
  if (!client.is_valid()) {
    throw TransportError("unsupported endpoint '" + url + "'", false);
  }
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!auth_token.empty()) headers.emplace("Authorization", "Bearer " + auth_token);

  auto res = client.Post(parsed.path, headers, body, "application/json");
  if (!res) {
    throw TransportError("request to " + url + " failed: " + httplib::to_string(res.error()), true);
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + url, true);
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + url + ": " + res->body,
                         false);
  }
  return res->body;
}

HttpBackend::HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
  parse_url(options_.endpoint);
}

nlohmann::json HttpBackend::request_body(const GenerationRequest& request,
                                         const std::string& model) {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", request.system_instruction}});
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.text}});
  return nlohmann::json{{"model", model},
                        {"messages", std::move(messages)},
                        {"temperature", request.temperature},
                        {"max_tokens", request.max_output}};
}

std::string HttpBackend::parse_response(const std::string& body) {
  try {
    const auto doc = nlohmann::json::parse(body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("unexpected response body: ") + e.what(), false);
  }
}

std::string HttpBackend::generate(const GenerationRequest& request) {
  {
    std::unique_lock lock(mutex_);
    slot_free_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
    ++in_flight_;
  }
  struct Release {
    HttpBackend* self;
    ~Release() {
      {
        std::lock_guard lock(self->mutex_);
        --self->in_flight_;
      }
      self->slot_free_.notify_one();
    }
  } release{this};
  const std::string body = request_body(request, options_.model).dump();
  return parse_response(http_post_json(options_.endpoint, body, options_.auth_token,
                                       options_.timeout));
}

}  // namespace stratmem
