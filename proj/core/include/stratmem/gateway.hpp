// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stratmem {

/// Why a request is made. Drives default temperature and routing.
enum class Tag { kAct, kExtract, kJudge, kContrast, kRefine, kSelect };

std::string_view to_string(Tag tag);
std::optional<Tag> tag_from_string(std::string_view s);

struct Message {
  std::string role;  // "user" or "assistant"
  std::string text;

  bool operator==(const Message&) const = default;
};

struct GenerationRequest {
  std::string system_instruction;
  std::vector<Message> messages;
  double temperature = 0.0;
  std::size_t max_output = 2048;
  Tag tag = Tag::kAct;

  // Audit metadata. Real backends ignore these; scripted backends may route on them.
  std::string template_id;
  std::map<std::string, std::string> slots;
  std::string stream;  // "<task_id>/<rollout index>"

  /// System instruction and messages joined, as matched by scripted rules.
  std::string text() const;
};

/// Per-tag decoding temperatures. Defaults: act 0.7, extract 1.0, judge 0.0,
/// select 0.0, contrast 1.0, refine 0.7.
class TemperatureTable {
 public:
  TemperatureTable();

  double of(Tag tag) const;
  void set(Tag tag, double value);
  const std::map<Tag, double>& values() const { return values_; }

 private:
  std::map<Tag, double> values_;
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string generate(const GenerationRequest& request) = 0;
  /// Whether transient transport failures may be retried.
  virtual bool retryable() const { return true; }
  virtual std::string id() const = 0;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
  /// Replaceable for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct PromptLogEntry {
  GenerationRequest request;
  std::string response;
};

/// Thread-safe record of every completed request, in completion order.
class PromptLog {
 public:
  void append(const GenerationRequest& request, const std::string& response);
  std::vector<PromptLogEntry> entries() const;
  std::size_t size() const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::vector<PromptLogEntry> entries_;
};

/// Front door for every model call: retries transient failures with
/// exponential backoff (base_delay * 2^attempt) when the backend allows it,
/// enforces a prompt budget, and feeds the optional prompt log.
class ModelGateway {
 public:
  explicit ModelGateway(std::shared_ptr<Backend> backend, RetryPolicy retry = {},
                        std::size_t max_prompt_chars = 0);

  std::string complete(const GenerationRequest& request);

  void set_prompt_log(std::shared_ptr<PromptLog> log) { log_ = std::move(log); }
  const std::shared_ptr<PromptLog>& prompt_log() const { return log_; }
  Backend& backend() { return *backend_; }

 private:
  std::shared_ptr<Backend> backend_;
  RetryPolicy retry_;
  std::size_t max_prompt_chars_;
  std::shared_ptr<PromptLog> log_;
};

}  // namespace stratmem
