// SPDX-License-Identifier: Apache-2.0
#include "stratmem/gateway.hpp"

#include <thread>

#include "stratmem/error.hpp"

namespace stratmem {

std::string_view to_string(Tag tag) {
  switch (tag) {
    case Tag::kAct: return "act";
    case Tag::kExtract: return "extract";
    case Tag::kJudge: return "judge";
    case Tag::kContrast: return "contrast";
    case Tag::kRefine: return "refine";
    case Tag::kSelect: return "select";
  }
  return "act";
}

std::optional<Tag> tag_from_string(std::string_view s) {
  for (Tag t : {Tag::kAct, Tag::kExtract, Tag::kJudge, Tag::kContrast, Tag::kRefine,
                Tag::kSelect}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

std::string GenerationRequest::text() const {
  std::string out = system_instruction;
  for (const auto& m : messages) {
    out += "\n\n";
    out += m.text;
  }
  return out;
}

TemperatureTable::TemperatureTable()
    : values_{{Tag::kAct, 0.7},      {Tag::kExtract, 1.0}, {Tag::kJudge, 0.0},
              {Tag::kSelect, 0.0},   {Tag::kContrast, 1.0}, {Tag::kRefine, 0.7}} {}

double TemperatureTable::of(Tag tag) const { return values_.at(tag); }

void TemperatureTable::set(Tag tag, double value) {
  if (value < 0.0) throw Error(ErrorCode::kInvalidConfig, "temperature must be >= 0");
  values_[tag] = value;
}

void PromptLog::append(const GenerationRequest& request, const std::string& response) {
  std::lock_guard lock(mutex_);
  entries_.push_back({request, response});
}

std::vector<PromptLogEntry> PromptLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t PromptLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void PromptLog::clear() {
  std::lock_guard lock(mutex_);
  entries_.clear();
}

ModelGateway::ModelGateway(std::shared_ptr<Backend> backend, RetryPolicy retry,
                           std::size_t max_prompt_chars)
    : backend_(std::move(backend)), retry_(std::move(retry)), max_prompt_chars_(max_prompt_chars) {
  if (!backend_) throw Error(ErrorCode::kInvalidArgument, "gateway needs a backend");
  if (!retry_.sleep) {
    retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::string ModelGateway::complete(const GenerationRequest& request) {
  if (max_prompt_chars_ != 0) {
    const std::size_t size = request.text().size();
    if (size > max_prompt_chars_) {
      throw Error(ErrorCode::kBudgetExceeded, std::to_string(size) + " prompt chars exceed " +
                                                  std::to_string(max_prompt_chars_));
    }
  }
  const int retries = backend_->retryable() ? retry_.max_retries : 0;
  for (int attempt = 0;; ++attempt) {
    try {
      std::string response = backend_->generate(request);
      if (log_) log_->append(request, response);
      return response;
    } catch (const TransportError& e) {
      if (!e.transient() || attempt >= retries) throw;
      retry_.sleep(retry_.base_delay * (1LL << attempt));
    }
  }
}

}  // namespace stratmem
