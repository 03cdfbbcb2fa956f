// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "stratmem/gateway.hpp"

namespace stratmem {

struct RuleContext {
  std::uint64_t counter = 0;  // prior hits of this rule on the same request stream
  std::uint64_t seed = 0;
};

using RuleMatcher = std::function<bool(const GenerationRequest&)>;
using RuleResponder = std::function<std::string(const GenerationRequest&, const RuleContext&)>;

struct ScriptedRule {
  std::string name;
  RuleMatcher matcher;
  RuleResponder respond;
};

/// Deterministic test backend. The first matching rule answers; a request
/// no rule matches raises kUnscriptedRequest. Counters are kept per
/// (rule, request stream), so concurrent rollouts on distinct streams see
/// the same responses regardless of scheduling.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(std::uint64_t seed = 0) : seed_(seed) {}

  ScriptedBackend& add(ScriptedRule rule);
  ScriptedBackend& on(Tag tag, std::string response);
  ScriptedBackend& on(Tag tag, RuleResponder respond);

  std::string generate(const GenerationRequest& request) override;
  bool retryable() const override { return false; }
  std::string id() const override { return "scripted"; }

  void set_seed(std::uint64_t seed) { seed_ = seed; }
  std::size_t calls() const;
  std::size_t rule_count() const { return rules_.size(); }

 private:
  std::uint64_t seed_;
  std::vector<ScriptedRule> rules_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::size_t, std::string>, std::uint64_t> counters_;
  std::size_t calls_ = 0;
};

RuleMatcher match_tag(Tag tag);
RuleMatcher match_tag_containing(Tag tag, std::string needle);
/// Responds with responses[counter % n].
RuleResponder cycle(std::vector<std::string> responses);
/// Responds with a response picked by hashing (seed, stream, counter).
RuleResponder seeded_choice(std::vector<std::string> responses);

}  // namespace stratmem
