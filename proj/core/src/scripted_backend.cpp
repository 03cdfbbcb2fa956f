// SPDX-License-Identifier: Apache-2.0
#include "stratmem/scripted_backend.hpp"

#include "stratmem/error.hpp"
#include "stratmem/text.hpp"

namespace stratmem {

ScriptedBackend& ScriptedBackend::add(ScriptedRule rule) {
  rules_.push_back(std::move(rule));
  return *this;
}

ScriptedBackend& ScriptedBackend::on(Tag tag, std::string response) {
  return add({std::string(to_string(tag)), match_tag(tag),
              [response = std::move(response)](const GenerationRequest&, const RuleContext&) {
                return response;
              }});
}

ScriptedBackend& ScriptedBackend::on(Tag tag, RuleResponder respond) {
  return add({std::string(to_string(tag)), match_tag(tag), std::move(respond)});
}

std::string ScriptedBackend::generate(const GenerationRequest& request) {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (!rules_[i].matcher(request)) continue;
    RuleContext ctx;
    ctx.seed = seed_;
    {
      std::lock_guard lock(mutex_);
      ctx.counter = counters_[{i, request.stream}]++;
      ++calls_;
    }
    return rules_[i].respond(request, ctx);
  }
  throw Error(ErrorCode::kUnscriptedRequest,
              "no rule matches " + std::string(to_string(request.tag)) + " request on stream '" +
                  request.stream + "'");
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

RuleMatcher match_tag(Tag tag) {
  return [tag](const GenerationRequest& r) { return r.tag == tag; };
}

RuleMatcher match_tag_containing(Tag tag, std::string needle) {
  return [tag, needle = std::move(needle)](const GenerationRequest& r) {
    return r.tag == tag && r.text().find(needle) != std::string::npos;
  };
}

RuleResponder cycle(std::vector<std::string> responses) {
  if (responses.empty()) throw Error(ErrorCode::kInvalidArgument, "cycle needs responses");
  return [responses = std::move(responses)](const GenerationRequest&, const RuleContext& ctx) {
    return responses[ctx.counter % responses.size()];
  };
}

RuleResponder seeded_choice(std::vector<std::string> responses) {
  if (responses.empty()) throw Error(ErrorCode::kInvalidArgument, "seeded_choice needs responses");
  return [responses = std::move(responses)](const GenerationRequest& r, const RuleContext& ctx) {
    const double u = text::unit_hash(ctx.seed, r.stream + "#" + std::to_string(ctx.counter));
    return responses[static_cast<std::size_t>(u * static_cast<double>(responses.size()))];
  };
}

}  // namespace stratmem
