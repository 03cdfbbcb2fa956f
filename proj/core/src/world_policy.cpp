// SPDX-License-Identifier: Apache-2.0
#include "stratmem/world_policy.hpp"

#include <regex>

#include <nlohmann/json.hpp>

#include "stratmem/error.hpp"
#include "stratmem/templates.hpp"
#include "stratmem/text.hpp"

namespace stratmem {

namespace {

constexpr std::string_view kHintOpen = "HINT[";

struct PolicyState {
  WorldPolicyOptions options;

  const WorldTask* task(std::string_view task_id) const {
    for (const auto& w : options.worlds) {
      if (const WorldTask* t = w->find_task(task_id)) return t;
    }
    return nullptr;
  }

  const ScriptedWorld* world_of(std::string_view task_id) const {
    for (const auto& w : options.worlds) {
      if (w->find_task(task_id)) return w.get();
    }
    return nullptr;
  }

  const TaskPlan* plan(std::string_view task_id) const {
    auto it = options.plans.find(std::string(task_id));
    return it == options.plans.end() ? nullptr : &it->second;
  }
};

std::string slot(const GenerationRequest& r, const std::string& name) {
  auto it = r.slots.find(name);
  return it == r.slots.end() ? std::string{} : it->second;
}

std::string act(const PolicyState& s, const GenerationRequest& r, const RuleContext& ctx) {
  const std::string task_id = stream_task_id(r.stream);
  const TaskPlan& plan = *s.plan(task_id);
  const std::string hint_token = std::string(kHintOpen) + plan.hint + "]";
  const bool informed =
      !plan.hint.empty() && r.system_instruction.find(hint_token) != std::string::npos;
  std::vector<std::string> actions = plan.uninformed;
  if (informed) {
    actions = plan.informed;
    if (actions.empty()) {
      if (const WorldTask* t = s.task(task_id)) actions = t->solution;
    }
  }
  const bool noisy =
      s.options.noise > 0.0 && text::unit_hash(ctx.seed, "noise:" + r.stream) < s.options.noise;

  std::size_t step = 0;
  for (const auto& m : r.messages) {
    if (m.role == "assistant") ++step;
  }
  if (step >= actions.size()) return "Nothing is left to do.\nACTION: stop";

  std::string action = actions[step];
  if (noisy && answer_argument(action)) action = "answer(unsure)";
  std::string thought = "Step " + std::to_string(step + 1) + ": I will " + action + ".";
  if (informed && step == 0) thought += " Memory " + hint_token + " applies to this task.";
  for (const auto& h : hint_tokens(r.messages.back().text)) {
    thought += " I noticed HINT[" + h + "] on this page.";
  }
  return thought + "\nACTION: " + action;
}

std::string judge_reply(const PolicyState& s, const GenerationRequest& r) {
  bool success = false;
  switch (s.options.judge) {
    case JudgePolicy::kAlwaysSuccess:
      success = true;
      break;
    case JudgePolicy::kAlwaysFailure:
      success = false;
      break;
    case JudgePolicy::kOracle: {
      const std::string task_id = stream_task_id(r.stream);
      const WorldTask* task = s.task(task_id);
      const ScriptedWorld* world = s.world_of(task_id);
      if (task && world) {
        const std::string state = slot(r, "final_state");
        std::string page;
        const auto lines = text::split_lines(state);
        if (!lines.empty() && text::starts_with_ci(lines.front(), "page: ")) {
          page = std::string(text::trim(lines.front().substr(6)));
        }
        const std::string answer = slot(r, "answer");
        const std::optional<std::string> submitted =
            answer == "(none)" ? std::nullopt : std::optional<std::string>(answer);
        success = world->goal_satisfied(*task, page, submitted);
      }
      break;
    }
  }
  return std::string("I compared the final state and response with the user intent.\nStatus: ") +
         (success ? "Success" : "Failure");
}

std::string extract_reply(const GenerationRequest& r) {
  const std::string trajectories =
      r.tag == Tag::kContrast ? slot(r, "trajectories") : slot(r, "trajectory");
  std::string out = "Reviewing the trajectory.\n\n";
  if (r.tag == Tag::kContrast) {
    out +=
        "# Memory Item 1\n## Title Contrast successful and failed paths\n"
        "## Description Successful attempts read the value from the page the request names.\n"
        "## Content Compare the page where each attempt answered; answer only from the page that "
        "matches every qualifier in the request.\n";
  } else if (r.template_id == tmpl::kExtractFailure) {
    out +=
        "# Memory Item 1\n## Title Confirm the answer source before submitting\n"
        "## Description Wrong answers come from reading the first value shown.\n"
        "## Content Before answering, check that the page reflects every qualifier in the "
        "request, and look for filters that change the displayed value.\n";
  } else {
    out +=
        "# Memory Item 1\n## Title Follow the section that names the item\n"
        "## Description Navigating through the matching section reaches the item page.\n"
        "## Content Open the section the request refers to, open the item page, and read the "
        "value there before answering.\n";
  }
  const auto hints = hint_tokens(trajectories);
  if (!hints.empty()) {
    std::string listed;
    for (const auto& h : hints) listed += (listed.empty() ? "" : ", ") + ("HINT[" + h + "]");
    out += "\n# Memory Item 2\n## Title Apply site tips observed earlier\n"
           "## Description Tips shown on visited pages shorten or correct the path.\n"
           "## Content Observed tips: " +
           listed + ". Apply them whenever a similar request appears.\n";
  }
  return out;
}

std::string select_reply(const PolicyState& s, const GenerationRequest& r) {
  std::size_t choice = 1;
  if (s.options.selector == SelectorPolicy::kOracle) {
    const WorldTask* task = s.task(stream_task_id(r.stream));
    std::size_t index = 0;
    for (auto line : text::split_lines(slot(r, "trajectories"))) {
      constexpr std::string_view kFinal = "Final answer: ";
      if (line.substr(0, kFinal.size()) != kFinal) continue;
      ++index;
      if (task && text::trim(line.substr(kFinal.size())) == text::trim(task->goal.answer)) {
        choice = index;
        break;
      }
    }
  }
  return "Weighing the candidates against the query.\nBest trajectory: " + std::to_string(choice);
}

TaskPlan plan_from_json(const nlohmann::json& j) {
  TaskPlan p;
  p.uninformed = j.at("uninformed").get<std::vector<std::string>>();
  p.informed = j.value("informed", std::vector<std::string>{});
  p.hint = j.value("hint", std::string{});
  return p;
}

}  // namespace

std::vector<std::string> hint_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find(kHintOpen, pos)) != std::string_view::npos) {
    const std::size_t close = text.find(']', pos + kHintOpen.size());
    if (close == std::string_view::npos) break;
    std::string token(text.substr(pos + kHintOpen.size(), close - pos - kHintOpen.size()));
    if (!token.empty() && token.find_first_of(" \n[") == std::string::npos &&
        std::find(out.begin(), out.end(), token) == out.end()) {
      out.push_back(std::move(token));
    }
    pos = close;
  }
  return out;
}

std::string stream_task_id(std::string_view stream) {
  const std::size_t slash = stream.rfind('/');
  return std::string(slash == std::string_view::npos ? stream : stream.substr(0, slash));
}

void add_world_policy(ScriptedBackend& backend, const WorldPolicyOptions& options) {
  auto state = std::make_shared<const PolicyState>(PolicyState{options});
  backend.add({"world-act",
               [state](const GenerationRequest& r) {
                 return r.tag == Tag::kAct && state->plan(stream_task_id(r.stream)) != nullptr;
               },
               [state](const GenerationRequest& r, const RuleContext& ctx) {
                 return act(*state, r, ctx);
               }});
  backend.add({"world-judge", match_tag(Tag::kJudge),
               [state](const GenerationRequest& r, const RuleContext&) {
                 return judge_reply(*state, r);
               }});
  backend.add({"world-extract",
               [](const GenerationRequest& r) {
                 return r.tag == Tag::kExtract || r.tag == Tag::kContrast;
               },
               [](const GenerationRequest& r, const RuleContext&) { return extract_reply(r); }});
  backend.add({"world-refine", match_tag(Tag::kRefine),
               [](const GenerationRequest& r, const RuleContext&) {
                 return "Round " + slot(r, "round") +
                        ": I re-checked each step against the query; the final answer stands.";
               }});
  backend.add({"world-select", match_tag(Tag::kSelect),
               [state](const GenerationRequest& r, const RuleContext&) {
                 return select_reply(*state, r);
               }});
}

std::shared_ptr<ScriptedBackend> script_from_json(const nlohmann::json& doc,
                                                  const std::filesystem::path& base_dir) {
  try {
    if (doc.value("version", 0) != 1) {
      throw Error(ErrorCode::kVersionMismatch, "script version must be 1");
    }
    auto backend = std::make_shared<ScriptedBackend>(doc.value("seed", std::uint64_t{0}));
    for (const auto& rj : doc.value("rules", nlohmann::json::array())) {
      const std::string tag_name = rj.at("tag").get<std::string>();
      const auto tag = tag_from_string(tag_name);
      if (!tag) throw Error(ErrorCode::kMalformedDocument, "unknown tag '" + tag_name + "'");
      const std::string contains = rj.value("contains", std::string{});
      const std::string pattern = rj.value("regex", std::string{});
      std::optional<std::regex> re;
      if (!pattern.empty()) re.emplace(pattern);
      RuleMatcher matcher = [tag = *tag, contains, re](const GenerationRequest& r) {
        if (r.tag != tag) return false;
        const std::string t = r.text();
        if (!contains.empty() && t.find(contains) == std::string::npos) return false;
        return !re || std::regex_search(t, *re);
      };
      auto responses = rj.at("responses").get<std::vector<std::string>>();
      const std::string choice = rj.value("choice", std::string("cycle"));
      RuleResponder respond;
      if (choice == "cycle") {
        respond = cycle(std::move(responses));
      } else if (choice == "seeded") {
        respond = seeded_choice(std::move(responses));
      } else {
        throw Error(ErrorCode::kMalformedDocument, "unknown choice '" + choice + "'");
      }
      backend->add({rj.value("name", tag_name), std::move(matcher), std::move(respond)});
    }
    if (doc.contains("world_policy")) {
      const auto& wp = doc.at("world_policy");
      WorldPolicyOptions options;
      for (const auto& w : wp.at("worlds")) {
        std::filesystem::path p(w.get<std::string>());
        if (p.is_relative()) p = base_dir / p;
        options.worlds.push_back(std::make_shared<const ScriptedWorld>(ScriptedWorld::load(p)));
      }
      for (const auto& [task_id, pj] : wp.at("plans").items()) {
        options.plans.emplace(task_id, plan_from_json(pj));
      }
      const std::string judge = wp.value("judge", std::string("oracle"));
      if (judge == "oracle") {
        options.judge = JudgePolicy::kOracle;
      } else if (judge == "success") {
        options.judge = JudgePolicy::kAlwaysSuccess;
      } else if (judge == "failure") {
        options.judge = JudgePolicy::kAlwaysFailure;
      } else {
        throw Error(ErrorCode::kMalformedDocument, "unknown judge policy '" + judge + "'");
      }
      const std::string selector = wp.value("selector", std::string("first"));
      if (selector == "first") {
        options.selector = SelectorPolicy::kFirst;
      } else if (selector == "oracle") {
        options.selector = SelectorPolicy::kOracle;
      } else {
        throw Error(ErrorCode::kMalformedDocument, "unknown selector policy '" + selector + "'");
      }
      options.noise = wp.value("noise", 0.0);
      add_world_policy(*backend, options);
    }
    return backend;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, e.what());
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::kMalformedDocument, std::string("bad rule regex: ") + e.what());
  }
}

std::shared_ptr<ScriptedBackend> load_script(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kMissingFile, path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, path.string() + ": " + e.what());
  }
  return script_from_json(doc, path.parent_path());
}

}  // namespace stratmem
