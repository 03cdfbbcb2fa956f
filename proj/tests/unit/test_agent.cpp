// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "stratmem/agent.hpp"
#include "stratmem/error.hpp"
#include "stratmem/world.hpp"
#include "test_support.hpp"

using namespace stratmem;
using namespace stratmem::testing;

namespace {

// Counts steps; optionally terminal or faulty at a given step.
class CounterEnv final : public Environment {
 public:
  std::size_t terminal_at = 0;  // 0 = never
  std::size_t fault_at = 0;
  bool fault_on_reset = false;
  bool can_reopen = false;
  std::vector<std::string> actions;

  std::string reset(const Task&) override {
    if (fault_on_reset) throw Error(ErrorCode::kEnvironmentFault, "reset broke");
    return "obs 0";
  }
  StepResult step(std::string_view action) override {
    if (done_) throw Error(ErrorCode::kEnvironmentFault, "step after terminal");
    actions.emplace_back(action);
    if (fault_at != 0 && actions.size() == fault_at) {
      throw Error(ErrorCode::kEnvironmentFault, "env broke");
    }
    done_ = terminal_at != 0 && actions.size() == terminal_at;
    return {"obs " + std::to_string(actions.size()), done_};
  }
  std::string final_state() const override { return "steps: " + std::to_string(actions.size()); }
  std::optional<std::string> reopen() override {
    if (!can_reopen) return std::nullopt;
    done_ = false;
    return "reopened";
  }

 private:
  bool done_ = false;
};

const Task kTask{"T1", "Find the thing.", "w"};

std::shared_ptr<ScriptedBackend> replies(std::vector<std::string> outputs) {
  auto b = std::make_shared<ScriptedBackend>();
  b->add({"act", match_tag(Tag::kAct), cycle(std::move(outputs))});
  return b;
}

std::shared_ptr<ScriptedBackend> sequence(std::vector<std::string> outputs) {
  // One reply per call in order; the last repeats.
  auto b = std::make_shared<ScriptedBackend>();
  b->add({"act", match_tag(Tag::kAct),
          [outputs](const GenerationRequest&, const RuleContext& ctx) {
            return outputs[std::min<std::size_t>(ctx.counter, outputs.size() - 1)];
          }});
  return b;
}

}  // namespace

TEST_CASE("parse_action cases") {
  auto p = parse_action("I should look.\nACTION: goto(catalog)\ntrailing");
  CHECK(p.thought == "I should look.");
  CHECK(p.action == "goto(catalog)");
  CHECK_FALSE(p.noop);

  p = parse_action("first ACTION: click(a) and ACTION: click(b)");
  CHECK(p.action == "click(a) and");

  p = parse_action("ACTION: `search(x)`");
  CHECK(p.action == "search(x)");
  CHECK(p.thought.empty());

  p = parse_action("Thinking.\n```\nclick(t01)\n```");
  CHECK(p.action == "click(t01)");
  CHECK(p.thought == "Thinking.");

  p = parse_action("```\nclick(a)\nclick(b)\n```");
  CHECK(p.noop);

  p = parse_action("I have no idea");
  CHECK(p.noop);
  CHECK(p.action == "noop");
  CHECK(p.thought == "I have no idea");

  p = parse_action("ACTION:   \n");
  CHECK(p.noop);
}

TEST_CASE("answer_argument and stop detection") {
  CHECK(answer_argument("answer($17.00)") == "$17.00");
  CHECK(answer_argument("answer ( 42 )") == "42");
  CHECK(answer_argument("answer()") == std::string());
  CHECK(answer_argument("click(a)") == std::nullopt);
  CHECK(is_stop_action("stop"));
  CHECK(is_stop_action("stop()"));
  CHECK_FALSE(is_stop_action("stopper"));
  CHECK(normalize_action(" filter( member , yes ) ") == "filter(member,yes)");
}

TEST_CASE("stop is not recorded, noop is") {
  CounterEnv env;
  ModelGateway gw(sequence({"hmm", "ACTION: click(a)", "ACTION: stop"}));
  const auto t = run_episode(kTask, "", env, gw, shipped_templates(), {});
  REQUIRE(t.steps.size() == 2);
  CHECK(t.steps[0].noop);
  CHECK(t.steps[0].action == "noop");
  CHECK(t.steps[1].action == "click(a)");
  CHECK(t.termination == Termination::kStopped);
  CHECK(env.actions == std::vector<std::string>{"noop", "click(a)"});
  CHECK(t.final_state == "steps: 2");
}

TEST_CASE("answer ends on a terminal observation and is captured") {
  CounterEnv env;
  env.terminal_at = 2;
  ModelGateway gw(sequence({"ACTION: click(a)", "ACTION: answer( 7 )", "ACTION: click(z)"}));
  const auto t = run_episode(kTask, "", env, gw, shipped_templates(), {});
  CHECK(t.steps.size() == 2);
  CHECK(t.termination == Termination::kEnvTerminal);
  CHECK(t.final_answer == "7");
}

TEST_CASE("step limit bounds the episode") {
  CounterEnv env;
  ModelGateway gw(replies({"ACTION: click(a)"}));
  EpisodeOptions o;
  o.max_steps = 4;
  const auto t = run_episode(kTask, "", env, gw, shipped_templates(), o);
  CHECK(t.steps.size() == 4);
  CHECK(t.termination == Termination::kStepLimit);
  o.max_steps = 0;
  CHECK_THROWS_AS(run_episode(kTask, "", env, gw, shipped_templates(), o), Error);
}

TEST_CASE("faults end the episode but keep the partial trajectory") {
  SUBCASE("environment fault") {
    CounterEnv env;
    env.fault_at = 3;
    ModelGateway gw(replies({"ACTION: click(a)"}));
    const auto t = run_episode(kTask, "", env, gw, shipped_templates(), {});
    CHECK(t.steps.size() == 3);
    CHECK(t.termination == Termination::kError);
    CHECK(t.error.find("env broke") != std::string::npos);
  }
  SUBCASE("backend fault") {
    CounterEnv env;
    auto b = std::make_shared<ScriptedBackend>();
    b->add({"act", match_tag(Tag::kAct), [](const GenerationRequest&, const RuleContext& ctx) {
              if (ctx.counter == 2) throw TransportError("down", false);
              return std::string("ACTION: click(a)");
            }});
    ModelGateway gw(b);
    const auto t = run_episode(kTask, "", env, gw, shipped_templates(), {});
    CHECK(t.steps.size() == 2);
    CHECK(t.termination == Termination::kError);
  }
  SUBCASE("reset fault") {
    CounterEnv env;
    env.fault_on_reset = true;
    ModelGateway gw(replies({"ACTION: click(a)"}));
    const auto t = run_episode(kTask, "", env, gw, shipped_templates(), {});
    CHECK(t.steps.empty());
    CHECK(t.termination == Termination::kError);
  }
}

TEST_CASE("memory text is appended to the system instruction only when present") {
  const auto base = shipped_templates().build(tmpl::kAct, {{"query", "q"}, {"observation", "o"}});
  Trajectory t;
  const Task task{"T", "q", "w"};
  const auto plain = build_act_request(shipped_templates(), task, "", t, "o", "", {});
  CHECK(plain.system_instruction == base.system_instruction);
  const auto with = build_act_request(shipped_templates(), task, "MEM", t, "o", "", {});
  CHECK(with.system_instruction == base.system_instruction + "\n\nMEM");
  CHECK(with.messages == plain.messages);
}

TEST_CASE("older observations are elided according to the window") {
  Trajectory t;
  for (int i = 0; i < 3; ++i) {
    t.steps.push_back({"obs " + std::to_string(i), "th", "click(a)", "ACTION: click(a)", "", false});
  }
  EpisodeOptions o;
  o.stream = "T/0";
  const auto req = build_act_request(shipped_templates(), kTask, "", t, "obs 3", "", o);
  REQUIRE(req.messages.size() == 7);
  CHECK(req.stream == "T/0");
  CHECK(req.messages[0].text.find(kElidedObservation) != std::string::npos);
  CHECK(req.messages[1].role == "assistant");
  CHECK(req.messages[2].text == "Observation:\n" + std::string(kElidedObservation));
  CHECK(req.messages[6].text == "Observation:\nobs 3");

  o.observation_window = 2;
  const auto wider = build_act_request(shipped_templates(), kTask, "", t, "obs 3", "", o);
  CHECK(wider.messages[4].text == "Observation:\nobs 2");
  CHECK(wider.messages[2].text.find(kElidedObservation) != std::string::npos);
}

TEST_CASE("resume_episode continues within the remaining budget") {
  CounterEnv env;
  env.terminal_at = 1;
  env.can_reopen = true;
  ModelGateway gw(sequence({"ACTION: answer(1)", "ACTION: answer(2)"}));
  EpisodeOptions o;
  o.max_steps = 3;
  auto t = run_episode(kTask, "", env, gw, shipped_templates(), o);
  CHECK(t.final_answer == "1");
  env.terminal_at = 2;
  CHECK(resume_episode(t, kTask, "", env, gw, shipped_templates(), o, "check again"));
  REQUIRE(t.steps.size() == 2);
  CHECK(t.steps[1].observation == "reopened");
  CHECK(t.steps[1].note == "check again");
  CHECK(t.final_answer == "2");

  CounterEnv closed;
  closed.terminal_at = 1;
  auto u = run_episode(kTask, "", closed, gw, shipped_templates(), o);
  const auto before = u;
  CHECK_FALSE(resume_episode(u, kTask, "", closed, gw, shipped_templates(), o, "n"));
  CHECK(u == before);
}

TEST_CASE("shop world is consistent and plays its stored solutions") {
  const auto world = std::make_shared<const ScriptedWorld>(ScriptedWorld::load(shop_world_path()));
  CHECK(world->check().empty());
  CHECK(world->tasks().size() >= 20);
  for (const auto& task : world->tasks()) {
    WorldEnvironment env(world);
    env.reset({task.task_id, task.query, "shop.json"});
    bool terminal = false;
    for (const auto& a : task.solution) terminal = env.step(a).terminal;
    CHECK(terminal);
    CHECK(env.oracle_success(task.goal.answer) == true);
    CHECK(world->shortest_solution_length(task) == task.solution.size());
  }
}

TEST_CASE("world environment: terminal step faults, wrong answers fail the oracle") {
  const auto world = std::make_shared<const ScriptedWorld>(ScriptedWorld::load(shop_world_path()));
  const auto& task = world->tasks().front();
  WorldEnvironment env(world);
  env.reset({task.task_id, task.query, "shop.json"});
  CHECK(env.step("answer(nope)").terminal);
  CHECK(env.oracle_success(std::string("nope")) == false);
  CHECK_THROWS_AS(env.step("goto(catalog)"), Error);
  REQUIRE(env.reopen());
  CHECK_FALSE(env.step("goto(catalog)").terminal);
}
