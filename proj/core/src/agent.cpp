// SPDX-License-Identifier: Apache-2.0
#include "stratmem/agent.hpp"

#include "stratmem/error.hpp"
#include "stratmem/text.hpp"
#include "stratmem/world.hpp"

namespace stratmem {

namespace {

constexpr std::string_view kFence = "```";

std::string strip_backticks(std::string_view s) {
  s = text::trim(s);
  while (!s.empty() && s.front() == '`') s.remove_prefix(1);
  while (!s.empty() && s.back() == '`') s.remove_suffix(1);
  return std::string(text::trim(s));
}

std::string with_note(std::string message, std::string_view note) {
  if (!note.empty()) {
    message += "\n\nNote from self-check:\n";
    message += note;
  }
  return message;
}

void drive(Trajectory& t, const Task& task, std::string_view memory_text, Environment& env,
           ModelGateway& gateway, const TemplateStore& templates, const EpisodeOptions& options,
           std::string current_observation, std::string pending_note) {
  t.termination = Termination::kStepLimit;
  while (t.steps.size() < options.max_steps) {
    std::string output;
    try {
      output = gateway.complete(build_act_request(templates, task, memory_text, t,
                                                  current_observation, pending_note, options));
    } catch (const std::exception& e) {
      t.termination = Termination::kError;
      t.error = e.what();
      break;
    }
    ParsedAction parsed = parse_action(output);
    if (!parsed.noop && is_stop_action(parsed.action)) {
      t.termination = Termination::kStopped;
      break;
    }
    Step step{current_observation, std::move(parsed.thought), std::move(parsed.action),
              std::move(output), std::move(pending_note), parsed.noop};
    pending_note.clear();
    if (!step.noop) {
      if (auto answer = answer_argument(step.action)) t.final_answer = std::move(*answer);
    }
    StepResult result;
    try {
      result = env.step(step.action);
    } catch (const std::exception& e) {
      t.steps.push_back(std::move(step));
      t.termination = Termination::kError;
      t.error = e.what();
      break;
    }
    t.steps.push_back(std::move(step));
    current_observation = std::move(result.observation);
    if (result.terminal) {
      t.termination = Termination::kEnvTerminal;
      break;
    }
  }
  try {
    t.final_state = env.final_state();
  } catch (const std::exception&) {
    t.final_state.clear();
  }
}

}  // namespace

ParsedAction parse_action(std::string_view output) {
  const std::size_t marker = output.find(kActionMarker);
  if (marker != std::string_view::npos) {
    std::string_view rest = output.substr(marker + kActionMarker.size());
    rest = rest.substr(0, rest.find('\n'));
    rest = rest.substr(0, rest.find(kActionMarker));
    std::string action = strip_backticks(rest);
    if (!action.empty()) {
      return {std::string(text::trim(output.substr(0, marker))), std::move(action), false};
    }
  } else {
    const std::size_t open = output.find(kFence);
    if (open != std::string_view::npos) {
      const std::size_t body = output.find('\n', open);
      const std::size_t close =
          body == std::string_view::npos ? body : output.find(kFence, body + 1);
      if (close != std::string_view::npos) {
        const std::string_view inner = text::trim(output.substr(body + 1, close - body - 1));
        if (!inner.empty() && inner.find('\n') == std::string_view::npos) {
          return {std::string(text::trim(output.substr(0, open))), std::string(inner), false};
        }
      }
    }
  }
  return {std::string(output), std::string(kNoopAction), true};
}

std::optional<std::string> answer_argument(std::string_view action) {
  const std::string a = normalize_action(action);
  constexpr std::string_view kPrefix = "answer(";
  if (a.size() < kPrefix.size() + 1 || a.compare(0, kPrefix.size(), kPrefix) != 0 ||
      a.back() != ')') {
    return std::nullopt;
  }
  return std::string(text::trim(std::string_view(a).substr(kPrefix.size(),
                                                           a.size() - kPrefix.size() - 1)));
}

bool is_stop_action(std::string_view action) {
  const std::string a = normalize_action(action);
  return a == "stop" || a == "stop()";
}

GenerationRequest build_act_request(const TemplateStore& templates, const Task& task,
                                    std::string_view memory_text, const Trajectory& trajectory,
                                    std::string_view current_observation,
                                    std::string_view pending_note, const EpisodeOptions& options) {
  const std::size_t window = options.observation_window == 0 ? 1 : options.observation_window;
  const std::size_t n = trajectory.steps.size();
  const std::size_t total = n + 1;
  const auto observation_at = [&](std::size_t j) -> std::string {
    if (j + window < total) return std::string(kElidedObservation);
    return j < n ? trajectory.steps[j].observation : std::string(current_observation);
  };
  const auto note_at = [&](std::size_t j) -> std::string_view {
    return j < n ? std::string_view(trajectory.steps[j].note) : pending_note;
  };

  GenerationRequest req =
      templates.build(tmpl::kAct, {{"query", task.query}, {"observation", observation_at(0)}});
  if (!memory_text.empty()) {
    req.system_instruction += "\n\n";
    req.system_instruction += memory_text;
  }
  req.messages.front().text = with_note(std::move(req.messages.front().text), note_at(0));
  for (std::size_t j = 0; j < n; ++j) {
    req.messages.push_back({"assistant", trajectory.steps[j].raw_output});
    req.messages.push_back({"user", with_note("Observation:\n" + observation_at(j + 1), note_at(j + 1))});
  }
  req.stream = options.stream;
  return req;
}

Trajectory run_episode(const Task& task, std::string_view memory_text, Environment& env,
                       ModelGateway& gateway, const TemplateStore& templates,
                       const EpisodeOptions& options) {
  if (options.max_steps == 0) throw Error(ErrorCode::kInvalidArgument, "max_steps must be >= 1");
  Trajectory t;
  std::string observation;
  try {
    observation = env.reset(task);
  } catch (const std::exception& e) {
    t.termination = Termination::kError;
    t.error = e.what();
    return t;
  }
  drive(t, task, memory_text, env, gateway, templates, options, std::move(observation), {});
  return t;
}

bool resume_episode(Trajectory& trajectory, const Task& task, std::string_view memory_text,
                    Environment& env, ModelGateway& gateway, const TemplateStore& templates,
                    const EpisodeOptions& options, std::string_view note) {
  if (trajectory.steps.size() >= options.max_steps) return false;
  if (trajectory.termination == Termination::kError) return false;
  std::optional<std::string> observation;
  try {
    observation = env.reopen();
  } catch (const std::exception&) {
    return false;
  }
  if (!observation) return false;
  drive(trajectory, task, memory_text, env, gateway, templates, options, std::move(*observation),
        std::string(note));
  return true;
}

}  // namespace stratmem
