// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "stratmem/gateway.hpp"
#include "stratmem/templates.hpp"
#include "stratmem/trajectory.hpp"

namespace stratmem {

struct Task {
  std::string task_id;
  std::string query;
  std::string world_ref;

  bool operator==(const Task&) const = default;
};

struct StepResult {
  std::string observation;
  bool terminal = false;
};

/// Environment contract. One instance per rollout; never shared.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string reset(const Task& task) = 0;
  /// Throws kEnvironmentFault when called after a terminal step.
  virtual StepResult step(std::string_view action) = 0;
  virtual std::string final_state() const = 0;

  /// Leaves the terminal state so corrective steps can follow. Returns the
  /// current observation, or nullopt if the environment cannot reopen.
  virtual std::optional<std::string> reopen() { return std::nullopt; }

  /// Ground-truth check for test worlds only. Never consulted by the agent,
  /// the judge, or memory construction.
  virtual std::optional<bool> oracle_success(const std::optional<std::string>& answer) const {
    (void)answer;
    return std::nullopt;
  }
};

using EnvironmentFactory = std::function<std::unique_ptr<Environment>(const Task&)>;

inline constexpr std::string_view kActionMarker = "ACTION:";
inline constexpr std::string_view kNoopAction = "noop";

struct ParsedAction {
  std::string thought;
  std::string action;
  bool noop = false;
};

/// Splits model output into thought and action. The first `ACTION:` marker
/// wins and the action runs to the end of that line; without a marker, a
/// one-line fenced block is taken as the action. Anything else is a no-op
/// with the raw text kept as the thought.
ParsedAction parse_action(std::string_view model_output);

/// Returns the argument of `answer(...)`, if `action` is an answer action.
std::optional<std::string> answer_argument(std::string_view action);
bool is_stop_action(std::string_view action);

struct EpisodeOptions {
  std::size_t max_steps = 30;
  /// Raw observations kept in the act prompt; older ones are elided and the
  /// recorded thoughts stand in for them.
  std::size_t observation_window = 1;
  std::string stream;
};

inline constexpr std::string_view kElidedObservation =
    "(observation omitted; the thought that followed summarizes it)";

/// Builds the act request for the next step from the trajectory so far.
GenerationRequest build_act_request(const TemplateStore& templates, const Task& task,
                                    std::string_view memory_text, const Trajectory& trajectory,
                                    std::string_view current_observation,
                                    std::string_view pending_note, const EpisodeOptions& options);

/// ReAct loop: request an action (tag act), step the environment, record,
/// until stop, a terminal observation, or max_steps. Environment and backend
/// faults end the episode with termination = kError, keeping earlier steps.
Trajectory run_episode(const Task& task, std::string_view memory_text, Environment& env,
                       ModelGateway& gateway, const TemplateStore& templates,
                       const EpisodeOptions& options);

/// Reopens a finished episode and continues it within the remaining step
/// budget, delivering `note` with the first resumed observation. Returns
/// false without changes if the environment cannot reopen or no budget is left.
bool resume_episode(Trajectory& trajectory, const Task& task, std::string_view memory_text,
                    Environment& env, ModelGateway& gateway, const TemplateStore& templates,
                    const EpisodeOptions& options, std::string_view note);

}  // namespace stratmem
