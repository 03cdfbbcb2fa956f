// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stratmem/scripted_backend.hpp"
#include "stratmem/world.hpp"

namespace stratmem {

/// Scripted agent behaviour for one world task. Without its hint in the
/// injected memory the agent follows `uninformed`; with it, `informed`
/// (or the world's stored solution when `informed` is empty).
struct TaskPlan {
  std::vector<std::string> uninformed;
  std::vector<std::string> informed;
  std::string hint;
};

enum class JudgePolicy { kOracle, kAlwaysSuccess, kAlwaysFailure };
enum class SelectorPolicy { kFirst, kOracle };

struct WorldPolicyOptions {
  std::vector<std::shared_ptr<const ScriptedWorld>> worlds;
  std::map<std::string, TaskPlan> plans;
  JudgePolicy judge = JudgePolicy::kOracle;
  SelectorPolicy selector = SelectorPolicy::kFirst;
  /// Probability, per request stream, that the agent submits a wrong answer.
  /// Drawn from the backend seed, so it is fixed for a given stream.
  double noise = 0.0;
};

/// Tokens of the form HINT[name] found in `text`, deduplicated, in order.
std::vector<std::string> hint_tokens(std::string_view text);

/// Task id encoded in a request stream ("<task_id>/<rollout>").
std::string stream_task_id(std::string_view stream);

/// Installs rules that play every request tag against the given worlds:
/// act follows the task plan, judge/select use the configured policy,
/// extract/contrast emit memory items carrying observed hints, refine
/// confirms the answer. Test and demo use only.
void add_world_policy(ScriptedBackend& backend, const WorldPolicyOptions& options);

/// Script file: {"version": 1, "seed", "rules": [{"name", "tag", "contains"?,
/// "regex"?, "responses": [...], "choice": "cycle"|"seeded"}], "world_policy"?:
/// {"worlds": [paths], "plans": {task_id: {"uninformed", "informed"?, "hint"?}},
/// "judge", "selector", "noise"}}. Paths resolve against the script's directory.
std::shared_ptr<ScriptedBackend> load_script(const std::filesystem::path& path);
std::shared_ptr<ScriptedBackend> script_from_json(const nlohmann::json& doc,
                                                  const std::filesystem::path& base_dir);

}  // namespace stratmem
