// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stratmem/agent.hpp"

namespace stratmem {

inline constexpr int kWorldFormatVersion = 1;

struct WorldPage {
  std::string id;
  std::string text;
};

/// Labeled transition. `from` may be "*" for an action available on every page.
struct WorldEdge {
  std::string from;
  std::string action;
  std::string to;
};

/// Gold goal predicate: the submitted answer must equal `answer`, and the
/// episode must end on `page` when one is given.
struct WorldGoal {
  std::optional<std::string> page;
  std::string answer;
};

struct WorldTask {
  std::string task_id;
  std::string query;
  std::string start;
  WorldGoal goal;
  std::vector<std::string> solution;  // a shortest action sequence reaching the goal
};

/// Declarative page graph used as a deterministic stand-in for web
/// environments. `answer(text)` is available everywhere and ends the episode.
class ScriptedWorld {
 public:
  static ScriptedWorld load(const std::filesystem::path& path);
  static ScriptedWorld from_json(const nlohmann::json& doc);

  const std::string& id() const { return id_; }
  const std::vector<WorldTask>& tasks() const { return tasks_; }
  const WorldTask* find_task(std::string_view task_id) const;
  const WorldPage* find_page(std::string_view page_id) const;

  std::optional<std::string> transition(std::string_view page, std::string_view action) const;
  bool goal_satisfied(const WorldTask& task, std::string_view page,
                      const std::optional<std::string>& answer) const;

  /// Breadth-first search over page edges plus the final answer action.
  std::optional<std::size_t> shortest_solution_length(const WorldTask& task) const;

  /// Consistency problems: dangling edges, unreachable goals, stored
  /// solutions that do not replay to the goal or are not shortest.
  std::vector<std::string> check() const;

 private:
  std::string id_;
  std::vector<WorldPage> pages_;
  std::vector<WorldEdge> edges_;
  std::vector<WorldTask> tasks_;
  std::map<std::string, std::size_t, std::less<>> page_index_;
};

/// Whitespace-insensitive around parentheses and commas.
std::string normalize_action(std::string_view action);

class WorldEnvironment final : public Environment {
 public:
  explicit WorldEnvironment(std::shared_ptr<const ScriptedWorld> world);

  std::string reset(const Task& task) override;
  StepResult step(std::string_view action) override;
  std::string final_state() const override;
  std::optional<std::string> reopen() override;
  std::optional<bool> oracle_success(const std::optional<std::string>& answer) const override;

  const std::string& current_page() const { return page_; }

 private:
  std::string observation() const;

  std::shared_ptr<const ScriptedWorld> world_;
  const WorldTask* task_ = nullptr;
  std::string page_;
  std::optional<std::string> answer_;
  bool terminal_ = false;
};

/// Loads each world file once; hands out fresh environments per rollout.
class WorldRegistry {
 public:
  explicit WorldRegistry(std::filesystem::path base_dir = {});

  /// `world_ref` is resolved against the base directory unless absolute.
  std::shared_ptr<const ScriptedWorld> get(const std::string& world_ref);

 private:
  std::filesystem::path base_dir_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const ScriptedWorld>> worlds_;
};

EnvironmentFactory world_factory(std::shared_ptr<WorldRegistry> registry);

}  // namespace stratmem
