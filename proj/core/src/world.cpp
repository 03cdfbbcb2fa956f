// SPDX-License-Identifier: Apache-2.0
#include "stratmem/world.hpp"

#include <cctype>
#include <deque>
#include <set>

#include <nlohmann/json.hpp>

#include "stratmem/error.hpp"
#include "stratmem/text.hpp"

namespace stratmem {

std::string normalize_action(std::string_view action) {
  action = text::trim(action);
  std::string out;
  out.reserve(action.size());
  for (std::size_t i = 0; i < action.size(); ++i) {
    const char c = action[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      // drop whitespace next to structural characters
      std::size_t j = i;
      while (j < action.size() && std::isspace(static_cast<unsigned char>(action[j]))) ++j;
      const bool before_struct = j < action.size() && (action[j] == '(' || action[j] == ')' ||
                                                       action[j] == ',');
      const bool after_struct = !out.empty() && (out.back() == '(' || out.back() == ',');
      if (!before_struct && !after_struct) out += ' ';
      i = j - 1;
      continue;
    }
    out += c;
  }
  return out;
}

ScriptedWorld ScriptedWorld::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kMissingFile, path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, path.string() + ": " + e.what());
  }
  return from_json(doc);
}

ScriptedWorld ScriptedWorld::from_json(const nlohmann::json& doc) {
  ScriptedWorld w;
  try {
    const int version = doc.at("version").get<int>();
    if (version != kWorldFormatVersion) {
      throw Error(ErrorCode::kVersionMismatch, "world version " + std::to_string(version));
    }
    doc.at("world_id").get_to(w.id_);
    for (const auto& p : doc.at("pages")) {
      WorldPage page{p.at("id").get<std::string>(), p.at("text").get<std::string>()};
      if (!w.page_index_.emplace(page.id, w.pages_.size()).second) {
        throw Error(ErrorCode::kMalformedDocument, "duplicate page '" + page.id + "'");
      }
      w.pages_.push_back(std::move(page));
    }
    for (const auto& e : doc.at("edges")) {
      w.edges_.push_back({e.at("from").get<std::string>(),
                          normalize_action(e.at("action").get<std::string>()),
                          e.at("to").get<std::string>()});
    }
    for (const auto& t : doc.at("tasks")) {
      WorldTask task;
      t.at("task_id").get_to(task.task_id);
      t.at("query").get_to(task.query);
      t.at("start").get_to(task.start);
      const auto& g = t.at("goal");
      if (g.contains("page")) task.goal.page = g.at("page").get<std::string>();
      g.at("answer").get_to(task.goal.answer);
      for (const auto& a : t.value("solution", nlohmann::json::array())) {
        task.solution.push_back(normalize_action(a.get<std::string>()));
      }
      w.tasks_.push_back(std::move(task));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, e.what());
  }
  return w;
}

const WorldTask* ScriptedWorld::find_task(std::string_view task_id) const {
  for (const auto& t : tasks_) {
    if (t.task_id == task_id) return &t;
  }
  return nullptr;
}

const WorldPage* ScriptedWorld::find_page(std::string_view page_id) const {
  auto it = page_index_.find(page_id);
  return it == page_index_.end() ? nullptr : &pages_[it->second];
}

std::optional<std::string> ScriptedWorld::transition(std::string_view page,
                                                     std::string_view action) const {
  const std::string a = normalize_action(action);
  for (const auto& e : edges_) {
    if ((e.from == page || e.from == "*") && e.action == a) return e.to;
  }
  return std::nullopt;
}

bool ScriptedWorld::goal_satisfied(const WorldTask& task, std::string_view page,
                                   const std::optional<std::string>& answer) const {
  if (!answer || text::trim(*answer) != text::trim(task.goal.answer)) return false;
  return !task.goal.page || *task.goal.page == page;
}

std::optional<std::size_t> ScriptedWorld::shortest_solution_length(const WorldTask& task) const {
  if (!find_page(task.start)) return std::nullopt;
  // Without a goal page any page will do: answering immediately takes one step.
  if (!task.goal.page) return 1;
  std::map<std::string, std::size_t> dist{{task.start, 0}};
  std::deque<std::string> frontier{task.start};
  while (!frontier.empty()) {
    const std::string page = frontier.front();
    frontier.pop_front();
    if (page == *task.goal.page) return dist[page] + 1;
    for (const auto& e : edges_) {
      if ((e.from == page || e.from == "*") && !dist.count(e.to)) {
        dist[e.to] = dist[page] + 1;
        frontier.push_back(e.to);
      }
    }
  }
  return std::nullopt;
}

std::vector<std::string> ScriptedWorld::check() const {
  std::vector<std::string> problems;
  for (const auto& e : edges_) {
    if (e.from != "*" && !find_page(e.from)) problems.push_back("edge from unknown page '" + e.from + "'");
    if (!find_page(e.to)) problems.push_back("edge to unknown page '" + e.to + "'");
  }
  std::set<std::string> ids;
  for (const auto& t : tasks_) {
    if (!ids.insert(t.task_id).second) problems.push_back("duplicate task '" + t.task_id + "'");
    if (!find_page(t.start)) {
      problems.push_back(t.task_id + ": unknown start page '" + t.start + "'");
      continue;
    }
    if (t.goal.page && !find_page(*t.goal.page)) {
      problems.push_back(t.task_id + ": unknown goal page '" + *t.goal.page + "'");
      continue;
    }
    const auto shortest = shortest_solution_length(t);
    if (!shortest) {
      problems.push_back(t.task_id + ": goal unreachable");
      continue;
    }
    if (t.solution.empty()) {
      problems.push_back(t.task_id + ": no stored solution");
      continue;
    }
    std::string page = t.start;
    std::optional<std::string> answer;
    bool replayed = true;
    for (std::size_t i = 0; i < t.solution.size(); ++i) {
      const std::string& a = t.solution[i];
      if (auto arg = answer_argument(a)) {
        answer = *arg;
        if (i + 1 != t.solution.size()) replayed = false;
        break;
      }
      auto next = transition(page, a);
      if (!next) {
        replayed = false;
        break;
      }
      page = *next;
    }
    if (!replayed || !goal_satisfied(t, page, answer)) {
      problems.push_back(t.task_id + ": stored solution does not reach the goal");
    } else if (t.solution.size() != *shortest) {
      problems.push_back(t.task_id + ": stored solution has " + std::to_string(t.solution.size()) +
                         " steps, shortest is " + std::to_string(*shortest));
    }
  }
  return problems;
}

WorldEnvironment::WorldEnvironment(std::shared_ptr<const ScriptedWorld> world)
    : world_(std::move(world)) {}

std::string WorldEnvironment::observation() const {
  const WorldPage* p = world_->find_page(page_);
  return "Page: " + page_ + "\n" + (p ? p->text : std::string{});
}

std::string WorldEnvironment::reset(const Task& task) {
  task_ = world_->find_task(task.task_id);
  if (!task_) {
    throw Error(ErrorCode::kEnvironmentFault,
                "world '" + world_->id() + "' has no task '" + task.task_id + "'");
  }
  page_ = task_->start;
  answer_.reset();
  terminal_ = false;
  return observation();
}

StepResult WorldEnvironment::step(std::string_view action) {
  if (!task_) throw Error(ErrorCode::kEnvironmentFault, "step before reset");
  if (terminal_) throw Error(ErrorCode::kEnvironmentFault, "step after terminal state");
  if (action == kNoopAction) return {"No action was taken.\n\n" + observation(), false};
  if (auto arg = answer_argument(action)) {
    answer_ = *arg;
    terminal_ = true;
    return {"Answer submitted: " + *arg, true};
  }
  if (auto next = world_->transition(page_, action)) {
    page_ = *next;
    return {observation(), false};
  }
  return {"The action '" + std::string(action) + "' is not available here.\n\n" + observation(),
          false};
}

std::string WorldEnvironment::final_state() const {
  const WorldPage* p = world_->find_page(page_);
  return "page: " + page_ + "\n" + (p ? p->text : std::string{}) +
         "\nsubmitted answer: " + (answer_ ? *answer_ : std::string("(none)"));
}

std::optional<std::string> WorldEnvironment::reopen() {
  if (!task_) return std::nullopt;
  terminal_ = false;
  return observation();
}

std::optional<bool> WorldEnvironment::oracle_success(
    const std::optional<std::string>& answer) const {
  if (!task_) return std::nullopt;
  return world_->goal_satisfied(*task_, page_, answer);
}

WorldRegistry::WorldRegistry(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

std::shared_ptr<const ScriptedWorld> WorldRegistry::get(const std::string& world_ref) {
  std::lock_guard lock(mutex_);
  auto it = worlds_.find(world_ref);
  if (it != worlds_.end()) return it->second;
  std::filesystem::path p(world_ref);
  if (p.is_relative()) p = base_dir_ / p;
  auto world = std::make_shared<const ScriptedWorld>(ScriptedWorld::load(p));
  worlds_.emplace(world_ref, world);
  return world;
}

EnvironmentFactory world_factory(std::shared_ptr<WorldRegistry> registry) {
  return [registry = std::move(registry)](const Task& task) -> std::unique_ptr<Environment> {
    return std::make_unique<WorldEnvironment>(registry->get(task.world_ref));
  };
}

}  // namespace stratmem
