// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stratmem/agent.hpp"
#include "stratmem/config.hpp"
#include "stratmem/gateway.hpp"
#include "stratmem/memory.hpp"
#include "stratmem/retrieval.hpp"
#include "stratmem/templates.hpp"

namespace stratmem {

/// One line per task: {"task_id", "query", "world_ref"}. Blank lines are skipped.
std::vector<Task> load_stream(const std::filesystem::path& path);

/// Everything a run talks to. Built from a config, or assembled by hand in tests.
struct RunServices {
  std::shared_ptr<Backend> backend;
  std::shared_ptr<EmbeddingProvider> embedding;
  EnvironmentFactory env_factory;
  TemplateStore templates;
  std::shared_ptr<PromptLog> prompt_log;  // optional
};

/// Worlds resolve against the stream file's directory. Throws when the
/// template set is incomplete.
RunServices make_services(const RunConfig& config);

struct TaskResult {
  std::string task_id;
  Verdict verdict;                     // judge verdict of the reported rollout
  std::optional<bool> oracle_correct;  // test worlds only
  bool success = false;                // oracle when available, else the verdict
  std::size_t steps = 0;
  ScalingMode mode = ScalingMode::kNone;
  std::size_t k = 1;
  std::size_t best_index = 0;
  std::optional<std::string> final_answer;
  std::vector<bool> rollout_success;  // pool for pass@1 and pass@k'
  std::vector<std::size_t> rollout_steps;
  std::vector<std::uint64_t> retrieved;  // created_seq of the records injected
  std::size_t records_added = 0;

  bool operator==(const TaskResult&) const = default;
};

struct Metrics {
  std::size_t tasks = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;
  double avg_steps = 0.0;
  std::optional<double> avg_steps_on_success;
  std::optional<double> avg_steps_on_failure;
  double pass_at_1 = 0.0;
  double best_of_n = 0.0;
  std::vector<double> pass_at_k;  // index i holds pass@(i + 1)
  std::optional<double> judge_accuracy;  // agreement with the oracle where present
};

/// Rollout a task's pass@1 reports: floor(unit_hash(seed, task_id) * pool size).
std::size_t pass_at_1_index(std::uint64_t seed, const TaskResult& result);

/// Throws kInvalidArgument on an empty input.
Metrics compute_metrics(std::span<const TaskResult> results, std::uint64_t pass_at_1_seed);

struct RunReport {
  std::vector<TaskResult> tasks;
  Metrics metrics;
  std::size_t bank_size = 0;
};

/// Sorted-key document with the resolved config and no timestamps, so equal
/// configs and seeds give byte-identical output.
nlohmann::json report_to_json(const RunReport& report, const RunConfig& config);

void to_json(nlohmann::json& j, const TaskResult& r);
void from_json(const nlohmann::json& j, TaskResult& r);
void to_json(nlohmann::json& j, const Metrics& m);

struct RunOptions {
  /// Where artifacts go; empty keeps the run in memory.
  std::filesystem::path run_dir;
  /// Stop after this many tasks in this invocation, leaving a checkpoint.
  std::optional<std::size_t> max_tasks;
  /// Continue from the checkpoint in run_dir.
  bool resume = false;
};

struct RunResult {
  RunReport report;
  MemoryBank bank;
  bool complete = false;
  std::size_t completed = 0;
};

/// `<run_root>/<UTC timestamp>-<config digest>`.
std::filesystem::path default_run_dir(const RunConfig& config);

/// Closed loop over the stream, one task at a time: retrieve, run, judge,
/// extract, consolidate. With a run_dir, a checkpoint (results so far and
/// the bank) is written after every task; failures abort with kRunAborted
/// and leave the last checkpoint in place.
RunResult run_stream(const std::vector<Task>& stream, const RunConfig& config,
                     RunServices& services, const RunOptions& options = {});

}  // namespace stratmem
