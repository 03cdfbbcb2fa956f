// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stratmem/agent.hpp"
#include "stratmem/judgment.hpp"
#include "stratmem/memory.hpp"

namespace stratmem {

enum class ScalingMode { kNone, kParallel, kSequential };

std::string_view to_string(ScalingMode m);
std::optional<ScalingMode> scaling_mode_from_string(std::string_view s);

struct ScalingConfig {
  ScalingMode mode = ScalingMode::kNone;
  std::size_t k = 1;       // rollouts (parallel) or refinement rounds + 1 (sequential)
  bool aggregate = true;   // false: each rollout extracted on its own (vanilla scaling)
  std::size_t width = 1;   // concurrent parallel rollouts

  /// Throws kInvalidConfig: k >= 1, width >= 1, and mode none requires k = 1.
  void validate() const;
};

/// Judges a rollout; one that ended in an error is Failure without a model call.
Verdict judge_rollout(ModelContext ctx, std::string_view query, const Trajectory& t,
                      std::string_view stream = {});

/// Request stream for rollout `index` of `task_id`.
std::string rollout_stream(std::string_view task_id, std::size_t index);

struct ParallelOutcome {
  std::vector<Trajectory> rollouts;
  std::vector<Verdict> verdicts;
  std::vector<std::optional<bool>> oracle;  // test worlds only
  std::size_t best_index = 0;
  std::vector<MemoryItem> items;                          // aggregate = true
  std::vector<std::vector<MemoryItem>> rollout_items;     // aggregate = false
};

struct SequentialOutcome {
  Trajectory trajectory;  // carries the notes as well
  std::vector<std::string> notes;
  Verdict verdict;
  std::optional<bool> oracle;
  std::vector<MemoryItem> items;
};

/// Renders candidates as "### Trajectory <i>" blocks, 1-based, optionally
/// labeled with their verdicts, in rollout-index order.
std::string render_candidates(const std::vector<Trajectory>& rollouts,
                              const std::vector<Verdict>* verdicts);

/// Compares all rollouts in one contrast request. A single rollout falls
/// back to extract_memories. Output bounded to 3 items.
std::vector<MemoryItem> self_contrast_extract(ModelContext ctx, std::string_view query,
                                              const std::vector<Trajectory>& rollouts,
                                              const std::vector<Verdict>& verdicts,
                                              std::string_view stream = {});

/// Parses a 1-based candidate number from selector output: a line that is
/// just the number, or "Best trajectory: <n>" / "Best: <n>". Returns the
/// 0-based index, or nullopt if absent or out of range.
std::optional<std::size_t> parse_selection(std::string_view output, std::size_t n);

/// One select request presenting every rollout without verdicts. N = 1
/// returns 0 without calling the model; unparseable output returns 0 and is logged.
std::size_t select_best_of_n(ModelContext ctx, std::string_view query,
                             const std::vector<Trajectory>& rollouts,
                             std::string_view stream = {});

/// k rollouts with the same memory text, each on a fresh environment,
/// optionally concurrent up to `width`. Each is judged; the best is picked by
/// BoN; memory comes from one contrast extraction (aggregate) or one
/// extraction per rollout. A faulting rollout is judged Failure without
/// stopping the others. With `curate` false no extraction is requested.
ParallelOutcome parallel_scale(ModelContext ctx, const Task& task, std::string_view memory_text,
                               const EnvironmentFactory& env_factory, std::size_t k,
                               bool aggregate, std::size_t width, const EpisodeOptions& episode,
                               bool curate = true);

/// One episode, then k - 1 refinement rounds over the same environment and
/// the remaining step budget. Each round's note is kept; `ANSWER: x` replaces
/// the final answer and `RESUME` continues the episode. Extraction sees the
/// notes with the final trajectory.
SequentialOutcome sequential_scale(ModelContext ctx, const Task& task,
                                   std::string_view memory_text, Environment& env, std::size_t k,
                                   const EpisodeOptions& episode, bool curate = true);

}  // namespace stratmem
