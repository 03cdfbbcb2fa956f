// SPDX-License-Identifier: Apache-2.0
#include "stratmem/matts.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <thread>

#include "stratmem/error.hpp"
#include "stratmem/text.hpp"

namespace stratmem {

namespace {

constexpr std::string_view kAnswerLine = "ANSWER:";
constexpr std::string_view kResumeLine = "RESUME";

struct RefineDirectives {
  std::optional<std::string> answer;
  bool resume = false;
};

RefineDirectives parse_refinement(std::string_view note) {
  RefineDirectives d;
  for (auto line : text::split_lines(note)) {
    line = text::trim(line);
    if (line == kResumeLine) d.resume = true;
    if (line.substr(0, kAnswerLine.size()) == kAnswerLine) {
      d.answer = std::string(text::trim(line.substr(kAnswerLine.size())));
    }
  }
  return d;
}

std::optional<std::size_t> parse_number(std::string_view s) {
  s = text::trim(s);
  if (s.empty() || s.size() > 9) return std::nullopt;
  std::size_t v = 0;
  for (char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  return v;
}

}  // namespace

std::string_view to_string(ScalingMode m) {
  switch (m) {
    case ScalingMode::kNone: return "none";
    case ScalingMode::kParallel: return "parallel";
    case ScalingMode::kSequential: return "sequential";
  }
  return "none";
}

std::optional<ScalingMode> scaling_mode_from_string(std::string_view s) {
  if (s == "none") return ScalingMode::kNone;
  if (s == "parallel") return ScalingMode::kParallel;
  if (s == "sequential") return ScalingMode::kSequential;
  return std::nullopt;
}

void ScalingConfig::validate() const {
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "scaling.k must be at least 1");
  if (width < 1) throw Error(ErrorCode::kInvalidConfig, "scaling.width must be at least 1");
  if (mode == ScalingMode::kNone && k != 1) {
    throw Error(ErrorCode::kInvalidConfig, "scaling.k must be 1 when scaling.mode is none");
  }
}

std::string rollout_stream(std::string_view task_id, std::size_t index) {
  return std::string(task_id) + "/" + std::to_string(index);
}

std::string render_candidates(const std::vector<Trajectory>& rollouts,
                              const std::vector<Verdict>* verdicts) {
  std::string out;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    if (i) out += "\n\n";
    out += "### Trajectory " + std::to_string(i + 1);
    if (verdicts) out += " (" + std::string(to_string((*verdicts)[i].label)) + ")";
    out += "\n" + render_trajectory(rollouts[i]);
  }
  return out;
}

std::vector<MemoryItem> self_contrast_extract(ModelContext ctx, std::string_view query,
                                              const std::vector<Trajectory>& rollouts,
                                              const std::vector<Verdict>& verdicts,
                                              std::string_view stream) {
  if (rollouts.empty() || rollouts.size() != verdicts.size()) {
    throw Error(ErrorCode::kInvalidArgument, "self-contrast needs one verdict per rollout");
  }
  if (rollouts.size() == 1) return extract_memories(ctx, query, rollouts[0], verdicts[0], stream);

  GenerationRequest req = ctx.templates.build(
      tmpl::kContrast,
      {{"query", std::string(query)}, {"trajectories", render_candidates(rollouts, &verdicts)}});
  req.stream = std::string(stream);
  const std::string raw = ctx.gateway.complete(req);
  std::vector<MemoryItem> items = parse_memory_markdown(raw);
  if (items.size() > kMaxItemsPerRecord) {
    if (ctx.log) ctx.log->event("extraction_truncated", {{"stream", stream}, {"parsed", items.size()}});
    items.resize(kMaxItemsPerRecord);
  }
  if (items.empty() && ctx.log) ctx.log->event("extraction_failure", {{"stream", stream}, {"raw", raw}});
  return items;
}

std::optional<std::size_t> parse_selection(std::string_view output, std::size_t n) {
  std::optional<std::size_t> chosen;
  for (auto line : text::split_lines(output)) {
    line = text::trim(line);
    std::optional<std::size_t> v;
    if (text::starts_with_ci(line, "best trajectory:")) {
      v = parse_number(line.substr(16));
    } else if (text::starts_with_ci(line, "best:")) {
      v = parse_number(line.substr(5));
    } else {
      v = parse_number(line);
    }
    if (v) chosen = v;
  }
  if (!chosen || *chosen < 1 || *chosen > n) return std::nullopt;
  return *chosen - 1;
}

std::size_t select_best_of_n(ModelContext ctx, std::string_view query,
                             const std::vector<Trajectory>& rollouts, std::string_view stream) {
  if (rollouts.empty()) throw Error(ErrorCode::kInvalidArgument, "no rollouts to select from");
  if (rollouts.size() == 1) return 0;
  GenerationRequest req = ctx.templates.build(
      tmpl::kSelect,
      {{"query", std::string(query)}, {"trajectories", render_candidates(rollouts, nullptr)}});
  req.stream = std::string(stream);
  const std::string raw = ctx.gateway.complete(req);
  if (auto index = parse_selection(raw, rollouts.size())) return *index;
  if (ctx.log) ctx.log->event("select_parse_failure", {{"stream", stream}, {"raw", raw}});
  return 0;
}

// Errored rollouts are labeled Failure without asking the judge.
Verdict judge_rollout(ModelContext ctx, std::string_view query, const Trajectory& t,
                      std::string_view stream) {
  if (t.termination == Termination::kError) {
    if (ctx.log) ctx.log->event("rollout_error", {{"stream", stream}, {"error", t.error}});
    return {VerdictLabel::kFailure, "rollout error: " + t.error};
  }
  return judge(ctx, query, t, stream);
}

ParallelOutcome parallel_scale(ModelContext ctx, const Task& task, std::string_view memory_text,
                               const EnvironmentFactory& env_factory, std::size_t k,
                               bool aggregate, std::size_t width, const EpisodeOptions& episode,
                               bool curate) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  ParallelOutcome out;
  out.rollouts.resize(k);
  out.verdicts.resize(k);
  out.oracle.resize(k);

  const auto run_one = [&](std::size_t i) {
    EpisodeOptions opts = episode;
    opts.stream = rollout_stream(task.task_id, i);
    try {
      std::unique_ptr<Environment> env = env_factory(task);
      out.rollouts[i] = run_episode(task, memory_text, *env, ctx.gateway, ctx.templates, opts);
      out.oracle[i] = env->oracle_success(out.rollouts[i].final_answer);
      out.verdicts[i] = judge_rollout(ctx, task.query, out.rollouts[i], opts.stream);
    } catch (const std::exception& e) {
      if (out.rollouts[i].termination != Termination::kError) {
        out.rollouts[i].termination = Termination::kError;
        out.rollouts[i].error = e.what();
      }
      if (ctx.log) ctx.log->event("rollout_error", {{"stream", opts.stream}, {"error", e.what()}});
      out.verdicts[i] = {VerdictLabel::kFailure, std::string("rollout error: ") + e.what()};
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(width, 1), k);
  if (workers == 1) {
    for (std::size_t i = 0; i < k; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < k; i = next++) run_one(i);
      });
    }
  }

  const std::string task_stream = rollout_stream(task.task_id, 0);
  out.best_index = select_best_of_n(ctx, task.query, out.rollouts, task_stream);
  if (!curate) return out;
  if (aggregate) {
    out.items = self_contrast_extract(ctx, task.query, out.rollouts, out.verdicts, task_stream);
  } else {
    out.rollout_items.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      out.rollout_items.push_back(extract_memories(ctx, task.query, out.rollouts[i],
                                                   out.verdicts[i],
                                                   rollout_stream(task.task_id, i)));
    }
  }
  return out;
}

SequentialOutcome sequential_scale(ModelContext ctx, const Task& task,
                                   std::string_view memory_text, Environment& env, std::size_t k,
                                   const EpisodeOptions& episode, bool curate) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  EpisodeOptions opts = episode;
  opts.stream = rollout_stream(task.task_id, 0);

  SequentialOutcome out;
  Trajectory& t = out.trajectory;
  t = run_episode(task, memory_text, env, ctx.gateway, ctx.templates, opts);
  for (std::size_t round = 1; round < k && t.termination != Termination::kError; ++round) {
    GenerationRequest req = ctx.templates.build(tmpl::kRefine, {{"query", task.query},
                                                                {"trajectory", render_trajectory(t)},
                                                                {"round", std::to_string(round)}});
    req.stream = opts.stream;
    std::string note;
    try {
      note = ctx.gateway.complete(req);
    } catch (const std::exception& e) {
      if (ctx.log) ctx.log->event("refine_error", {{"stream", opts.stream}, {"round", round}, {"error", e.what()}});
      break;
    }
    const RefineDirectives directives = parse_refinement(note);
    t.notes.push_back(note);
    if (directives.answer) t.final_answer = directives.answer;
    if (directives.resume) {
      resume_episode(t, task, memory_text, env, ctx.gateway, ctx.templates, opts, note);
    }
  }
  out.notes = t.notes;
  out.oracle = env.oracle_success(t.final_answer);
  out.verdict = judge_rollout(ctx, task.query, t, opts.stream);
  if (curate) out.items = extract_memories(ctx, task.query, t, out.verdict, opts.stream);
  return out;
}

}  // namespace stratmem
