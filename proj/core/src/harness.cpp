// SPDX-License-Identifier: Apache-2.0
#include "stratmem/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include <nlohmann/json.hpp>

#include "stratmem/error.hpp"
#include "stratmem/http_backend.hpp"
#include "stratmem/judgment.hpp"
#include "stratmem/matts.hpp"
#include "stratmem/run_log.hpp"
#include "stratmem/text.hpp"
#include "stratmem/world.hpp"
#include "stratmem/world_policy.hpp"

namespace stratmem {

namespace {

using nlohmann::json;

constexpr std::string_view kCheckpointFormat = "stratmem-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string read_secret(const std::string& env_name) {
  if (env_name.empty()) return {};
  const char* v = std::getenv(env_name.c_str());
  if (!v) throw Error(ErrorCode::kInvalidConfig, "environment variable " + env_name + " is not set");
  return v;
}

bool success_of(const std::optional<bool>& oracle, const Verdict& verdict) {
  return oracle ? *oracle : verdict.success();
}

std::string artifact_name(std::size_t index, std::string_view task_id) {
  std::string name = std::to_string(index);
  name.insert(0, name.size() < 4 ? 4 - name.size() : 0, '0');
  name += '-';
  for (char c : task_id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    name += ok ? c : '_';
  }
  return name + ".json";
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json prompt_entry_json(const PromptLogEntry& e) {
  json messages = json::array();
  for (const auto& m : e.request.messages) messages.push_back({{"role", m.role}, {"text", m.text}});
  return {{"tag", to_string(e.request.tag)},
          {"template", e.request.template_id},
          {"stream", e.request.stream},
          {"temperature", e.request.temperature},
          {"system", e.request.system_instruction},
          {"messages", messages},
          {"response", e.response}};
}

class Runner {
 public:
  Runner(const RunConfig& config, RunServices& services, ModelContext ctx, MemoryBank& bank)
      : config_(config), services_(services), ctx_(ctx), bank_(bank) {
    episode_.max_steps = config.max_steps;
    episode_.observation_window = config.observation_window;
  }

  TaskResult run(const Task& task, json& artifact) {
    TaskResult r;
    r.task_id = task.task_id;
    r.mode = config_.scaling.mode;
    r.k = config_.scaling.k;

    std::string memory_text;
    Embedding query_embedding;
    if (config_.memory) {
      query_embedding = services_.embedding->embed(task.query);
      if (!bank_.empty()) {
        const auto hits = retrieve_top_k(bank_, query_embedding, config_.retrieval_k);
        json logged = json::array();
        for (const auto& h : hits) {
          r.retrieved.push_back(h.record->created_seq);
          logged.push_back({{"seq", h.record->created_seq}, {"task_id", h.record->task_id},
                            {"score", h.score}});
        }
        memory_text = render_items(gather_items(hits));
        ctx_.log->event("retrieval", {{"task_id", task.task_id}, {"hits", logged}});
      }
    }

    const auto consolidate = [&](const Trajectory& t, const Verdict& v,
                                 std::vector<MemoryItem> items) {
      if (items.empty()) return;
      const auto& rec = bank_.consolidate(
          {task.task_id, task.query, t, v, std::move(items), query_embedding, 0});
      ++r.records_added;
      ctx_.log->event("consolidated", {{"task_id", task.task_id}, {"seq", rec.created_seq},
                                       {"items", rec.items.size()}});
    };

    const bool curate = config_.memory;
    std::vector<Trajectory> rollouts;
    std::vector<Verdict> verdicts;
    std::vector<std::optional<bool>> oracle;

    switch (config_.scaling.mode) {
      case ScalingMode::kNone: {
        EpisodeOptions opts = episode_;
        opts.stream = rollout_stream(task.task_id, 0);
        Trajectory t;
        std::optional<bool> o;
        std::unique_ptr<Environment> env;
        try {
          env = services_.env_factory(task);
        } catch (const std::exception& e) {
          t.termination = Termination::kError;
          t.error = e.what();
        }
        if (env) {
          t = run_episode(task, memory_text, *env, ctx_.gateway, ctx_.templates, opts);
          o = env->oracle_success(t.final_answer);
        }
        Verdict v = judge_rollout(ctx_, task.query, t, opts.stream);
        if (curate) consolidate(t, v, extract_memories(ctx_, task.query, t, v, opts.stream));
        rollouts.push_back(std::move(t));
        verdicts.push_back(std::move(v));
        oracle.push_back(o);
        break;
      }
      case ScalingMode::kParallel: {
        ParallelOutcome po = parallel_scale(ctx_, task, memory_text, services_.env_factory,
                                            config_.scaling.k, config_.scaling.aggregate,
                                            config_.scaling.width, episode_, curate);
        r.best_index = po.best_index;
        if (curate) {
          if (config_.scaling.aggregate) {
            consolidate(po.rollouts[po.best_index], po.verdicts[po.best_index], po.items);
          } else {
            for (std::size_t i = 0; i < po.rollouts.size(); ++i) {
              consolidate(po.rollouts[i], po.verdicts[i], po.rollout_items[i]);
            }
          }
        }
        rollouts = std::move(po.rollouts);
        verdicts = std::move(po.verdicts);
        oracle = std::move(po.oracle);
        break;
      }
      case ScalingMode::kSequential: {
        std::unique_ptr<Environment> env = services_.env_factory(task);
        SequentialOutcome so = sequential_scale(ctx_, task, memory_text, *env, config_.scaling.k,
                                                episode_, curate);
        if (curate) consolidate(so.trajectory, so.verdict, so.items);
        rollouts.push_back(std::move(so.trajectory));
        verdicts.push_back(std::move(so.verdict));
        oracle.push_back(so.oracle);
        break;
      }
    }

    for (std::size_t i = 0; i < rollouts.size(); ++i) {
      r.rollout_success.push_back(success_of(oracle[i], verdicts[i]));
      r.rollout_steps.push_back(rollouts[i].step_count());
    }
    const std::size_t b = r.best_index;
    r.verdict = verdicts[b];
    r.oracle_correct = oracle[b];
    r.success = r.rollout_success[b];
    r.steps = rollouts[b].step_count();
    r.final_answer = rollouts[b].final_answer;

    json oracle_json = json::array();
    for (const auto& o : oracle) oracle_json.push_back(o ? json(*o) : json(nullptr));
    artifact = {{"task_id", task.task_id}, {"query", task.query},       {"memory_text", memory_text},
                {"rollouts", rollouts},    {"verdicts", verdicts},      {"oracle", oracle_json},
                {"best_index", b},         {"retrieved", r.retrieved}};
    return r;
  }

 private:
  const RunConfig& config_;
  RunServices& services_;
  ModelContext ctx_;
  MemoryBank& bank_;
  EpisodeOptions episode_;
};

json results_json(const std::vector<TaskResult>& results) {
  json arr = json::array();
  for (const auto& r : results) arr.push_back(r);
  return arr;
}

std::string results_lines(const std::vector<TaskResult>& results) {
  std::string out;
  for (const auto& r : results) out += json(r).dump() + "\n";
  return out;
}

}  // namespace

std::vector<Task> load_stream(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kMissingFile, path.string());
  const std::string content = text::read_file(path);
  std::vector<Task> tasks;
  std::size_t line_no = 0;
  for (auto line : text::split_lines(content)) {
    ++line_no;
    line = text::trim(line);
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      tasks.push_back({j.at("task_id").get<std::string>(), j.at("query").get<std::string>(),
                       j.at("world_ref").get<std::string>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedDocument,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return tasks;
}

RunServices make_services(const RunConfig& config) {
  config.validate();
  RunServices s;
  if (config.backend.kind == "scripted") {
    auto backend = load_script(config.backend.script);
    backend->set_seed(config.seeds.run);
    s.backend = std::move(backend);
  } else {
    HttpBackendOptions o;
    o.endpoint = config.backend.endpoint;
    o.model = config.backend.model;
    o.auth_token = read_secret(config.backend.auth_env);
    o.timeout = config.backend.timeout;
    o.max_in_flight = config.backend.max_in_flight;
    s.backend = std::make_shared<HttpBackend>(std::move(o));
  }

  std::shared_ptr<EmbeddingProvider> embedding;
  if (config.embedding.kind == "hash") {
    embedding = std::make_shared<HashEmbedding>(config.embedding.dim, config.embedding.seed);
  } else {
    HttpEmbeddingOptions o;
    o.endpoint = config.embedding.endpoint;
    o.model = config.embedding.model;
    o.auth_token = read_secret(config.embedding.auth_env);
    o.dimension = config.embedding.dim;
    o.timeout = config.embedding.timeout;
    embedding = std::make_shared<HttpEmbedding>(std::move(o));
  }
  if (!config.embedding.cache.empty()) {
    embedding = std::make_shared<CachingEmbedding>(std::move(embedding), config.embedding.cache);
  }
  s.embedding = std::move(embedding);

  const auto base = config.paths.stream.empty() ? std::filesystem::current_path()
                                                : config.paths.stream.parent_path();
  s.env_factory = world_factory(std::make_shared<WorldRegistry>(base));

  s.templates = TemplateStore::load(config.paths.templates);
  const auto problems = s.templates.check();
  if (!problems.empty()) {
    std::string msg = config.paths.templates.string() + ":";
    for (const auto& p : problems) msg += " " + p + ";";
    throw Error(ErrorCode::kUnknownTemplate, msg);
  }
  s.prompt_log = std::make_shared<PromptLog>();
  return s;
}

std::size_t pass_at_1_index(std::uint64_t seed, const TaskResult& result) {
  const std::size_t n = result.rollout_success.size();
  if (n <= 1) return 0;
  const auto i = static_cast<std::size_t>(std::floor(text::unit_hash(seed, result.task_id) *
                                                     static_cast<double>(n)));
  return std::min(i, n - 1);
}

Metrics compute_metrics(std::span<const TaskResult> results, std::uint64_t pass_at_1_seed) {
  if (results.empty()) throw Error(ErrorCode::kInvalidArgument, "no task results");
  Metrics m;
  m.tasks = results.size();
  double steps = 0, steps_ok = 0, steps_bad = 0;
  std::size_t pass1 = 0, bon = 0, judged = 0, agree = 0, pool = 0;
  for (const auto& r : results) {
    steps += static_cast<double>(r.steps);
    if (r.success) {
      ++m.successes;
      steps_ok += static_cast<double>(r.steps);
    } else {
      steps_bad += static_cast<double>(r.steps);
    }
    if (!r.rollout_success.empty()) {
      if (r.rollout_success[pass_at_1_index(pass_at_1_seed, r)]) ++pass1;
      if (r.best_index < r.rollout_success.size() && r.rollout_success[r.best_index]) ++bon;
    }
    pool = std::max(pool, r.rollout_success.size());
    if (r.oracle_correct) {
      ++judged;
      if (*r.oracle_correct == r.verdict.success()) ++agree;
    }
  }
  const double n = static_cast<double>(m.tasks);
  const std::size_t failures = m.tasks - m.successes;
  m.success_rate = static_cast<double>(m.successes) / n;
  m.avg_steps = steps / n;
  if (m.successes) m.avg_steps_on_success = steps_ok / static_cast<double>(m.successes);
  if (failures) m.avg_steps_on_failure = steps_bad / static_cast<double>(failures);
  m.pass_at_1 = static_cast<double>(pass1) / n;
  m.best_of_n = static_cast<double>(bon) / n;
  for (std::size_t k = 1; k <= pool; ++k) {
    std::size_t hit = 0;
    for (const auto& r : results) {
      const std::size_t upto = std::min(k, r.rollout_success.size());
      if (std::any_of(r.rollout_success.begin(), r.rollout_success.begin() + static_cast<std::ptrdiff_t>(upto),
                      [](bool s) { return s; })) {
        ++hit;
      }
    }
    m.pass_at_k.push_back(static_cast<double>(hit) / n);
  }
  if (judged) m.judge_accuracy = static_cast<double>(agree) / static_cast<double>(judged);
  return m;
}

void to_json(nlohmann::json& j, const TaskResult& r) {
  j = {{"task_id", r.task_id},
       {"verdict", r.verdict},
       {"oracle_correct", r.oracle_correct ? json(*r.oracle_correct) : json(nullptr)},
       {"success", r.success},
       {"steps", r.steps},
       {"mode", to_string(r.mode)},
       {"k", r.k},
       {"best_index", r.best_index},
       {"final_answer", r.final_answer ? json(*r.final_answer) : json(nullptr)},
       {"rollout_success", r.rollout_success},
       {"rollout_steps", r.rollout_steps},
       {"retrieved", r.retrieved},
       {"records_added", r.records_added}};
}

void from_json(const nlohmann::json& j, TaskResult& r) {
  j.at("task_id").get_to(r.task_id);
  j.at("verdict").get_to(r.verdict);
  const auto& o = j.at("oracle_correct");
  r.oracle_correct = o.is_null() ? std::nullopt : std::optional<bool>(o.get<bool>());
  j.at("success").get_to(r.success);
  j.at("steps").get_to(r.steps);
  const auto mode = scaling_mode_from_string(j.at("mode").get<std::string>());
  if (!mode) throw Error(ErrorCode::kMalformedDocument, "unknown scaling mode in task result");
  r.mode = *mode;
  j.at("k").get_to(r.k);
  j.at("best_index").get_to(r.best_index);
  const auto& a = j.at("final_answer");
  r.final_answer = a.is_null() ? std::nullopt : std::optional<std::string>(a.get<std::string>());
  r.rollout_success = j.at("rollout_success").get<std::vector<bool>>();
  j.at("rollout_steps").get_to(r.rollout_steps);
  j.at("retrieved").get_to(r.retrieved);
  j.at("records_added").get_to(r.records_added);
}

void to_json(nlohmann::json& j, const Metrics& m) {
  j = {{"tasks", m.tasks},
       {"successes", m.successes},
       {"success_rate", m.success_rate},
       {"avg_steps", m.avg_steps},
       {"avg_steps_on_success", optional_json(m.avg_steps_on_success)},
       {"avg_steps_on_failure", optional_json(m.avg_steps_on_failure)},
       {"pass_at_1", m.pass_at_1},
       {"best_of_n", m.best_of_n},
       {"pass_at_k", m.pass_at_k},
       {"judge_accuracy", optional_json(m.judge_accuracy)}};
}

nlohmann::json report_to_json(const RunReport& report, const RunConfig& config) {
  return {{"format", "stratmem-report"},
          {"version", 1},
          {"config", config_to_json(config)},
          {"seed", config.seeds.run},
          {"pass_at_1_seed", config.seeds.pass_at_1},
          {"tasks", results_json(report.tasks)},
          {"metrics", report.tasks.empty() ? json(nullptr) : json(report.metrics)},
          {"bank_size", report.bank_size}};
}

std::filesystem::path default_run_dir(const RunConfig& config) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  const auto root = config.paths.run_root.empty() ? std::filesystem::path("runs") : config.paths.run_root;
  return root / (std::string(stamp) + "-" + config_digest(config));
}

RunResult run_stream(const std::vector<Task>& stream, const RunConfig& config,
                     RunServices& services, const RunOptions& options) {
  config.validate();
  if (!services.backend || !services.env_factory) {
    throw Error(ErrorCode::kInvalidArgument, "run services need a backend and an environment factory");
  }
  if (config.memory && !services.embedding) {
    throw Error(ErrorCode::kInvalidArgument, "memory-enabled runs need an embedding provider");
  }
  services.templates.temperatures() = config.temperatures;
  services.templates.set_max_output(config.max_output);

  const std::filesystem::path& dir = options.run_dir;
  const bool artifacts = !dir.empty();
  const std::string digest = config_digest(config);
  const auto checkpoint_path = dir / "checkpoint.json";

  RunResult out;
  std::size_t start = 0;
  if (options.resume) {
    if (!artifacts) throw Error(ErrorCode::kInvalidArgument, "resume needs a run directory");
    if (!std::filesystem::exists(checkpoint_path)) {
      throw Error(ErrorCode::kMissingFile, checkpoint_path.string());
    }
    json cp;
    try {
      cp = json::parse(text::read_file(checkpoint_path));
      if (cp.at("format") != kCheckpointFormat || cp.at("version") != kCheckpointVersion) {
        throw Error(ErrorCode::kVersionMismatch, checkpoint_path.string());
      }
      if (cp.at("config_digest") != digest) {
        throw Error(ErrorCode::kInvalidConfig,
                    "checkpoint was written by a different config; resume with the original one");
      }
      out.report.tasks = cp.at("results").get<std::vector<TaskResult>>();
      out.bank = bank_from_json(cp.at("bank"));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedDocument, checkpoint_path.string() + ": " + e.what());
    }
    start = out.report.tasks.size();
    if (start > stream.size()) throw Error(ErrorCode::kInvalidArgument, "checkpoint is ahead of the stream");
    for (std::size_t i = 0; i < start; ++i) {
      if (out.report.tasks[i].task_id != stream[i].task_id) {
        throw Error(ErrorCode::kInvalidArgument, "checkpoint does not match the task stream");
      }
    }
  } else {
    if (artifacts && std::filesystem::exists(checkpoint_path)) {
      throw Error(ErrorCode::kInvalidArgument,
                  dir.string() + " already holds a run; resume it or pick another directory");
    }
    if (config.memory && !config.paths.initial_bank.empty()) {
      out.bank = load_bank(config.paths.initial_bank);
    }
  }

  std::unique_ptr<RunLog> log;
  std::ofstream prompts;
  if (artifacts) {
    std::filesystem::create_directories(dir / "trajectories");
    text::write_file_atomic(dir / "config.json", config_to_json(config).dump(2) + "\n");
    log = std::make_unique<RunLog>(dir / "events.jsonl");
    if (services.prompt_log) prompts.open(dir / "prompts.jsonl", std::ios::app);
  } else {
    log = std::make_unique<RunLog>();
  }
  log->event(options.resume ? "run_resumed" : "run_started",
             {{"config_digest", digest}, {"start_index", start}, {"tasks", stream.size()}});

  RetryPolicy retry;
  retry.max_retries = config.backend.retries;
  retry.base_delay = config.backend.retry_base;
  ModelGateway gateway(services.backend, retry, config.backend.max_prompt_chars);
  if (services.prompt_log) gateway.set_prompt_log(services.prompt_log);
  ModelContext ctx{gateway, services.templates, log.get()};
  Runner runner(config, services, ctx, out.bank);

  std::size_t processed = 0;
  std::size_t prompt_offset = services.prompt_log ? services.prompt_log->size() : 0;
  for (std::size_t i = start; i < stream.size(); ++i) {
    if (options.max_tasks && processed >= *options.max_tasks) break;
    const Task& task = stream[i];
    log->event("task_started", {{"index", i}, {"task_id", task.task_id}});
    json artifact;
    TaskResult result;
    try {
      result = runner.run(task, artifact);
    } catch (const std::exception& e) {
      log->event("run_aborted", {{"index", i}, {"task_id", task.task_id}, {"error", e.what()}});
      throw Error(ErrorCode::kRunAborted, "task " + task.task_id + " (index " + std::to_string(i) +
                                              "): " + e.what());
    }
    log->event("task_done", {{"index", i}, {"task_id", task.task_id}, {"success", result.success},
                             {"steps", result.steps}, {"records_added", result.records_added}});
    out.report.tasks.push_back(std::move(result));
    ++processed;

    if (artifacts) {
      text::write_file_atomic(dir / "trajectories" / artifact_name(i, task.task_id),
                              artifact.dump(2) + "\n");
      if (services.prompt_log && prompts) {
        const auto entries = services.prompt_log->entries();
        for (std::size_t p = prompt_offset; p < entries.size(); ++p) {
          prompts << prompt_entry_json(entries[p]).dump() << "\n";
        }
        prompts.flush();
        prompt_offset = entries.size();
      }
      const json cp{{"format", kCheckpointFormat},
                    {"version", kCheckpointVersion},
                    {"config_digest", digest},
                    {"next_index", i + 1},
                    {"results", results_json(out.report.tasks)},
                    {"bank", bank_to_json(out.bank)}};
      text::write_file_atomic(checkpoint_path, cp.dump() + "\n");
      save_bank(out.bank, dir / "bank.json");
      text::write_file_atomic(dir / "results.jsonl", results_lines(out.report.tasks));
    }
  }

  out.completed = out.report.tasks.size();
  out.complete = out.completed == stream.size();
  out.report.bank_size = out.bank.size();
  if (!out.report.tasks.empty()) {
    out.report.metrics = compute_metrics(out.report.tasks, config.seeds.pass_at_1);
  }
  if (auto* cache = dynamic_cast<CachingEmbedding*>(services.embedding.get())) cache->flush();
  if (artifacts && out.complete) {
    text::write_file_atomic(dir / "report.json", report_to_json(out.report, config).dump(2) + "\n");
  }
  log->event(out.complete ? "run_complete" : "run_paused", {{"completed", out.completed}});
  return out;
}

}  // namespace stratmem
