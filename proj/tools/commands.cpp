// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "stratmem/error.hpp"
#include "stratmem/harness.hpp"
#include "stratmem/memory.hpp"
#include "stratmem/world.hpp"
#include "stratmem/world_policy.hpp"

namespace stratmem::cli {

namespace {

std::string fixed(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << v;
  return s.str();
}

std::string fixed(const std::optional<double>& v) { return v ? fixed(*v) : "n/a"; }

void print_metrics(const Metrics& m, std::ostream& out) {
  out << "tasks:                " << m.tasks << "\n"
      << "successes:            " << m.successes << "\n"
      << "success_rate:         " << fixed(m.success_rate) << "\n"
      << "avg_steps:            " << fixed(m.avg_steps) << "\n"
      << "avg_steps_on_success: " << fixed(m.avg_steps_on_success) << "\n"
      << "avg_steps_on_failure: " << fixed(m.avg_steps_on_failure) << "\n"
      << "pass@1:               " << fixed(m.pass_at_1) << "\n"
      << "best_of_n:            " << fixed(m.best_of_n) << "\n";
  out << "pass@k (k'=1..):      ";
  for (std::size_t i = 0; i < m.pass_at_k.size(); ++i) out << (i ? " " : "") << fixed(m.pass_at_k[i]);
  out << "\n";
  out << "judge_accuracy:       " << fixed(m.judge_accuracy) << "\n";
}

bool is_config_error(const Error& e) {
  return e.code() == ErrorCode::kInvalidConfig || e.code() == ErrorCode::kMissingFile ||
         e.code() == ErrorCode::kUnknownTemplate;
}

void check_worlds_of_stream(const std::filesystem::path& stream, std::vector<std::string>& problems) {
  const auto tasks = load_stream(stream);
  WorldRegistry registry(stream.parent_path());
  for (const auto& t : tasks) {
    const auto world = registry.get(t.world_ref);
    if (!world->find_task(t.task_id)) {
      problems.push_back(stream.string() + ": task " + t.task_id + " is not in world " + t.world_ref);
    }
  }
  std::set<std::string> seen;
  for (const auto& t : tasks) {
    if (!seen.insert(t.world_ref).second) continue;
    for (const auto& p : registry.get(t.world_ref)->check()) problems.push_back(t.world_ref + ": " + p);
  }
}

}  // namespace

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  std::vector<Task> stream;
  RunServices services;
  try {
    config = load_config(args.config);
    apply_overrides(config, args.overrides);
    if (config.paths.stream.empty()) {
      throw Error(ErrorCode::kInvalidConfig, "paths.stream: required to run");
    }
    stream = load_stream(config.paths.stream);
    services = make_services(config);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return is_config_error(e) ? kExitUsage : kExitFailure;
  }

  if (args.resume && args.run_dir.empty()) {
    err << "error: --resume needs --run-dir\n";
    return kExitUsage;
  }
  RunOptions options;
  options.run_dir = args.run_dir.empty() ? default_run_dir(config) : args.run_dir;
  options.resume = args.resume;
  options.max_tasks = args.max_tasks;

  RunResult result;
  try {
    result = run_stream(stream, config, services, options);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n"
        << "checkpoint: " << (options.run_dir / "checkpoint.json").string() << "\n";
    return kExitFailure;
  }

  out << "run_dir: " << options.run_dir.string() << "\n"
      << "memory: " << (config.memory ? "on" : "off") << "  mode: " << to_string(config.scaling.mode)
      << "  k: " << config.scaling.k << "\n";
  if (!result.report.tasks.empty()) print_metrics(result.report.metrics, out);
  out << "bank_size:            " << result.report.bank_size << "\n";
  if (!result.complete) {
    out << "paused after " << result.completed << " of " << stream.size()
        << " tasks; continue with --resume --run-dir " << options.run_dir.string() << "\n";
  } else {
    out << "report: " << (options.run_dir / "report.json").string() << "\n";
  }
  return kExitOk;
}

int cmd_memory_inspect(const std::filesystem::path& bank_path, std::ostream& out,
                       std::ostream& err) {
  MemoryBank bank;
  try {
    bank = load_bank(bank_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  for (const auto& r : bank.snapshot()) {
    out << "#" << r->created_seq << " " << r->task_id << " [" << to_string(r->verdict.label)
        << "] " << r->items.size() << (r->items.size() == 1 ? " item" : " items") << "\n"
        << "  query: " << r->query << "\n";
    for (const auto& item : r->items) out << "  - " << item.title << "\n";
  }
  out << bank.size() << (bank.size() == 1 ? " record\n" : " records\n");
  return kExitOk;
}

int cmd_memory_stats(const std::filesystem::path& bank_path, std::ostream& out,
                     std::ostream& err) {
  MemoryBank bank;
  try {
    bank = load_bank(bank_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  const BankStats s = bank_stats(bank);
  out << "size: " << s.size << "\n"
      << "success_records: " << s.success_records << "\n"
      << "failure_records: " << s.failure_records << "\n"
      << "items_per_record:\n";
  for (std::size_t n = 1; n <= kMaxItemsPerRecord; ++n) {
    auto it = s.items_histogram.find(n);
    out << "  " << n << ": " << (it == s.items_histogram.end() ? 0 : it->second) << "\n";
  }
  return kExitOk;
}

int cmd_memory_export(const std::filesystem::path& bank_path, const std::filesystem::path& dir,
                      std::ostream& out, std::ostream& err) {
  try {
    const MemoryBank bank = load_bank(bank_path);
    std::filesystem::create_directories(dir);
    const CompatPaths paths = compat_paths(dir);
    export_compat(bank, paths);
    out << "wrote " << paths.pool.string() << " and " << paths.embeddings.string() << " ("
        << bank.size() << " records)\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_memory_import(const std::filesystem::path& dir, const std::filesystem::path& bank_path,
                      std::ostream& out, std::ostream& err) {
  try {
    const MemoryBank bank = import_compat(compat_paths(dir));
    save_bank(bank, bank_path);
    out << "wrote " << bank_path.string() << " (" << bank.size() << " records)\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

int cmd_validate(const ValidateArgs& args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> problems;
  const auto guard = [&](const std::string& what, auto&& f) {
    try {
      f();
    } catch (const std::exception& e) {
      problems.push_back(what + ": " + e.what());
    }
  };

  std::optional<std::filesystem::path> templates = args.templates;
  if (args.config) {
    guard(args.config->string(), [&] {
      const RunConfig config = load_config(*args.config);
      if (!templates) templates = config.paths.templates;
      if (config.backend.kind == "scripted") load_script(config.backend.script);
      if (!config.paths.stream.empty()) check_worlds_of_stream(config.paths.stream, problems);
      if (config.memory && !config.paths.initial_bank.empty()) load_bank(config.paths.initial_bank);
    });
  }
  if (templates) {
    guard(templates->string(), [&] {
      for (const auto& p : TemplateStore::load(*templates).check()) {
        problems.push_back(templates->string() + ": " + p);
      }
    });
  }
  for (const auto& w : args.worlds) {
    guard(w.string(), [&] {
      for (const auto& p : ScriptedWorld::load(w).check()) problems.push_back(w.string() + ": " + p);
    });
  }
  if (!args.config && !templates && args.worlds.empty()) {
    err << "error: nothing to validate; pass --config, --templates or --world\n";
    return kExitUsage;
  }
  for (const auto& p : problems) err << "problem: " << p << "\n";
  if (!problems.empty()) return kExitFailure;
  out << "ok\n";
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"stratmem: reasoning memory for agents, with test-time scaling"};
  app.require_subcommand(1);

  RunArgs run;
  std::string memory_flag, mode_flag, aggregate_flag;
  std::optional<std::size_t> k_flag, width_flag, max_tasks;
  std::optional<std::uint64_t> seed_flag;
  std::string run_dir;
  auto* run_cmd = app.add_subcommand("run", "Run a task stream through the closed loop");
  run_cmd->add_option("--config", run.config, "Run config (JSON)")->required();
  run_cmd->add_option("--memory", memory_flag, "Override memory: on|off")
      ->check(CLI::IsMember({"on", "off"}));
  run_cmd->add_option("--mode", mode_flag, "Override scaling mode")
      ->check(CLI::IsMember({"none", "parallel", "sequential"}));
  run_cmd->add_option("--k", k_flag, "Override scaling factor")->check(CLI::PositiveNumber);
  run_cmd->add_option("--aggregate", aggregate_flag, "Override aggregation: true|false")
      ->check(CLI::IsMember({"true", "false"}));
  run_cmd->add_option("--width", width_flag, "Override concurrent rollouts")->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed", seed_flag, "Override the run seed");
  run_cmd->add_option("--run-dir", run_dir, "Artifact directory (default: <run_root>/<time>-<digest>)");
  run_cmd->add_flag("--resume", run.resume, "Continue from the checkpoint in --run-dir");
  run_cmd->add_option("--max-tasks", max_tasks, "Stop after this many tasks, leaving a checkpoint");

  auto* memory_cmd = app.add_subcommand("memory", "Inspect or convert a memory bank");
  memory_cmd->require_subcommand(1);
  std::string bank_path, dir_path;
  auto* inspect = memory_cmd->add_subcommand("inspect", "List records with titles and verdicts");
  inspect->add_option("bank", bank_path, "Bank file")->required();
  auto* stats = memory_cmd->add_subcommand("stats", "Size, items per record, verdict counts");
  stats->add_option("bank", bank_path, "Bank file")->required();
  auto* exp = memory_cmd->add_subcommand("export", "Write the two-file memory pool layout");
  exp->add_option("bank", bank_path, "Bank file")->required();
  exp->add_option("--out", dir_path, "Output directory")->required();
  auto* imp = memory_cmd->add_subcommand("import", "Read the two-file layout into a bank file");
  imp->add_option("dir", dir_path, "Directory holding the two files")->required();
  imp->add_option("--out", bank_path, "Bank file to write")->required();

  ValidateArgs validate;
  std::string validate_config, validate_templates;
  std::vector<std::string> validate_worlds;
  auto* validate_cmd = app.add_subcommand("validate", "Check a config, templates and worlds");
  validate_cmd->add_option("--config", validate_config, "Run config to check with its paths");
  validate_cmd->add_option("--templates", validate_templates, "Template directory");
  validate_cmd->add_option("--world", validate_worlds, "World file (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) {
      if (!memory_flag.empty()) run.overrides.memory = memory_flag == "on";
      if (!mode_flag.empty()) run.overrides.mode = scaling_mode_from_string(mode_flag);
      run.overrides.k = k_flag;
      if (!aggregate_flag.empty()) run.overrides.aggregate = aggregate_flag == "true";
      run.overrides.width = width_flag;
      run.overrides.seed = seed_flag;
      run.run_dir = run_dir;
      run.max_tasks = max_tasks;
      return cmd_run(run, out, err);
    }
    if (*memory_cmd) {
      if (*inspect) return cmd_memory_inspect(bank_path, out, err);
      if (*stats) return cmd_memory_stats(bank_path, out, err);
      if (*exp) return cmd_memory_export(bank_path, dir_path, out, err);
      if (*imp) return cmd_memory_import(dir_path, bank_path, out, err);
    }
    if (*validate_cmd) {
      if (!validate_config.empty()) validate.config = validate_config;
      if (!validate_templates.empty()) validate.templates = validate_templates;
      validate.worlds.assign(validate_worlds.begin(), validate_worlds.end());
      return cmd_validate(validate, out, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace stratmem::cli
