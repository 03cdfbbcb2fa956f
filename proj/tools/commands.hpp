// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stratmem/config.hpp"

namespace stratmem::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // run aborted, unreadable bank, validation problems
  kExitUsage = 2,    // bad flags or an invalid config
};

struct RunArgs {
  std::filesystem::path config;
  ConfigOverrides overrides;
  std::filesystem::path run_dir;
  bool resume = false;
  std::optional<std::size_t> max_tasks;
};

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);

int cmd_memory_inspect(const std::filesystem::path& bank, std::ostream& out, std::ostream& err);
int cmd_memory_stats(const std::filesystem::path& bank, std::ostream& out, std::ostream& err);
int cmd_memory_export(const std::filesystem::path& bank, const std::filesystem::path& dir,
                      std::ostream& out, std::ostream& err);
int cmd_memory_import(const std::filesystem::path& dir, const std::filesystem::path& bank,
                      std::ostream& out, std::ostream& err);

struct ValidateArgs {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> templates;
  std::vector<std::filesystem::path> worlds;
};

int cmd_validate(const ValidateArgs& args, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stratmem::cli
