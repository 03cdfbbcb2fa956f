// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "stratmem/gateway.hpp"
#include "stratmem/matts.hpp"

namespace stratmem {

struct BackendConfig {
  std::string kind = "scripted";  // scripted | http
  std::filesystem::path script;
  std::string endpoint;
  std::string model;
  std::string auth_env;  // name of the variable holding the bearer token
  std::chrono::milliseconds timeout{60000};
  int retries = 3;
  std::chrono::milliseconds retry_base{500};
  std::size_t max_in_flight = 4;
  std::size_t max_prompt_chars = 0;  // 0: unlimited
};

struct EmbeddingConfig {
  std::string kind = "hash";  // hash | http
  std::size_t dim = 64;
  std::uint64_t seed = 0;
  std::string endpoint;
  std::string model;
  std::string auth_env;
  std::chrono::milliseconds timeout{30000};
  std::filesystem::path cache;
};

struct SeedsConfig {
  std::uint64_t run = 0;        // scripted backend sampling
  std::uint64_t pass_at_1 = 0;  // which rollout pass@1 reports
};

struct PathsConfig {
  std::filesystem::path templates;
  std::filesystem::path stream;
  std::filesystem::path initial_bank;
  std::filesystem::path run_root;
};

struct RunConfig {
  BackendConfig backend;
  EmbeddingConfig embedding;
  bool memory = true;
  std::size_t retrieval_k = 1;
  ScalingConfig scaling;
  TemperatureTable temperatures;
  std::size_t max_steps = 30;
  std::size_t observation_window = 1;
  std::size_t max_output = 2048;
  SeedsConfig seeds;
  PathsConfig paths;

  /// Throws kInvalidConfig naming the offending field.
  void validate() const;
};

/// Unknown keys are rejected. Relative paths resolve against `base_dir`.
RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& config);
/// Hex digest of the canonical config document.
std::string config_digest(const RunConfig& config);

struct ConfigOverrides {
  std::optional<bool> memory;
  std::optional<ScalingMode> mode;
  std::optional<std::size_t> k;
  std::optional<bool> aggregate;
  std::optional<std::size_t> width;
  std::optional<std::uint64_t> seed;
};

void apply_overrides(RunConfig& config, const ConfigOverrides& overrides);

}  // namespace stratmem
