// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace stratmem {

enum class Termination { kStopped, kStepLimit, kEnvTerminal, kError };

std::string_view to_string(Termination t);
Termination termination_from_string(std::string_view s);

struct Step {
  std::string observation;  // seen before acting
  std::string thought;
  std::string action;
  std::string raw_output;   // model text the step was parsed from
  std::string note;         // self-check note delivered with the observation
  bool noop = false;

  bool operator==(const Step&) const = default;
};

struct Trajectory {
  std::vector<Step> steps;
  std::optional<std::string> final_answer;
  Termination termination = Termination::kStopped;
  std::string final_state;
  std::string error;                // non-empty only when termination == kError
  std::vector<std::string> notes;   // self-refinement notes, in round order

  std::size_t step_count() const noexcept { return steps.size(); }
  bool operator==(const Trajectory&) const = default;
};

/// Text view of a trajectory for judge, extraction and selection prompts.
/// Recorded thoughts stand in for raw observations to bound prompt size.
/// Refinement notes, when present, follow the steps.
std::string render_trajectory(const Trajectory& t);

void to_json(nlohmann::json& j, const Step& s);
void from_json(const nlohmann::json& j, Step& s);
void to_json(nlohmann::json& j, const Trajectory& t);
void from_json(const nlohmann::json& j, Trajectory& t);

}  // namespace stratmem
