// SPDX-License-Identifier: Apache-2.0
#include "stratmem/trajectory.hpp"

#include <nlohmann/json.hpp>

#include "stratmem/error.hpp"
#include "stratmem/verdict.hpp"

namespace stratmem {

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::kStopped: return "stopped";
    case Termination::kStepLimit: return "step_limit";
    case Termination::kEnvTerminal: return "env_terminal";
    case Termination::kError: return "error";
  }
  return "error";
}

Termination termination_from_string(std::string_view s) {
  if (s == "stopped") return Termination::kStopped;
  if (s == "step_limit") return Termination::kStepLimit;
  if (s == "env_terminal") return Termination::kEnvTerminal;
  if (s == "error") return Termination::kError;
  throw Error(ErrorCode::kMalformedDocument, "unknown termination '" + std::string(s) + "'");
}

std::string render_trajectory(const Trajectory& t) {
  std::string out;
  for (std::size_t i = 0; i < t.steps.size(); ++i) {
    const Step& s = t.steps[i];
    out += "Step " + std::to_string(i + 1) + "\n";
    if (!s.note.empty()) out += "Note: " + s.note + "\n";
    out += "Thought: " + s.thought + "\n";
    out += "Action: " + s.action + "\n";
  }
  if (t.steps.empty()) out += "(no steps taken)\n";
  out += "Final answer: " + (t.final_answer ? *t.final_answer : std::string("(none)")) + "\n";
  out += "Termination: " + std::string(to_string(t.termination));
  if (!t.notes.empty()) {
    out += "\n\nRefinement notes:";
    for (std::size_t i = 0; i < t.notes.size(); ++i) {
      out += "\n" + std::to_string(i + 1) + ". " + t.notes[i];
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const Step& s) {
  j = nlohmann::json{{"observation", s.observation}, {"thought", s.thought},
                     {"action", s.action},           {"raw_output", s.raw_output},
                     {"noop", s.noop}};
  if (!s.note.empty()) j["note"] = s.note;
}

void from_json(const nlohmann::json& j, Step& s) {
  j.at("observation").get_to(s.observation);
  j.at("thought").get_to(s.thought);
  j.at("action").get_to(s.action);
  s.raw_output = j.value("raw_output", std::string{});
  s.note = j.value("note", std::string{});
  s.noop = j.value("noop", false);
}

void to_json(nlohmann::json& j, const Trajectory& t) {
  j = nlohmann::json{{"steps", t.steps},
                     {"step_count", t.step_count()},
                     {"termination", to_string(t.termination)},
                     {"final_state", t.final_state}};
  j["final_answer"] = t.final_answer ? nlohmann::json(*t.final_answer) : nlohmann::json(nullptr);
  if (!t.error.empty()) j["error"] = t.error;
  if (!t.notes.empty()) j["notes"] = t.notes;
}

void from_json(const nlohmann::json& j, Trajectory& t) {
  j.at("steps").get_to(t.steps);
  if (j.contains("step_count") && j.at("step_count").get<std::size_t>() != t.steps.size()) {
    throw Error(ErrorCode::kMalformedDocument, "step_count does not match steps");
  }
  const auto& fa = j.at("final_answer");
  t.final_answer = fa.is_null() ? std::nullopt : std::optional<std::string>(fa.get<std::string>());
  t.termination = termination_from_string(j.at("termination").get<std::string>());
  t.final_state = j.value("final_state", std::string{});
  t.error = j.value("error", std::string{});
  t.notes = j.value("notes", std::vector<std::string>{});
}

std::string_view to_string(VerdictLabel v) {
  return v == VerdictLabel::kSuccess ? "Success" : "Failure";
}

std::optional<VerdictLabel> verdict_label_from_string(std::string_view s) {
  if (s == "Success") return VerdictLabel::kSuccess;
  if (s == "Failure") return VerdictLabel::kFailure;
  return std::nullopt;
}

void to_json(nlohmann::json& j, const Verdict& v) {
  j = nlohmann::json{{"label", to_string(v.label)}, {"raw", v.raw}};
}

void from_json(const nlohmann::json& j, Verdict& v) {
  const auto label = verdict_label_from_string(j.at("label").get<std::string>());
  if (!label) throw Error(ErrorCode::kMalformedDocument, "unknown verdict label");
  v.label = *label;
  v.raw = j.value("raw", std::string{});
}

}  // namespace stratmem
