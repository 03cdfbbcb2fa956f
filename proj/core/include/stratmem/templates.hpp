// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stratmem/gateway.hpp"

namespace stratmem {

/// Template ids. One file per id, `<id>.txt`, in the template directory.
namespace tmpl {
inline constexpr std::string_view kAct = "act";
inline constexpr std::string_view kJudge = "judge";
inline constexpr std::string_view kExtractSuccess = "extract_success";
inline constexpr std::string_view kExtractFailure = "extract_failure";
inline constexpr std::string_view kContrast = "contrast";
inline constexpr std::string_view kRefine = "refine";
inline constexpr std::string_view kSelect = "select";
}  // namespace tmpl

/// Line separating the system instruction from the user message in a template file.
inline constexpr std::string_view kUserSeparator = "--- user ---";

using Slots = std::map<std::string, std::string>;

/// A prompt template with `{{name}}` slot markers. Substitution is a single
/// pass: slot values are inserted verbatim and never re-scanned.
struct PromptTemplate {
  std::string id;
  std::string system;
  std::string user;

  /// A leading "// SPDX-License-Identifier:" line is not part of the prompt.
  static PromptTemplate parse(std::string id, std::string_view file_text);
  std::set<std::string> slot_names() const;
  /// Literal text between slot markers, system part first.
  std::vector<std::string> literal_segments() const;
};

/// Slots every shipped template must reference.
const std::map<std::string, std::set<std::string>>& required_template_slots();
Tag tag_for_template(std::string_view template_id);

class TemplateStore {
 public:
  TemplateStore() = default;
  /// Loads every `*.txt` under `dir`. Missing ids surface at build time.
  static TemplateStore load(const std::filesystem::path& dir);

  void add(PromptTemplate t);
  bool contains(std::string_view id) const;
  const PromptTemplate& get(std::string_view id) const;

  /// Substitutes `slots` into the template. Unknown id and any missing slot
  /// are errors; extra slots are ignored. Tag and temperature come from the id.
  GenerationRequest build(std::string_view template_id, const Slots& slots) const;

  /// Problems with the shipped template set (missing files, missing slots).
  std::vector<std::string> check() const;

  TemperatureTable& temperatures() { return temperatures_; }
  const TemperatureTable& temperatures() const { return temperatures_; }
  void set_max_output(std::size_t n) { max_output_ = n; }

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
  TemperatureTable temperatures_;
  std::size_t max_output_ = 2048;
};

std::string substitute(std::string_view text, const Slots& slots, std::string_view template_id);

}  // namespace stratmem
