// SPDX-License-Identifier: Apache-2.0
#include "stratmem/templates.hpp"

#include "stratmem/error.hpp"
#include "stratmem/text.hpp"

namespace stratmem {

namespace {

constexpr std::string_view kOpen = "{{";
constexpr std::string_view kClose = "}}";

// Calls on_literal / on_slot for each piece of `text` in order.
template <typename Literal, typename Slot>
void scan(std::string_view text, Literal on_literal, Slot on_slot) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find(kOpen, pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = text.find(kClose, open + kOpen.size());
    if (close == std::string_view::npos) break;
    on_literal(text.substr(pos, open - pos));
    on_slot(text::trim(text.substr(open + kOpen.size(), close - open - kOpen.size())));
    pos = close + kClose.size();
  }
  on_literal(text.substr(pos));
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string id, std::string_view file_text) {
  PromptTemplate t;
  t.id = std::move(id);
  constexpr std::string_view kLicenseLine = "// SPDX-License-Identifier:";
  if (file_text.substr(0, kLicenseLine.size()) == kLicenseLine) {
    const std::size_t eol = file_text.find('\n');
    file_text = eol == std::string_view::npos ? std::string_view{} : file_text.substr(eol + 1);
  }
  const std::size_t sep = file_text.find(kUserSeparator);
  if (sep == std::string_view::npos) {
    throw Error(ErrorCode::kMalformedDocument,
                "template '" + t.id + "' lacks the '" + std::string(kUserSeparator) + "' line");
  }
  t.system = std::string(text::trim(file_text.substr(0, sep)));
  t.user = std::string(text::trim(file_text.substr(sep + kUserSeparator.size())));
  return t;
}

std::set<std::string> PromptTemplate::slot_names() const {
  std::set<std::string> names;
  const auto add = [&](std::string_view s) { names.emplace(s); };
  scan(system, [](std::string_view) {}, add);
  scan(user, [](std::string_view) {}, add);
  return names;
}

std::vector<std::string> PromptTemplate::literal_segments() const {
  std::vector<std::string> out;
  const auto add = [&](std::string_view s) {
    if (!s.empty()) out.emplace_back(s);
  };
  scan(system, add, [](std::string_view) {});
  scan(user, add, [](std::string_view) {});
  return out;
}

const std::map<std::string, std::set<std::string>>& required_template_slots() {
  static const std::map<std::string, std::set<std::string>> kRequired{
      {std::string(tmpl::kAct), {"query", "observation"}},
      {std::string(tmpl::kJudge), {"query", "trajectory", "final_state", "answer"}},
      {std::string(tmpl::kExtractSuccess), {"query", "trajectory"}},
      {std::string(tmpl::kExtractFailure), {"query", "trajectory"}},
      {std::string(tmpl::kContrast), {"query", "trajectories"}},
      {std::string(tmpl::kRefine), {"query", "trajectory", "round"}},
      {std::string(tmpl::kSelect), {"query", "trajectories"}},
  };
  return kRequired;
}

Tag tag_for_template(std::string_view id) {
  if (id == tmpl::kAct) return Tag::kAct;
  if (id == tmpl::kJudge) return Tag::kJudge;
  if (id == tmpl::kExtractSuccess || id == tmpl::kExtractFailure) return Tag::kExtract;
  if (id == tmpl::kContrast) return Tag::kContrast;
  if (id == tmpl::kRefine) return Tag::kRefine;
  if (id == tmpl::kSelect) return Tag::kSelect;
  throw Error(ErrorCode::kUnknownTemplate, std::string(id));
}

std::string substitute(std::string_view text, const Slots& slots, std::string_view template_id) {
  std::string out;
  scan(
      text, [&](std::string_view lit) { out += lit; },
      [&](std::string_view name) {
        auto it = slots.find(std::string(name));
        if (it == slots.end()) {
          throw Error(ErrorCode::kMissingSlot,
                      "'" + std::string(name) + "' in template '" + std::string(template_id) + "'");
        }
        out += it->second;
      });
  return out;
}

TemplateStore TemplateStore::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::kMissingFile, dir.string());
  TemplateStore store;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
    store.add(PromptTemplate::parse(entry.path().stem().string(), text::read_file(entry.path())));
  }
  return store;
}

void TemplateStore::add(PromptTemplate t) {
  std::string id = t.id;
  templates_.insert_or_assign(std::move(id), std::move(t));
}

bool TemplateStore::contains(std::string_view id) const {
  return templates_.find(id) != templates_.end();
}

const PromptTemplate& TemplateStore::get(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw Error(ErrorCode::kUnknownTemplate, std::string(id));
  return it->second;
}

GenerationRequest TemplateStore::build(std::string_view template_id, const Slots& slots) const {
  const PromptTemplate& t = get(template_id);
  GenerationRequest req;
  req.tag = tag_for_template(template_id);
  req.temperature = temperatures_.of(req.tag);
  req.max_output = max_output_;
  req.template_id = std::string(template_id);
  req.system_instruction = substitute(t.system, slots, template_id);
  req.messages.push_back({"user", substitute(t.user, slots, template_id)});
  req.slots = slots;
  return req;
}

std::vector<std::string> TemplateStore::check() const {
  std::vector<std::string> problems;
  for (const auto& [id, required] : required_template_slots()) {
    if (!contains(id)) {
      problems.push_back("missing template '" + id + "'");
      continue;
    }
    const auto present = get(id).slot_names();
    for (const auto& slot : required) {
      if (!present.count(slot)) problems.push_back("template '" + id + "' lacks slot '" + slot + "'");
    }
    for (const auto& slot : present) {
      if (!required.count(slot)) {
        problems.push_back("template '" + id + "' uses unknown slot '" + slot + "'");
      }
    }
  }
  return problems;
}

}  // namespace stratmem
