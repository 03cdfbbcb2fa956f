// SPDX-License-Identifier: Apache-2.0
#include "stratmem/judgment.hpp"

#include "stratmem/error.hpp"
#include "stratmem/text.hpp"

namespace stratmem {

namespace {

enum class Field { kNone, kTitle, kDescription, kContent };

struct Block {
  std::vector<std::string> title;
  std::vector<std::string> description;
  std::vector<std::string> content;

  bool started() const { return !title.empty() || !description.empty() || !content.empty(); }
};

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (!out.empty()) out += sep;
    out += p;
  }
  return std::string(text::trim(out));
}

// Returns the remainder after `heading` when `line` starts with it.
std::optional<std::string_view> after_heading(std::string_view line, std::string_view heading) {
  if (!text::starts_with_ci(line, heading)) return std::nullopt;
  std::string_view rest = line.substr(heading.size());
  if (!rest.empty() && !std::isspace(static_cast<unsigned char>(rest.front())) &&
      rest.front() != ':') {
    return std::nullopt;
  }
  rest = text::trim(rest);
  if (!rest.empty() && rest.front() == ':') rest = text::trim(rest.substr(1));
  return rest;
}

}  // namespace

std::optional<VerdictLabel> parse_verdict(std::string_view output) {
  std::optional<VerdictLabel> found;
  for (auto line : text::split_lines(output)) {
    line = text::trim(line);
    if (text::starts_with_ci(line, "status:")) line = text::trim(line.substr(7));
    const auto label = verdict_label_from_string(line);
    if (!label) continue;
    if (found && *found != *label) return std::nullopt;
    found = label;
  }
  return found;
}

Verdict judge(ModelContext ctx, std::string_view query, const Trajectory& trajectory,
              std::string_view stream) {
  GenerationRequest req = ctx.templates.build(
      tmpl::kJudge,
      {{"query", std::string(query)},
       {"trajectory", render_trajectory(trajectory)},
       {"final_state", trajectory.final_state},
       {"answer", trajectory.final_answer ? *trajectory.final_answer : std::string("(none)")}});
  req.stream = std::string(stream);
  std::string raw;
  for (int attempt = 0; attempt < 2; ++attempt) {
    raw = ctx.gateway.complete(req);
    if (auto label = parse_verdict(raw)) return {*label, raw};
    if (ctx.log) {
      ctx.log->event("judge_parse_failure",
                     {{"stream", stream}, {"attempt", attempt + 1}, {"raw", raw}});
    }
  }
  if (ctx.log) ctx.log->event("judge_defaulted_failure", {{"stream", stream}});
  return {VerdictLabel::kFailure, raw};
}

std::vector<MemoryItem> parse_memory_markdown(std::string_view input) {
  std::vector<MemoryItem> items;
  Block block;
  Field field = Field::kNone;
  bool in_block = false;

  const auto finish = [&] {
    if (in_block && block.started()) {
      MemoryItem item{join(block.title, " "), join(block.description, " "),
                      join(block.content, "\n")};
      if (item.valid()) items.push_back(std::move(item));
    }
    block = Block{};
    field = Field::kNone;
  };

  for (auto raw_line : text::split_lines(input)) {
    const std::string_view line = text::trim(raw_line);
    if (line.substr(0, 3) == "```") continue;
    if (after_heading(line, "# Memory Item")) {
      finish();
      in_block = true;
      continue;
    }
    if (line.size() >= 2 && line[0] == '#' && line[1] == ' ') {
      finish();
      in_block = false;
      continue;
    }
    if (auto rest = after_heading(line, "## Title")) {
      if (!block.title.empty() || !block.content.empty()) finish();
      in_block = true;
      field = Field::kTitle;
      block.title.emplace_back(*rest);
      continue;
    }
    if (!in_block) continue;
    if (auto rest = after_heading(line, "## Description")) {
      field = Field::kDescription;
      block.description.emplace_back(*rest);
      continue;
    }
    if (auto rest = after_heading(line, "## Content")) {
      field = Field::kContent;
      block.content.emplace_back(*rest);
      continue;
    }
    switch (field) {
      case Field::kTitle: block.title.emplace_back(line); break;
      case Field::kDescription: block.description.emplace_back(line); break;
      case Field::kContent: block.content.emplace_back(raw_line); break;
      case Field::kNone: break;
    }
  }
  finish();
  return items;
}

std::string_view extraction_template_for(VerdictLabel label) {
  return label == VerdictLabel::kSuccess ? tmpl::kExtractSuccess : tmpl::kExtractFailure;
}

std::vector<MemoryItem> extract_memories(ModelContext ctx, std::string_view query,
                                         const Trajectory& trajectory, const Verdict& verdict,
                                         std::string_view stream) {
  GenerationRequest req = ctx.templates.build(
      extraction_template_for(verdict.label),
      {{"query", std::string(query)}, {"trajectory", render_trajectory(trajectory)}});
  req.stream = std::string(stream);
  const std::string raw = ctx.gateway.complete(req);
  std::vector<MemoryItem> items = parse_memory_markdown(raw);
  if (items.size() > kMaxItemsPerRecord) {
    if (ctx.log) {
      ctx.log->event("extraction_truncated", {{"stream", stream}, {"parsed", items.size()}});
    }
    items.resize(kMaxItemsPerRecord);
  }
  if (items.empty() && ctx.log) {
    ctx.log->event("extraction_failure", {{"stream", stream}, {"raw", raw}});
  }
  return items;
}

}  // namespace stratmem
