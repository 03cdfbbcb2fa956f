// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stratmem/gateway.hpp"
#include "stratmem/memory.hpp"
#include "stratmem/run_log.hpp"
#include "stratmem/templates.hpp"
#include "stratmem/trajectory.hpp"
#include "stratmem/verdict.hpp"

namespace stratmem {

/// What the curation steps need to talk to the model.
struct ModelContext {
  ModelGateway& gateway;
  const TemplateStore& templates;
  RunLog* log = nullptr;
};

/// Recognizes a verdict only from a line that is exactly `Success` or
/// `Failure`, optionally prefixed by `Status:`. Conflicting or absent
/// verdict lines yield nullopt.
std::optional<VerdictLabel> parse_verdict(std::string_view judge_output);

/// LLM-as-a-judge over (query, trajectory, final state, answer). An
/// unparseable reply is retried once, then recorded as Failure and logged.
Verdict judge(ModelContext ctx, std::string_view query, const Trajectory& trajectory,
              std::string_view stream = {});

/// Memory-item markdown, version 1:
///
///   # Memory Item <n>
///   ## Title <title>
///   ## Description <one sentence>
///   ## Content <text, may continue over following lines>
///
/// Each field's text may also start on the line after its heading. Text
/// before the first block is ignored, as are code fences. Blocks whose
/// fields fail MemoryItem::valid() are dropped.
inline constexpr int kMemoryMarkdownVersion = 1;
std::vector<MemoryItem> parse_memory_markdown(std::string_view text);

/// Routes on the verdict: success-analysis template for Success, failure
/// reflection for Failure. Keeps at most 3 items; an empty result is logged
/// and means the caller skips consolidation.
std::vector<MemoryItem> extract_memories(ModelContext ctx, std::string_view query,
                                         const Trajectory& trajectory, const Verdict& verdict,
                                         std::string_view stream = {});

std::string_view extraction_template_for(VerdictLabel label);

}  // namespace stratmem
