// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace stratmem {

enum class VerdictLabel { kSuccess, kFailure };

std::string_view to_string(VerdictLabel v);
std::optional<VerdictLabel> verdict_label_from_string(std::string_view s);

struct Verdict {
  VerdictLabel label = VerdictLabel::kFailure;
  std::string raw;

  bool success() const noexcept { return label == VerdictLabel::kSuccess; }
  bool operator==(const Verdict&) const = default;
};

void to_json(nlohmann::json& j, const Verdict& v);
void from_json(const nlohmann::json& j, Verdict& v);

}  // namespace stratmem
