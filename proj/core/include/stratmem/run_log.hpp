// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace stratmem {

/// Structured event log: one JSON object per line, {"event": kind, ...fields}.
/// Events are also kept in memory for inspection.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(const std::filesystem::path& file);

  void event(std::string_view kind, nlohmann::json fields = nlohmann::json::object());
  std::vector<nlohmann::json> events() const;
  std::size_t count(std::string_view kind) const;

 private:
  mutable std::mutex mutex_;
  std::ofstream out_;
  std::vector<nlohmann::json> events_;
};

}  // namespace stratmem
