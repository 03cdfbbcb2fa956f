// SPDX-License-Identifier: Apache-2.0
#include "stratmem/run_log.hpp"

#include "stratmem/error.hpp"

namespace stratmem {

RunLog::RunLog(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  out_.open(file, std::ios::app);
  if (!out_) throw Error(ErrorCode::kInvalidArgument, "cannot open run log " + file.string());
}

void RunLog::event(std::string_view kind, nlohmann::json fields) {
  nlohmann::json e{{"event", kind}};
  if (fields.is_object()) e.update(fields);
  std::lock_guard lock(mutex_);
  if (out_.is_open()) {
    out_ << e.dump() << '\n';
    out_.flush();
  }
  events_.push_back(std::move(e));
}

std::vector<nlohmann::json> RunLog::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

std::size_t RunLog::count(std::string_view kind) const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (const auto& e : events_) {
    if (e.at("event") == kind) ++n;
  }
  return n;
}

}  // namespace stratmem
