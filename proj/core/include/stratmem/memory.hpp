// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stratmem/trajectory.hpp"
#include "stratmem/verdict.hpp"

namespace stratmem {

inline constexpr std::size_t kMaxItemsPerRecord = 3;
inline constexpr int kBankFormatVersion = 1;

/// Preamble placed before retrieved items in the agent's system instruction.
inline constexpr std::string_view kMemoryPreamble =
    "Below are some memory items that I accumulated from past interaction from the environment "
    "that may be helpful to solve the task. You can use it when you feel it's relevant. In each "
    "step, please first explicitly discuss if you want to use each memory item or not, and then "
    "take action.";

struct MemoryItem {
  std::string title;
  std::string description;
  std::string content;

  /// Title non-empty after trimming; description and content non-empty.
  bool valid() const;
  bool operator==(const MemoryItem&) const = default;
};

using Embedding = std::vector<double>;

struct ExperienceRecord {
  std::string task_id;
  std::string query;
  Trajectory trajectory;
  Verdict verdict;
  std::vector<MemoryItem> items;
  Embedding embedding;
  std::uint64_t created_seq = 0;  // assigned by MemoryBank::consolidate

  bool operator==(const ExperienceRecord&) const = default;
};

using RecordPtr = std::shared_ptr<const ExperienceRecord>;

/// Append-only store of experience records.
///
/// Any number of threads may read (snapshot, size) while a single writer
/// consolidates; readers see either the bank before or after an append,
/// never a partially inserted record. Writers must be serialized by the
/// caller.
class MemoryBank {
 public:
  MemoryBank() = default;
  MemoryBank(const MemoryBank& other);
  MemoryBank& operator=(const MemoryBank& other);
  MemoryBank(MemoryBank&& other) noexcept;
  MemoryBank& operator=(MemoryBank&& other) noexcept;

  /// Appends `record`, assigning created_seq = next_seq(). Rejects records
  /// with 0 or more than 3 items, invalid items, or an embedding whose
  /// magnitude differs from 1 by more than 1e-6.
  const ExperienceRecord& consolidate(ExperienceRecord record);

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  std::uint64_t next_seq() const;

  /// Stable view of the records at the time of the call, in created_seq order.
  std::vector<RecordPtr> snapshot() const;

  bool operator==(const MemoryBank& other) const;

 private:
  mutable std::shared_mutex mutex_;
  std::vector<RecordPtr> records_;
  std::uint64_t next_seq_ = 0;
};

inline MemoryBank new_bank() { return MemoryBank{}; }

/// Validates the schema constraints consolidate() enforces; throws on violation.
void validate_record(const ExperienceRecord& record);

/// Empty input renders as the empty string; otherwise the preamble followed
/// by one block per item carrying its title and content.
std::string render_items(std::span<const MemoryItem> items);

void save_bank(const MemoryBank& bank, const std::filesystem::path& path);
MemoryBank load_bank(const std::filesystem::path& path);

nlohmann::json bank_to_json(const MemoryBank& bank);
MemoryBank bank_from_json(const nlohmann::json& doc);

/// Two-file layout: a memory pool without embeddings plus an embeddings
/// document keyed by task_id.
struct CompatPaths {
  std::filesystem::path pool;
  std::filesystem::path embeddings;
};

CompatPaths compat_paths(const std::filesystem::path& dir);
void export_compat(const MemoryBank& bank, const CompatPaths& paths);
MemoryBank import_compat(const CompatPaths& paths);

struct BankStats {
  std::size_t size = 0;
  std::map<std::size_t, std::size_t> items_histogram;  // items per record -> records
  std::size_t success_records = 0;
  std::size_t failure_records = 0;
};

BankStats bank_stats(const MemoryBank& bank);

void to_json(nlohmann::json& j, const MemoryItem& item);
void from_json(const nlohmann::json& j, MemoryItem& item);

}  // namespace stratmem
