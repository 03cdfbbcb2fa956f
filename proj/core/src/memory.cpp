// SPDX-License-Identifier: Apache-2.0
#include "stratmem/memory.hpp"

#include <cmath>
#include <mutex>

#include <nlohmann/json.hpp>

#include "stratmem/error.hpp"
#include "stratmem/text.hpp"

namespace stratmem {

namespace {

constexpr double kNormTolerance = 1e-6;
constexpr std::string_view kBankFormat = "stratmem-bank";
constexpr std::string_view kPoolFormat = "stratmem-memory-pool";
constexpr std::string_view kEmbeddingsFormat = "stratmem-embeddings";

double norm_of(const Embedding& v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

nlohmann::json record_to_json(const ExperienceRecord& r, bool with_embedding) {
  nlohmann::json j{{"task_id", r.task_id},       {"query", r.query}, {"trajectory", r.trajectory},
                   {"verdict", r.verdict},       {"items", r.items},
                   {"created_seq", r.created_seq}};
  if (with_embedding) j["embedding"] = r.embedding;
  return j;
}

ExperienceRecord record_from_json(const nlohmann::json& j, bool with_embedding) {
  ExperienceRecord r;
  j.at("task_id").get_to(r.task_id);
  j.at("query").get_to(r.query);
  j.at("trajectory").get_to(r.trajectory);
  j.at("verdict").get_to(r.verdict);
  j.at("items").get_to(r.items);
  j.at("created_seq").get_to(r.created_seq);
  if (with_embedding) j.at("embedding").get_to(r.embedding);
  return r;
}

void check_header(const nlohmann::json& doc, std::string_view format) {
  if (!doc.is_object()) throw Error(ErrorCode::kMalformedDocument, "top level is not an object");
  if (doc.value("format", std::string{}) != format) {
    throw Error(ErrorCode::kMalformedDocument, "expected format '" + std::string(format) + "'");
  }
  if (!doc.contains("version") || !doc.at("version").is_number_integer()) {
    throw Error(ErrorCode::kMalformedDocument, "missing version");
  }
  const int version = doc.at("version").get<int>();
  if (version != kBankFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch, "found version " + std::to_string(version) +
                                                 ", expected " +
                                                 std::to_string(kBankFormatVersion));
  }
}

nlohmann::json parse_document(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kMissingFile, path.string());
  const std::string content = text::read_file(path);
  try {
    return nlohmann::json::parse(content);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, path.string() + ": " + e.what());
  }
}

// Rebuilds a bank by consolidating records in order, which re-checks every
// invariant and that created_seq runs 0, 1, 2, ...
MemoryBank rebuild(std::vector<ExperienceRecord> records) {
  MemoryBank bank;
  for (auto& r : records) {
    const std::uint64_t expected = bank.next_seq();
    if (r.created_seq != expected) {
      throw Error(ErrorCode::kMalformedDocument,
                  "created_seq " + std::to_string(r.created_seq) + " where " +
                      std::to_string(expected) + " was expected");
    }
    try {
      bank.consolidate(std::move(r));
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedDocument, e.what());
    }
  }
  return bank;
}

}  // namespace

bool MemoryItem::valid() const {
  return !text::trim(title).empty() && !text::trim(description).empty() &&
         !text::trim(content).empty();
}

void validate_record(const ExperienceRecord& record) {
  if (record.items.empty() || record.items.size() > kMaxItemsPerRecord) {
    throw Error(ErrorCode::kSchemaViolation,
                "record '" + record.task_id + "' has " + std::to_string(record.items.size()) +
                    " items; 1 to 3 required");
  }
  for (const auto& item : record.items) {
    if (!item.valid()) {
      throw Error(ErrorCode::kSchemaViolation,
                  "record '" + record.task_id + "' has an item with an empty field");
    }
  }
  if (record.embedding.empty() || std::abs(norm_of(record.embedding) - 1.0) > kNormTolerance) {
    throw Error(ErrorCode::kNotNormalized, "record '" + record.task_id + "'");
  }
}

MemoryBank::MemoryBank(const MemoryBank& other) {
  std::shared_lock lock(other.mutex_);
  records_ = other.records_;
  next_seq_ = other.next_seq_;
}

MemoryBank& MemoryBank::operator=(const MemoryBank& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  records_ = other.records_;
  next_seq_ = other.next_seq_;
  return *this;
}

MemoryBank::MemoryBank(MemoryBank&& other) noexcept {
  std::unique_lock lock(other.mutex_);
  records_ = std::move(other.records_);
  next_seq_ = other.next_seq_;
}

MemoryBank& MemoryBank::operator=(MemoryBank&& other) noexcept {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  records_ = std::move(other.records_);
  next_seq_ = other.next_seq_;
  return *this;
}

const ExperienceRecord& MemoryBank::consolidate(ExperienceRecord record) {
  validate_record(record);
  std::unique_lock lock(mutex_);
  if (!records_.empty() && records_.front()->embedding.size() != record.embedding.size()) {
    throw Error(ErrorCode::kSchemaViolation,
                "embedding dimension " + std::to_string(record.embedding.size()) +
                    " differs from the bank's " +
                    std::to_string(records_.front()->embedding.size()));
  }
  record.created_seq = next_seq_;
  auto stored = std::make_shared<const ExperienceRecord>(std::move(record));
  records_.push_back(stored);
  ++next_seq_;
  return *stored;
}

std::size_t MemoryBank::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

std::uint64_t MemoryBank::next_seq() const {
  std::shared_lock lock(mutex_);
  return next_seq_;
}

std::vector<RecordPtr> MemoryBank::snapshot() const {
  std::shared_lock lock(mutex_);
  return records_;
}

bool MemoryBank::operator==(const MemoryBank& other) const {
  const auto a = snapshot();
  const auto b = other.snapshot();
  if (a.size() != b.size() || next_seq() != other.next_seq()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(*a[i] == *b[i])) return false;
  }
  return true;
}

std::string render_items(std::span<const MemoryItem> items) {
  if (items.empty()) return {};
  std::string out(kMemoryPreamble);
  for (std::size_t i = 0; i < items.size(); ++i) {
    out += "\n\n# Memory Item " + std::to_string(i + 1) + "\n";
    out += "## Title " + items[i].title + "\n";
    out += "## Content " + items[i].content;
  }
  return out;
}

nlohmann::json bank_to_json(const MemoryBank& bank) {
  nlohmann::json records = nlohmann::json::array();
  const auto snap = bank.snapshot();
  for (const auto& r : snap) records.push_back(record_to_json(*r, true));
  return nlohmann::json{{"format", kBankFormat},
                        {"version", kBankFormatVersion},
                        {"next_seq", snap.size()},
                        {"records", std::move(records)}};
}

MemoryBank bank_from_json(const nlohmann::json& doc) {
  check_header(doc, kBankFormat);
  try {
    auto records = doc.at("records").get<std::vector<nlohmann::json>>();
    std::vector<ExperienceRecord> parsed;
    parsed.reserve(records.size());
    for (const auto& r : records) parsed.push_back(record_from_json(r, true));
    MemoryBank bank = rebuild(std::move(parsed));
    if (doc.at("next_seq").get<std::uint64_t>() != bank.next_seq()) {
      throw Error(ErrorCode::kMalformedDocument, "next_seq does not match the record count");
    }
    return bank;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, e.what());
  }
}

void save_bank(const MemoryBank& bank, const std::filesystem::path& path) {
  text::write_file_atomic(path, bank_to_json(bank).dump(1) + "\n");
}

MemoryBank load_bank(const std::filesystem::path& path) {
  return bank_from_json(parse_document(path));
}

CompatPaths compat_paths(const std::filesystem::path& dir) {
  return {dir / "memory_pool.json", dir / "embeddings.json"};
}

void export_compat(const MemoryBank& bank, const CompatPaths& paths) {
  nlohmann::json records = nlohmann::json::array();
  nlohmann::json embeddings = nlohmann::json::object();
  for (const auto& r : bank.snapshot()) {
    records.push_back(record_to_json(*r, false));
    auto it = embeddings.find(r->task_id);
    if (it != embeddings.end() && it->get<Embedding>() != r->embedding) {
      throw Error(ErrorCode::kSchemaViolation,
                  "task_id '" + r->task_id + "' has differing embeddings; cannot key by task_id");
    }
    embeddings[r->task_id] = r->embedding;
  }
  const nlohmann::json pool{
      {"format", kPoolFormat}, {"version", kBankFormatVersion}, {"records", std::move(records)}};
  const nlohmann::json emb{{"format", kEmbeddingsFormat},
                           {"version", kBankFormatVersion},
                           {"embeddings", std::move(embeddings)}};
  text::write_file_atomic(paths.pool, pool.dump(1) + "\n");
  text::write_file_atomic(paths.embeddings, emb.dump(1) + "\n");
}

MemoryBank import_compat(const CompatPaths& paths) {
  const nlohmann::json pool = parse_document(paths.pool);
  const nlohmann::json emb = parse_document(paths.embeddings);
  check_header(pool, kPoolFormat);
  check_header(emb, kEmbeddingsFormat);
  try {
    const auto& table = emb.at("embeddings");
    std::vector<ExperienceRecord> parsed;
    for (const auto& rj : pool.at("records")) {
      ExperienceRecord r = record_from_json(rj, false);
      if (!table.contains(r.task_id)) {
        throw Error(ErrorCode::kMalformedDocument, "no embedding for task_id '" + r.task_id + "'");
      }
      table.at(r.task_id).get_to(r.embedding);
      parsed.push_back(std::move(r));
    }
    return rebuild(std::move(parsed));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, e.what());
  }
}

BankStats bank_stats(const MemoryBank& bank) {
  BankStats stats;
  for (const auto& r : bank.snapshot()) {
    ++stats.size;
    ++stats.items_histogram[r->items.size()];
    if (r->verdict.success()) {
      ++stats.success_records;
    } else {
      ++stats.failure_records;
    }
  }
  return stats;
}

void to_json(nlohmann::json& j, const MemoryItem& item) {
  j = nlohmann::json{
      {"title", item.title}, {"description", item.description}, {"content", item.content}};
}

void from_json(const nlohmann::json& j, MemoryItem& item) {
  j.at("title").get_to(item.title);
  j.at("description").get_to(item.description);
  j.at("content").get_to(item.content);
}

}  // namespace stratmem
