// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stratmem/memory.hpp"

namespace stratmem {

/// Text embedding backend. Implementations must be deterministic (same text,
/// same vector) and safe to call from several rollouts at once.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual Embedding embed(std::string_view text) = 0;
  virtual std::size_t dimension() const = 0;
  /// Identifies the provider and model in cache keys.
  virtual std::string id() const = 0;
};

/// Scales `v` to unit magnitude. Throws kZeroVector for an all-zero input.
Embedding normalize(Embedding v);
double magnitude(std::span<const double> v);

/// Seeded hash of character trigrams into `dim` buckets, normalized.
class HashEmbedding final : public EmbeddingProvider {
 public:
  explicit HashEmbedding(std::size_t dim = 64, std::uint64_t seed = 0);

  Embedding embed(std::string_view text) override;
  std::size_t dimension() const override { return dim_; }
  std::string id() const override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Memoizes another provider, optionally persisted to a JSON cache file
/// keyed by (provider id, text digest). Output is normalized regardless of
/// whether the wrapped backend normalizes.
class CachingEmbedding final : public EmbeddingProvider {
 public:
  explicit CachingEmbedding(std::shared_ptr<EmbeddingProvider> inner,
                            std::filesystem::path cache_file = {});

  Embedding embed(std::string_view text) override;
  std::size_t dimension() const override { return inner_->dimension(); }
  std::string id() const override { return inner_->id(); }

  /// Writes the cache file, if one was configured.
  void flush() const;
  std::size_t cached() const;

 private:
  struct Entry {
    std::string text;
    Embedding vector;
  };

  std::shared_ptr<EmbeddingProvider> inner_;
  std::filesystem::path cache_file_;
  mutable std::mutex mutex_;
  std::map<std::string, Entry> entries_;  // key: "<id>:<digest>"
};

struct HttpEmbeddingOptions {
  std::string endpoint;  // e.g. http://localhost:8080/embed
  std::string model;
  std::string auth_token;
  std::size_t dimension = 0;
  std::chrono::milliseconds timeout{30000};
};

/// POSTs {"model", "text"} and expects {"vector": [...]} back.
class HttpEmbedding final : public EmbeddingProvider {
 public:
  explicit HttpEmbedding(HttpEmbeddingOptions options);

  Embedding embed(std::string_view text) override;
  std::size_t dimension() const override { return options_.dimension; }
  std::string id() const override { return "http:" + options_.model; }

 private:
  HttpEmbeddingOptions options_;
};

/// dot(a, b) / (|a| |b|). Throws on dimension mismatch or a zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct RetrievalHit {
  RecordPtr record;
  double score = 0.0;
};

/// The min(k, size) records with the highest cosine score, ties broken by
/// ascending created_seq. Exhaustive scan.
std::vector<RetrievalHit> retrieve_top_k(std::span<const RecordPtr> records,
                                         std::span<const double> query, std::size_t k);
std::vector<RetrievalHit> retrieve_top_k(const MemoryBank& bank, std::span<const double> query,
                                         std::size_t k);

/// Items of each hit in hit order; no deduplication.
std::vector<MemoryItem> gather_items(std::span<const RetrievalHit> hits);

}  // namespace stratmem
