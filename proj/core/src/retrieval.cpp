// SPDX-License-Identifier: Apache-2.0
#include "stratmem/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <nlohmann/json.hpp>

#include "stratmem/error.hpp"
#include "stratmem/http_backend.hpp"
#include "stratmem/text.hpp"

namespace stratmem {

double magnitude(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

Embedding normalize(Embedding v) {
  const double m = magnitude(v);
  if (m == 0.0 || !std::isfinite(m)) throw Error(ErrorCode::kZeroVector, "cannot normalize");
  for (double& x : v) x /= m;
  return v;
}

HashEmbedding::HashEmbedding(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "embedding dimension must be positive");
}

std::string HashEmbedding::id() const {
  return "hash-trigram:" + std::to_string(dim_) + ":" + std::to_string(seed_);
}

Embedding HashEmbedding::embed(std::string_view input) {
  // Boundary markers keep even the empty string non-zero.
  std::string padded = "^";
  for (char c : input) padded += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  padded += '$';
  Embedding v(dim_, 0.0);
  const std::size_t n = std::min<std::size_t>(3, padded.size());
  for (std::size_t i = 0; i + n <= padded.size(); ++i) {
    const std::uint64_t h = text::fnv1a(std::string_view(padded).substr(i, n), seed_);
    v[h % dim_] += 1.0;
  }
  return normalize(std::move(v));
}

CachingEmbedding::CachingEmbedding(std::shared_ptr<EmbeddingProvider> inner,
                                   std::filesystem::path cache_file)
    : inner_(std::move(inner)), cache_file_(std::move(cache_file)) {
  if (cache_file_.empty() || !std::filesystem::exists(cache_file_)) return;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text::read_file(cache_file_));
    for (const auto& e : doc.at("entries")) {
      entries_[e.at("key").get<std::string>()] =
          Entry{e.at("text").get<std::string>(), e.at("vector").get<Embedding>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, cache_file_.string() + ": " + e.what());
  }
}

Embedding CachingEmbedding::embed(std::string_view input) {
  const std::string key = inner_->id() + ":" + text::hex64(text::fnv1a(input));
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end() && it->second.text == input) return it->second.vector;
  }
  Embedding v = normalize(inner_->embed(input));
  std::lock_guard lock(mutex_);
  // A digest collision with different text keeps the first entry cached.
  entries_.try_emplace(key, Entry{std::string(input), v});
  return v;
}

void CachingEmbedding::flush() const {
  if (cache_file_.empty()) return;
  nlohmann::json entries = nlohmann::json::array();
  {
    std::lock_guard lock(mutex_);
    for (const auto& [key, e] : entries_) {
      entries.push_back({{"key", key}, {"text", e.text}, {"vector", e.vector}});
    }
  }
  text::write_file_atomic(cache_file_, nlohmann::json{{"entries", entries}}.dump() + "\n");
}

std::size_t CachingEmbedding::cached() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

HttpEmbedding::HttpEmbedding(HttpEmbeddingOptions options) : options_(std::move(options)) {}

Embedding HttpEmbedding::embed(std::string_view input) {
  const nlohmann::json body{{"model", options_.model}, {"text", input}};
  const std::string reply =
      http_post_json(options_.endpoint, body.dump(), options_.auth_token, options_.timeout);
  Embedding v;
  try {
    v = nlohmann::json::parse(reply).at("vector").get<Embedding>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("bad embedding response: ") + e.what(), false);
  }
  if (options_.dimension != 0 && v.size() != options_.dimension) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding backend returned " +
                                                   std::to_string(v.size()) + " values");
  }
  return normalize(std::move(v));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorCode::kZeroVector, "cosine of a zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<RetrievalHit> retrieve_top_k(std::span<const RecordPtr> records,
                                         std::span<const double> query, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  std::vector<RetrievalHit> hits;
  hits.reserve(records.size());
  for (const auto& r : records) hits.push_back({r, cosine_similarity(query, r->embedding)});
  const auto better = [](const RetrievalHit& x, const RetrievalHit& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.record->created_seq < y.record->created_seq;
  };
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(),
                    better);
  hits.resize(n);
  return hits;
}

std::vector<RetrievalHit> retrieve_top_k(const MemoryBank& bank, std::span<const double> query,
                                         std::size_t k) {
  const auto snap = bank.snapshot();
  return retrieve_top_k(std::span<const RecordPtr>(snap), query, k);
}

std::vector<MemoryItem> gather_items(std::span<const RetrievalHit> hits) {
  std::vector<MemoryItem> items;
  for (const auto& h : hits) items.insert(items.end(), h.record->items.begin(), h.record->items.end());
  return items;
}

}  // namespace stratmem
