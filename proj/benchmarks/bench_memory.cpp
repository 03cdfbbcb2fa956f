// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "stratmem/judgment.hpp"
#include "stratmem/memory.hpp"
#include "stratmem/retrieval.hpp"

namespace {

using namespace stratmem;

Embedding unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g;
  Embedding v(dim);
  for (double& x : v) x = g(rng);
  return normalize(std::move(v));
}

ExperienceRecord record(std::mt19937_64& rng, std::size_t dim) {
  ExperienceRecord r;
  r.task_id = "T";
  r.query = "What is the list price of the Wool Scarf?";
  r.items = {{"Use the member filter", "Member prices hide behind a filter.",
              "Apply filter(member,yes) before reading prices."}};
  r.embedding = unit(rng, dim);
  return r;
}

MemoryBank bank_of(std::size_t n, std::size_t dim) {
  std::mt19937_64 rng(1);
  MemoryBank bank;
  for (std::size_t i = 0; i < n; ++i) bank.consolidate(record(rng, dim));
  return bank;
}

void BM_Cosine(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto dim = static_cast<std::size_t>(state.range(0));
  const Embedding a = unit(rng, dim), b = unit(rng, dim);
  for (auto _ : state) benchmark::DoNotOptimize(cosine_similarity(a, b));
}
BENCHMARK(BM_Cosine)->Arg(64)->Arg(768)->Arg(3072);

void BM_TopK(benchmark::State& state) {
  const auto bank = bank_of(static_cast<std::size_t>(state.range(0)), 256);
  std::mt19937_64 rng(3);
  const Embedding q = unit(rng, 256);
  for (auto _ : state) benchmark::DoNotOptimize(retrieve_top_k(bank, q, 5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TopK)->Arg(100)->Arg(1000)->Arg(10000);

void BM_ParseMarkdown(benchmark::State& state) {
  std::string text = "Reviewing the trajectory.\n\n";
  for (int i = 1; i <= 3; ++i) {
    text += "# Memory Item " + std::to_string(i) +
            "\n## Title Check the page qualifiers\n## Description One sentence.\n"
            "## Content Open the section the request refers to,\nthen read the value.\n";
  }
  for (auto _ : state) benchmark::DoNotOptimize(parse_memory_markdown(text));
}
BENCHMARK(BM_ParseMarkdown);

void BM_Consolidate(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const ExperienceRecord r = record(rng, 256);
  for (auto _ : state) {
    state.PauseTiming();
    MemoryBank bank;
    state.ResumeTiming();
    for (int i = 0; i < 100; ++i) bank.consolidate(r);
    benchmark::DoNotOptimize(bank.size());
  }
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_Consolidate);

void BM_HashEmbedding(benchmark::State& state) {
  HashEmbedding h;
  for (auto _ : state) benchmark::DoNotOptimize(h.embed("What is the member price of the Wool Scarf?"));
}
BENCHMARK(BM_HashEmbedding);

}  // namespace

BENCHMARK_MAIN();
