// SPDX-License-Identifier: Apache-2.0
// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "stratmem/error.hpp"
#include "stratmem/harness.hpp"
#include "stratmem/text.hpp"
#include "test_support.hpp"

using namespace stratmem;
using namespace stratmem::testing;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

RunResult run_with(const RunConfig& config, RunServices services, const RunOptions& options = {}) {
  return run_stream(load_stream(config.paths.stream), config, services, options);
}

RunResult run_config(const RunConfig& config, std::shared_ptr<PromptLog> log = nullptr,
                     const RunOptions& options = {}) {
  RunServices services = make_services(config);
  services.prompt_log = std::move(log);
  return run_with(config, std::move(services), options);
}

std::shared_ptr<ScriptedBackend> policy_backend(JudgePolicy judge, SelectorPolicy selector,
                                                double noise, std::uint64_t seed) {
  auto b = std::make_shared<ScriptedBackend>(seed);
  auto o = shop_policy_options();
  o.judge = judge;
  o.selector = selector;
  o.noise = noise;
  add_world_policy(*b, o);
  return b;
}

RunConfig scaled(const std::string& stream, ScalingMode mode, std::size_t k, bool aggregate = true,
                 std::size_t width = 1) {
  RunConfig c = shop_config(stream, true);
  c.scaling.mode = mode;
  c.scaling.k = k;
  c.scaling.aggregate = aggregate;
  c.scaling.width = width;
  return c;
}

std::size_t successes_in(const RunResult& r, std::size_t from, std::size_t to) {
  std::size_t n = 0;
  for (std::size_t i = from; i < to; ++i) n += r.report.tasks.at(i).success ? 1 : 0;
  return n;
}

// 1. Memory transfers to related tasks.
Outcome transfer() {
  const auto start = std::chrono::steady_clock::now();
  const auto on = run_config(shop_config("transfer20", true));
  const auto off = run_config(shop_config("transfer20", false));
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::size_t with = successes_in(on, 10, 20);
  const std::size_t without = successes_in(off, 10, 20);
  return {with >= 9 && without <= 1 && secs < 10.0,
          "T11-T20 memory on " + std::to_string(with) + "/10, off " + std::to_string(without) +
              "/10, " + fmt(secs) + "s"};
}

// 2. Memory shortens successful episodes. Expected values come straight from
// the world's stored solutions and the policy's uninformed plans.
Outcome efficiency() {
  const auto script = json::parse(text::read_file(shop_script_path()));
  const auto world = ScriptedWorld::load(shop_world_path());
  const auto tasks = load_stream(stream_path("efficiency10"));
  double expect_off = 0, expect_on = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& plan = script.at("world_policy").at("plans").at(tasks[i].task_id);
    const double uninformed = static_cast<double>(plan.at("uninformed").size());
    const double informed =
        plan.contains("informed") && !plan.at("informed").empty()
            ? static_cast<double>(plan.at("informed").size())
            : static_cast<double>(world.find_task(tasks[i].task_id)->solution.size());
    expect_off += uninformed;
    expect_on += i == 0 ? uninformed : informed;  // the first task has nothing to retrieve
  }
  expect_off /= static_cast<double>(tasks.size());
  expect_on /= static_cast<double>(tasks.size());

  const auto off = run_config(shop_config("efficiency10", false)).report.metrics;
  const auto on = run_config(shop_config("efficiency10", true)).report.metrics;
  const double got_off = off.avg_steps_on_success.value_or(-1);
  const double got_on = on.avg_steps_on_success.value_or(-1);
  const bool pass = off.successes == tasks.size() && on.successes == tasks.size() &&
                    std::abs(got_off - expect_off) < 1e-9 && std::abs(got_on - expect_on) < 1e-9 &&
                    got_on < got_off;
  return {pass, "avg steps on success: off " + fmt(got_off) + " (expected " + fmt(expect_off) +
                    "), on " + fmt(got_on) + " (expected " + fmt(expect_on) + ")"};
}

// 3. Top-k retrieval equals a sort-everything oracle.
Outcome retrieval() {
  std::mt19937_64 rng(2024);
  std::size_t agree = 0;
  const std::size_t cases = 1000;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t dim = 2 + rng() % 14;
    const std::size_t n = rng() % 150;
    const std::size_t k = 1 + rng() % 8;
    std::vector<Embedding> pool;
    for (std::size_t p = 0, m = 1 + rng() % 6; p < m; ++p) pool.push_back(random_unit_vector(rng, dim));
    MemoryBank bank;
    for (std::size_t i = 0; i < n; ++i) {
      ExperienceRecord r = random_record(rng, dim);
      if (rng() % 2) r.embedding = pool[rng() % pool.size()];
      bank.consolidate(std::move(r));
    }
    const Embedding q = random_unit_vector(rng, dim);
    std::vector<std::pair<double, std::uint64_t>> all;
    for (const auto& r : bank.snapshot()) {
      double dot = 0, nq = 0, nr = 0;
      for (std::size_t d = 0; d < dim; ++d) {
        dot += q[d] * r->embedding[d];
        nq += q[d] * q[d];
        nr += r->embedding[d] * r->embedding[d];
      }
      all.emplace_back(dot / std::sqrt(nq * nr), r->created_seq);
    }
    std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.first > b.first; });
    const auto hits = retrieve_top_k(bank, q, k);
    bool same = hits.size() == std::min(k, all.size());
    for (std::size_t i = 0; same && i < hits.size(); ++i) same = hits[i].record->created_seq == all[i].second;
    agree += same ? 1 : 0;
  }
  return {agree == cases, std::to_string(agree) + "/" + std::to_string(cases) + " cases match"};
}

// 4. Consolidation keeps the bank append-only and bounded.
Outcome consolidation() {
  std::mt19937_64 rng(4242);
  std::size_t ok = 0;
  const std::size_t cases = 1000;
  for (std::size_t c = 0; c < cases; ++c) {
    MemoryBank bank;
    std::vector<RecordPtr> before;
    bool good = true;
    for (std::size_t step = 0, n = 1 + rng() % 12; step < n && good; ++step) {
      ExperienceRecord r = random_record(rng, 8);
      const bool invalid = rng() % 4 == 0;
      if (invalid) {
        switch (rng() % 3) {
          case 0: r.items.clear(); break;
          case 1: r.items.resize(kMaxItemsPerRecord + 1, r.items.front()); break;
          default: for (auto& x : r.embedding) x *= 1.5;
        }
      }
      const std::size_t size0 = bank.size();
      bool threw = false;
      try {
        const auto& added = bank.consolidate(r);
        good = good && added.created_seq == size0 && added.items == r.items;
      } catch (const Error&) {
        threw = true;
      }
      good = good && threw == invalid && bank.size() == size0 + (invalid ? 0 : 1);
      const auto now = bank.snapshot();
      for (std::size_t i = 0; good && i < before.size(); ++i) good = now[i] == before[i];
      for (const auto& rec : now) good = good && !rec->items.empty() && rec->items.size() <= kMaxItemsPerRecord;
      before = now;
    }
    ok += good ? 1 : 0;
  }
  return {ok == cases, std::to_string(ok) + "/" + std::to_string(cases) + " property cases hold"};
}

// 5. Both scaling modes at k=1 issue exactly the unscaled prompt stream.
Outcome k1_degeneracy() {
  const auto prompts = [](const RunConfig& c) {
    auto log = std::make_shared<PromptLog>();
    run_config(c, log);
    std::vector<std::string> out;
    for (const auto& e : log->entries()) {
      json j{{"system", e.request.system_instruction}, {"tag", to_string(e.request.tag)},
             {"temperature", e.request.temperature}, {"template_id", e.request.template_id}};
      for (const auto& m : e.request.messages) j["messages"].push_back({m.role, m.text});
      out.push_back(j.dump());
    }
    return out;
  };
  const auto base = prompts(shop_config("transfer20", true));
  const auto par = prompts(scaled("transfer20", ScalingMode::kParallel, 1));
  const auto seq = prompts(scaled("transfer20", ScalingMode::kSequential, 1));
  return {!base.empty() && base == par && base == seq,
          std::to_string(base.size()) + " prompts; parallel " + (base == par ? "identical" : "differs") +
              ", sequential " + (base == seq ? "identical" : "differs")};
}

// 6. Best-of-N with a correct selector never trails pass@1; pass@k' is monotone.
Outcome best_of_n() {
  bool pass = true;
  std::string detail;
  // Every success pattern of pools up to 5, with the selector that picks the first success.
  std::size_t patterns = 0;
  for (std::size_t k = 1; k <= 5; ++k) {
    for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
      TaskResult r;
      r.task_id = "P" + std::to_string(mask);
      for (std::size_t i = 0; i < k; ++i) r.rollout_success.push_back(mask >> i & 1u);
      const auto first = std::find(r.rollout_success.begin(), r.rollout_success.end(), true);
      r.best_index = first == r.rollout_success.end() ? 0 : static_cast<std::size_t>(first - r.rollout_success.begin());
      r.success = r.rollout_success[r.best_index];
      for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const auto m = compute_metrics(std::vector<TaskResult>{r}, seed);
        pass = pass && m.best_of_n >= m.pass_at_1;
        for (std::size_t i = 1; i < m.pass_at_k.size(); ++i) pass = pass && m.pass_at_k[i] >= m.pass_at_k[i - 1];
        ++patterns;
      }
    }
  }
  detail = std::to_string(patterns) + " exhaustive pools";
  // Live runs with noisy rollouts and the oracle selector.
  for (std::size_t k = 2; k <= 5; ++k) {
    const auto config = scaled("transfer20", ScalingMode::kParallel, k, true, 2);
    RunServices s = services_with(policy_backend(JudgePolicy::kOracle, SelectorPolicy::kOracle, 0.5, 7));
    const auto m = run_with(config, std::move(s)).report.metrics;
    bool mono = true;
    for (std::size_t i = 1; i < m.pass_at_k.size(); ++i) mono = mono && m.pass_at_k[i] >= m.pass_at_k[i - 1];
    const bool ok = m.best_of_n >= m.pass_at_1 && mono && m.pass_at_k.size() == k;
    pass = pass && ok;
    detail += "; k=" + std::to_string(k) + " pass@1 " + fmt(m.pass_at_1) + " BoN " + fmt(m.best_of_n) +
              " pass@k " + fmt(m.pass_at_k.back());
  }
  return {pass, detail};
}

// 7. Aggregated scaling consolidates once per task; vanilla once per rollout.
Outcome aggregation() {
  const auto agg = run_config(scaled("learn10", ScalingMode::kParallel, 3, true, 3));
  const auto van = run_config(scaled("learn10", ScalingMode::kParallel, 3, false, 3));
  return {agg.bank.size() == 10 && van.bank.size() == 30,
          "aggregate +" + std::to_string(agg.bank.size()) + ", non-aggregate +" +
              std::to_string(van.bank.size())};
}

// 8. Failures are reflected on with the failure template and their lessons are kept.
Outcome failure_learning() {
  const auto check_run = [](JudgePolicy judge, double noise, std::size_t& failures,
                            std::size_t& mismatched, std::size_t& unretrievable) {
    const auto config = shop_config("transfer20", true);
    RunServices s = services_with(policy_backend(judge, SelectorPolicy::kFirst, noise, 7));
    auto log = s.prompt_log;
    auto embedding = s.embedding;
    const auto out = run_with(config, std::move(s));
    std::map<std::string, std::string> extraction_template;
    for (const auto& e : entries_with_tag(*log, Tag::kExtract)) {
      extraction_template[stream_task_id(e.request.stream)] = e.request.template_id;
    }
    const auto records = out.bank.snapshot();
    for (const auto& t : out.report.tasks) {
      if (t.verdict.success()) continue;
      ++failures;
      if (extraction_template[t.task_id] != tmpl::kExtractFailure) ++mismatched;
      const auto rec = std::find_if(records.begin(), records.end(),
                                    [&](const RecordPtr& r) { return r->task_id == t.task_id; });
      if (rec == records.end() || (*rec)->verdict.success()) {
        ++unretrievable;
        continue;
      }
      const auto hits = retrieve_top_k(out.bank, embedding->embed((*rec)->query), 1);
      if (hits.empty() || cosine_similarity(hits[0].record->embedding, (*rec)->embedding) < 1.0 - 1e-9) {
        ++unretrievable;
      }
    }
  };
  std::size_t failures = 0, mismatched = 0, unretrievable = 0;
  check_run(JudgePolicy::kAlwaysFailure, 0.0, failures, mismatched, unretrievable);
  const std::size_t forced = failures;
  check_run(JudgePolicy::kOracle, 0.4, failures, mismatched, unretrievable);
  return {forced == 20 && failures > forced && mismatched == 0 && unretrievable == 0,
          std::to_string(failures) + " failure verdicts (" + std::to_string(forced) +
              " forced), template mismatches " + std::to_string(mismatched) + ", unretrievable " +
              std::to_string(unretrievable)};
}

// 9. Same config and seeds give byte-identical reports.
Outcome determinism() {
  TempDir dir;
  bool pass = true;
  std::string detail;
  const std::vector<std::pair<std::string, RunConfig>> configs{
      {"transfer", shop_config("transfer20", true)},
      {"parallel", load_config(data_dir() / "configs" / "parallel3.json")},
      {"sequential", scaled("learn10", ScalingMode::kSequential, 3)}};
  for (const auto& [name, config] : configs) {
    run_config(config, std::make_shared<PromptLog>(), {dir / (name + "-a")});
    run_config(config, std::make_shared<PromptLog>(), {dir / (name + "-b")});
    const bool same = text::read_file(dir / (name + "-a") / "report.json") ==
                      text::read_file(dir / (name + "-b") / "report.json");
    pass = pass && same;
    detail += (detail.empty() ? "" : ", ") + name + (same ? " identical" : " differs");
  }
  return {pass, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"memory transfer", transfer},
      {"memory efficiency", efficiency},
      {"top-k retrieval", retrieval},
      {"consolidation invariants", consolidation},
      {"k=1 degeneracy", k1_degeneracy},
      {"best-of-n and pass@k", best_of_n},
      {"aggregation arity", aggregation},
      {"learning from failures", failure_learning},
      {"determinism", determinism}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
