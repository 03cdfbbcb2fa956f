// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "stratmem/error.hpp"
#include "stratmem/gateway.hpp"
#include "stratmem/http_backend.hpp"
#include "stratmem/scripted_backend.hpp"
#include "stratmem/templates.hpp"
#include "stratmem/world_policy.hpp"
#include "test_support.hpp"

using namespace stratmem;
using namespace stratmem::testing;
using namespace std::chrono_literals;

namespace {

class FlakyBackend final : public Backend {
 public:
  FlakyBackend(int failures, bool transient, bool retryable = true)
      : failures_(failures), transient_(transient), retryable_(retryable) {}
  std::string generate(const GenerationRequest&) override {
    ++calls;
    if (calls <= failures_) throw TransportError("boom", transient_);
    return "ok";
  }
  bool retryable() const override { return retryable_; }
  std::string id() const override { return "flaky"; }
  int calls = 0;

 private:
  int failures_;
  bool transient_;
  bool retryable_;
};

GenerationRequest judge_request() {
  return shipped_templates().build(tmpl::kJudge, {{"query", "q"},
                                                  {"trajectory", "t"},
                                                  {"final_state", "s"},
                                                  {"answer", "a"}});
}

// One-shot local HTTP server for backend tests.
class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat", [handler](const httplib::Request& req, httplib::Response& res) {
      handler(req, res);
    });
    server_.Post("/embed", [handler](const httplib::Request& req, httplib::Response& res) {
      handler(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("temperature defaults by tag") {
  TemperatureTable t;
  CHECK(t.of(Tag::kAct) == 0.7);
  CHECK(t.of(Tag::kExtract) == 1.0);
  CHECK(t.of(Tag::kJudge) == 0.0);
  CHECK(t.of(Tag::kSelect) == 0.0);
  CHECK(t.of(Tag::kContrast) == 1.0);
  CHECK(t.of(Tag::kRefine) == 0.7);
  t.set(Tag::kJudge, 0.3);
  CHECK(t.of(Tag::kJudge) == 0.3);
  CHECK(judge_request().temperature == 0.0);
  CHECK(judge_request().tag == Tag::kJudge);
}

TEST_CASE("tag names round trip") {
  for (Tag t : {Tag::kAct, Tag::kExtract, Tag::kJudge, Tag::kContrast, Tag::kRefine, Tag::kSelect}) {
    CHECK(tag_from_string(to_string(t)) == t);
  }
  CHECK_FALSE(tag_from_string("bogus"));
}

TEST_CASE("scripted backend: first matching rule wins, unmatched fails closed") {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->on(Tag::kJudge, "Success");
  backend->on(Tag::kJudge, "Failure");
  ModelGateway gw(backend);
  CHECK(gw.complete(judge_request()) == "Success");
  GenerationRequest act;
  act.tag = Tag::kAct;
  try {
    gw.complete(act);
    FAIL("expected unscripted request");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnscriptedRequest);
  }
}

TEST_CASE("scripted backend: counters per stream, deterministic under a seed") {
  auto make = [](std::uint64_t seed) {
    auto b = std::make_shared<ScriptedBackend>(seed);
    b->add({"cyc", match_tag(Tag::kAct), cycle({"a", "b", "c"})});
    b->add({"seeded", match_tag(Tag::kJudge), seeded_choice({"x", "y", "z", "w"})});
    return b;
  };
  auto b = make(1);
  GenerationRequest r;
  r.tag = Tag::kAct;
  r.stream = "s1";
  CHECK(b->generate(r) == "a");
  CHECK(b->generate(r) == "b");
  r.stream = "s2";
  CHECK(b->generate(r) == "a");
  r.stream = "s1";
  CHECK(b->generate(r) == "c");
  CHECK(b->calls() == 4);

  std::vector<std::string> first, second;
  for (auto* out : {&first, &second}) {
    auto fresh = make(42);
    GenerationRequest j;
    j.tag = Tag::kJudge;
    for (int i = 0; i < 20; ++i) {
      j.stream = "T" + std::to_string(i % 3);
      out->push_back(fresh->generate(j));
    }
  }
  CHECK(first == second);
}

TEST_CASE("match_tag_containing looks at the full request text") {
  ScriptedBackend b;
  b.add({"needle", match_tag_containing(Tag::kAct, "needle"), cycle({"found"})});
  b.on(Tag::kAct, "default");
  GenerationRequest r;
  r.tag = Tag::kAct;
  r.system_instruction = "sys";
  r.messages.push_back({"user", "has a needle inside"});
  CHECK(b.generate(r) == "found");
  r.messages[0].text = "nothing";
  CHECK(b.generate(r) == "default");
}

TEST_CASE("gateway retries transient failures with exponential backoff") {
  std::vector<std::chrono::milliseconds> slept;
  RetryPolicy policy{3, 500ms, [&](std::chrono::milliseconds d) { slept.push_back(d); }};

  auto flaky = std::make_shared<FlakyBackend>(2, true);
  ModelGateway gw(flaky, policy);
  CHECK(gw.complete({}) == "ok");
  CHECK(flaky->calls == 3);
  CHECK(slept == std::vector<std::chrono::milliseconds>{500ms, 1000ms});

  slept.clear();
  auto dead = std::make_shared<FlakyBackend>(100, true);
  ModelGateway gw2(dead, policy);
  CHECK_THROWS_AS(gw2.complete({}), TransportError);
  CHECK(dead->calls == 4);
  CHECK(slept == std::vector<std::chrono::milliseconds>{500ms, 1000ms, 2000ms});

  slept.clear();
  auto permanent = std::make_shared<FlakyBackend>(1, false);
  ModelGateway gw3(permanent, policy);
  CHECK_THROWS_AS(gw3.complete({}), TransportError);
  CHECK(permanent->calls == 1);
  CHECK(slept.empty());

  auto scripted_like = std::make_shared<FlakyBackend>(1, true, false);
  ModelGateway gw4(scripted_like, policy);
  CHECK_THROWS_AS(gw4.complete({}), TransportError);
  CHECK(scripted_like->calls == 1);
}

TEST_CASE("gateway enforces the prompt budget and logs prompts") {
  auto backend = std::make_shared<ScriptedBackend>();
  backend->on(Tag::kJudge, "Status: Success");
  auto log = std::make_shared<PromptLog>();
  ModelGateway gw(backend, {}, 50);
  gw.set_prompt_log(log);
  try {
    gw.complete(judge_request());
    FAIL("expected budget error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBudgetExceeded);
  }
  CHECK(backend->calls() == 0);
  ModelGateway roomy(backend);
  roomy.set_prompt_log(log);
  roomy.complete(judge_request());
  REQUIRE(log->size() == 1);
  CHECK(log->entries()[0].response == "Status: Success");
}

TEST_CASE("templates: parse, substitute once, fail on missing slots") {
  const auto t = PromptTemplate::parse("act", "System {{a}} text\n--- user ---\nUser {{b}} and {{a}}");
  CHECK(t.system == "System {{a}} text");
  CHECK(t.user == "User {{b}} and {{a}}");
  CHECK(t.slot_names() == std::set<std::string>{"a", "b"});

  TemplateStore store;
  store.add(t);
  const auto req = store.build("act", {{"a", "{{b}}"}, {"b", "B"}, {"extra", "ignored"}});
  CHECK(req.system_instruction == "System {{b}} text");  // values are never re-scanned
  REQUIRE(req.messages.size() == 1);
  CHECK(req.messages[0].role == "user");
  CHECK(req.messages[0].text == "User B and {{b}}");

  try {
    store.build("act", {{"a", "x"}});
    FAIL("expected missing slot");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingSlot);
    CHECK(std::string(e.what()).find("b") != std::string::npos);
  }
  try {
    store.build("nope", {});
    FAIL("expected unknown template");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownTemplate);
  }
}

TEST_CASE("a leading license line is not part of the prompt") {
  const auto t = PromptTemplate::parse("act", "// SPDX-License-Identifier: Apache-2.0\nSys\n--- user ---\nU");
  CHECK(t.system == "Sys");
  CHECK(t.user == "U");
  for (const auto& [id, slots] : required_template_slots()) {
    CHECK(shipped_templates().get(id).system.find("SPDX") == std::string::npos);
  }
}

TEST_CASE("shipped templates are complete and byte-faithful") {
  const TemplateStore& store = shipped_templates();
  CHECK(store.check().empty());

  const auto success = store.build(tmpl::kExtractSuccess, {{"query", "Q"}, {"trajectory", "T"}});
  CHECK(success.system_instruction.find("successfully accomplished") != std::string::npos);
  CHECK(success.tag == Tag::kExtract);
  CHECK(success.temperature == 1.0);

  const auto judge = judge_request();
  CHECK(judge.system_instruction.find("Status: Success") != std::string::npos);
  CHECK(judge.system_instruction.find("Status: Failure") != std::string::npos);

  // Every literal segment of every template appears in the built prompt.
  for (const auto& [id, slots] : required_template_slots()) {
    Slots values;
    for (const auto& s : slots) values[s] = "<" + s + ">";
    const auto req = store.build(id, values);
    const std::string built = req.system_instruction + "\n" + req.messages[0].text;
    for (const auto& seg : store.get(id).literal_segments()) {
      CHECK_MESSAGE(built.find(seg) != std::string::npos, id);
    }
  }
}

TEST_CASE("template check reports missing files and slots") {
  TemplateStore store;
  store.add(PromptTemplate::parse("judge", "no slots\n--- user ---\n{{query}}"));
  const auto problems = store.check();
  CHECK(problems.size() >= 2);
  bool missing_act = false, judge_slot = false;
  for (const auto& p : problems) {
    missing_act = missing_act || p.find("act") != std::string::npos;
    judge_slot = judge_slot || p.find("trajectory") != std::string::npos;
  }
  CHECK(missing_act);
  CHECK(judge_slot);
}

TEST_CASE("http backend speaks the chat schema and maps errors") {
  std::atomic<int> hits{0};
  std::atomic<int> fail_first{0};
  nlohmann::json seen;
  std::string auth;
  std::mutex m;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    {
      std::lock_guard lock(m);
      seen = nlohmann::json::parse(req.body);
      auth = req.get_header_value("Authorization");
    }
    if (fail_first > 0) {
      --fail_first;
      res.status = 503;
      return;
    }
    if (seen.value("model", "") == "bad") {
      res.status = 400;
      res.set_content("nope", "text/plain");
      return;
    }
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Status: Success"}}]})",
                    "application/json");
  });

  HttpBackendOptions o;
  o.endpoint = server.url("/v1/chat");
  o.model = "m1";
  o.auth_token = "secret";
  o.timeout = 5000ms;
  auto backend = std::make_shared<HttpBackend>(o);
  std::vector<std::chrono::milliseconds> slept;
  ModelGateway gw(backend, {3, 10ms, [&](std::chrono::milliseconds d) { slept.push_back(d); }});

  GenerationRequest req = judge_request();
  CHECK(gw.complete(req) == "Status: Success");
  {
    std::lock_guard lock(m);
    CHECK(seen.at("model") == "m1");
    CHECK(seen.at("temperature") == 0.0);
    CHECK(seen.at("messages").at(0).at("role") == "system");
    CHECK(seen.at("messages").at(1).at("role") == "user");
    CHECK(auth == "Bearer secret");
  }

  fail_first = 2;
  hits = 0;
  CHECK(gw.complete(req) == "Status: Success");
  CHECK(hits == 3);
  CHECK(slept.size() == 2);

  o.model = "bad";
  ModelGateway bad(std::make_shared<HttpBackend>(o), {3, 1ms, [](auto) {}});
  hits = 0;
  try {
    bad.complete(req);
    FAIL("expected transport error");
  } catch (const TransportError& e) {
    CHECK_FALSE(e.transient());
  }
  CHECK(hits == 1);
}

TEST_CASE("http backend: connection refused is transient") {
  HttpBackendOptions o;
  o.endpoint = "http://127.0.0.1:1/v1/chat";
  o.model = "m";
  o.timeout = 500ms;
  HttpBackend backend(o);
  try {
    backend.generate(judge_request());
    FAIL("expected transport error");
  } catch (const TransportError& e) {
    CHECK(e.transient());
  }
  CHECK_THROWS_AS(parse_url("not a url"), Error);
  CHECK(HttpBackend::parse_response(R"({"choices":[{"message":{"content":"hi"}}]})") == "hi");
  CHECK_THROWS_AS(HttpBackend::parse_response("{}"), TransportError);
}

TEST_CASE("http embedding round trip") {
  LocalServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const double n = static_cast<double>(body.at("text").get<std::string>().size());
    res.set_content(nlohmann::json{{"vector", {3.0, n}}}.dump(), "application/json");
  });
  HttpEmbeddingOptions o;
  o.endpoint = server.url("/embed");
  o.model = "e";
  o.dimension = 2;
  HttpEmbedding e(o);
  const auto v = e.embed("four");
  CHECK(v[0] == doctest::Approx(0.6));
  CHECK(v[1] == doctest::Approx(0.8));
}

TEST_CASE("script files load rules and world policy") {
  TempDir dir;
  const nlohmann::json doc{{"version", 1},
                           {"seed", 3},
                           {"rules",
                            {{{"name", "j"}, {"tag", "judge"}, {"contains", "needle"},
                              {"responses", {"Status: Success"}}}}}};
  auto b = script_from_json(doc, dir.path());
  CHECK(b->rule_count() == 1);
  GenerationRequest r = judge_request();
  CHECK_THROWS_AS(b->generate(r), Error);
  r.messages[0].text += " needle";
  CHECK(b->generate(r) == "Status: Success");

  auto shop = load_script(shop_script_path());
  CHECK(shop->rule_count() == 5);
  CHECK_THROWS_AS(script_from_json(nlohmann::json{{"version", 2}}, dir.path()), Error);
}
