// SPDX-License-Identifier: Apache-2.0
#include "stratmem/config.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "stratmem/error.hpp"
#include "stratmem/text.hpp"

namespace stratmem {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kInvalidConfig, field + ": " + why);
}

// Reads one JSON object, remembering which keys were consumed so leftovers
// can be reported by name.
class Section {
 public:
  Section(const json& doc, std::string prefix) : doc_(doc), prefix_(std::move(prefix)) {
    if (!doc_.is_object()) bad(prefix_.empty() ? "config" : prefix_, "expected an object");
  }

  std::string field(std::string_view key) const {
    return prefix_.empty() ? std::string(key) : prefix_ + "." + std::string(key);
  }

  const json* find(std::string_view key) {
    seen_.insert(std::string(key));
    auto it = doc_.find(std::string(key));
    return it == doc_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(std::string_view key, T& out) {
    if (const json* v = find(key)) {
      try {
        out = v->get<T>();
      } catch (const json::exception&) {
        bad(field(key), "wrong type");
      }
    }
  }

  void read_size(std::string_view key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
        bad(field(key), "expected a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }

  void read_u64(std::string_view key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
        bad(field(key), "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }

  void read_ms(std::string_view key, std::chrono::milliseconds& out) {
    std::size_t n = static_cast<std::size_t>(out.count());
    read_size(key, n);
    out = std::chrono::milliseconds(static_cast<std::int64_t>(n));
  }

  void read_path(std::string_view key, std::filesystem::path& out,
                 const std::filesystem::path& base) {
    std::string s;
    read(key, s);
    if (s.empty()) return;
    std::filesystem::path p(s);
    out = p.is_relative() ? (base / p).lexically_normal() : p;
  }

  template <typename F>
  void sub(std::string_view key, F&& f) {
    if (const json* v = find(key)) {
      Section s(*v, field(key));
      f(s);
      s.finish();
    }
  }

  void finish() const {
    for (const auto& [k, v] : doc_.items()) {
      if (!seen_.count(k)) bad(field(k), "unknown field");
    }
  }

 private:
  const json& doc_;
  std::string prefix_;
  std::set<std::string> seen_;
};

std::string path_string(const std::filesystem::path& p) { return p.generic_string(); }

}  // namespace

void RunConfig::validate() const {
  if (backend.kind == "scripted") {
    if (backend.script.empty()) bad("backend.script", "required for the scripted backend");
  } else if (backend.kind == "http") {
    if (backend.endpoint.empty()) bad("backend.endpoint", "required for the http backend");
    if (backend.model.empty()) bad("backend.model", "required for the http backend");
  } else {
    bad("backend.kind", "expected scripted or http, got '" + backend.kind + "'");
  }
  if (backend.retries < 0) bad("backend.retries", "must be non-negative");
  if (backend.max_in_flight == 0) bad("backend.max_in_flight", "must be at least 1");
  if (embedding.kind == "http") {
    if (embedding.endpoint.empty()) bad("embedding.endpoint", "required for http embeddings");
  } else if (embedding.kind != "hash") {
    bad("embedding.kind", "expected hash or http, got '" + embedding.kind + "'");
  }
  if (embedding.kind == "hash" && embedding.dim == 0) bad("embedding.dim", "must be positive");
  if (retrieval_k == 0) bad("retrieval_k", "must be at least 1");
  if (max_steps == 0) bad("max_steps", "must be at least 1");
  if (observation_window == 0) bad("observation_window", "must be at least 1");
  if (max_output == 0) bad("max_output", "must be at least 1");
  for (const auto& [tag, t] : temperatures.values()) {
    if (!(t >= 0.0 && t <= 2.0)) bad("temperatures." + std::string(to_string(tag)), "must be in [0, 2]");
  }
  if (scaling.k == 0) bad("scaling.k", "must be at least 1");
  if (scaling.width == 0) bad("scaling.width", "must be at least 1");
  if (scaling.mode == ScalingMode::kNone && scaling.k != 1) {
    bad("scaling.k", "must be 1 when scaling.mode is none");
  }
  if (paths.templates.empty()) bad("paths.templates", "required");
}

RunConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  RunConfig c;
  Section root(doc, "");
  root.sub("backend", [&](Section& s) {
    s.read("kind", c.backend.kind);
    s.read_path("script", c.backend.script, base_dir);
    s.read("endpoint", c.backend.endpoint);
    s.read("model", c.backend.model);
    s.read("auth_env", c.backend.auth_env);
    s.read_ms("timeout_ms", c.backend.timeout);
    s.read("retries", c.backend.retries);
    s.read_ms("retry_base_ms", c.backend.retry_base);
    s.read_size("max_in_flight", c.backend.max_in_flight);
    s.read_size("max_prompt_chars", c.backend.max_prompt_chars);
  });
  root.sub("embedding", [&](Section& s) {
    s.read("kind", c.embedding.kind);
    s.read_size("dim", c.embedding.dim);
    s.read_u64("seed", c.embedding.seed);
    s.read("endpoint", c.embedding.endpoint);
    s.read("model", c.embedding.model);
    s.read("auth_env", c.embedding.auth_env);
    s.read_ms("timeout_ms", c.embedding.timeout);
    s.read_path("cache", c.embedding.cache, base_dir);
  });
  if (const json* m = root.find("memory")) {
    if (m->is_boolean()) {
      c.memory = m->get<bool>();
    } else if (m->is_string() && (*m == "on" || *m == "off")) {
      c.memory = *m == "on";
    } else {
      bad("memory", "expected true/false or \"on\"/\"off\"");
    }
  }
  root.read_size("retrieval_k", c.retrieval_k);
  root.sub("scaling", [&](Section& s) {
    std::string mode(to_string(c.scaling.mode));
    s.read("mode", mode);
    auto parsed = scaling_mode_from_string(mode);
    if (!parsed) bad("scaling.mode", "expected none, parallel or sequential, got '" + mode + "'");
    c.scaling.mode = *parsed;
    s.read_size("k", c.scaling.k);
    s.read("aggregate", c.scaling.aggregate);
    s.read_size("width", c.scaling.width);
  });
  if (const json* t = root.find("temperatures")) {
    if (!t->is_object()) bad("temperatures", "expected an object");
    for (const auto& [name, value] : t->items()) {
      auto tag = tag_from_string(name);
      if (!tag) bad("temperatures." + name, "unknown tag");
      if (!value.is_number()) bad("temperatures." + name, "expected a number");
      c.temperatures.set(*tag, value.get<double>());
    }
  }
  root.read_size("max_steps", c.max_steps);
  root.read_size("observation_window", c.observation_window);
  root.read_size("max_output", c.max_output);
  root.sub("seeds", [&](Section& s) {
    s.read_u64("run", c.seeds.run);
    s.read_u64("pass_at_1", c.seeds.pass_at_1);
  });
  root.sub("paths", [&](Section& s) {
    s.read_path("templates", c.paths.templates, base_dir);
    s.read_path("stream", c.paths.stream, base_dir);
    s.read_path("initial_bank", c.paths.initial_bank, base_dir);
    s.read_path("run_root", c.paths.run_root, base_dir);
  });
  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kMissingFile, path.string());
  json doc;
  try {
    doc = json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path.string() + ": " + e.what());
  }
  return config_from_json(doc, std::filesystem::absolute(path).parent_path());
}

nlohmann::json config_to_json(const RunConfig& c) {
  json temps = json::object();
  for (const auto& [tag, t] : c.temperatures.values()) temps[std::string(to_string(tag))] = t;
  return {
      {"backend",
       {{"kind", c.backend.kind},
        {"script", path_string(c.backend.script)},
        {"endpoint", c.backend.endpoint},
        {"model", c.backend.model},
        {"auth_env", c.backend.auth_env},
        {"timeout_ms", c.backend.timeout.count()},
        {"retries", c.backend.retries},
        {"retry_base_ms", c.backend.retry_base.count()},
        {"max_in_flight", c.backend.max_in_flight},
        {"max_prompt_chars", c.backend.max_prompt_chars}}},
      {"embedding",
       {{"kind", c.embedding.kind},
        {"dim", c.embedding.dim},
        {"seed", c.embedding.seed},
        {"endpoint", c.embedding.endpoint},
        {"model", c.embedding.model},
        {"auth_env", c.embedding.auth_env},
        {"timeout_ms", c.embedding.timeout.count()},
        {"cache", path_string(c.embedding.cache)}}},
      {"memory", c.memory},
      {"retrieval_k", c.retrieval_k},
      {"scaling",
       {{"mode", to_string(c.scaling.mode)},
        {"k", c.scaling.k},
        {"aggregate", c.scaling.aggregate},
        {"width", c.scaling.width}}},
      {"temperatures", temps},
      {"max_steps", c.max_steps},
      {"observation_window", c.observation_window},
      {"max_output", c.max_output},
      {"seeds", {{"run", c.seeds.run}, {"pass_at_1", c.seeds.pass_at_1}}},
      {"paths",
       {{"templates", path_string(c.paths.templates)},
        {"stream", path_string(c.paths.stream)},
        {"initial_bank", path_string(c.paths.initial_bank)},
        {"run_root", path_string(c.paths.run_root)}}},
  };
}

std::string config_digest(const RunConfig& config) {
  return text::hex64(text::fnv1a(config_to_json(config).dump()));
}

void apply_overrides(RunConfig& config, const ConfigOverrides& o) {
  if (o.memory) config.memory = *o.memory;
  if (o.mode) config.scaling.mode = *o.mode;
  if (o.k) config.scaling.k = *o.k;
  if (o.aggregate) config.scaling.aggregate = *o.aggregate;
  if (o.width) config.scaling.width = *o.width;
  if (o.seed) config.seeds.run = *o.seed;
  config.validate();
}

}  // namespace stratmem
