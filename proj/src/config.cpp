// Copyright 2026 The paostruct Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "paostruct/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "paostruct/io.hpp"
#include "paostruct/text.hpp"

extern char** environ;

#ifndef PAOSTRUCT_DEFAULT_DATA_DIR
#define PAOSTRUCT_DEFAULT_DATA_DIR "data"
#endif

namespace paostruct::config {

namespace {

Error config_error(const std::string& msg) { return Error(ErrorCode::kConfigError, msg); }

void check_keys(const Json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw config_error(std::string(where) + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw config_error("unknown key '" + std::string(where) + "." + k + "'");
    }
  }
}

template <typename T>
void read(const Json& obj, const char* key, std::string_view where, T& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw config_error(std::string(where) + "." + key + " has the wrong type");
  }
}

void read_path(const Json& obj, const char* key, std::string_view where, const std::filesystem::path& base,
               std::filesystem::path& out) {
  std::string s;
  read(obj, key, where, s);
  if (s.empty()) return;
  std::filesystem::path p(s);
  out = p.is_absolute() ? p : base / p;
}

void read_ms(const Json& obj, const char* key, std::string_view where, std::chrono::milliseconds& out) {
  std::int64_t v = out.count();
  read(obj, key, where, v);
  out = std::chrono::milliseconds(v);
}

bool parse_bool(const std::string& name, const std::string& v) {
  const std::string s = text::to_lower(v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off" || s.empty()) return false;
  throw config_error(name + " must be a boolean, got '" + v + "'");
}

long parse_int(const std::string& name, const std::string& v) {
  try {
    std::size_t used = 0;
    const long n = std::stol(v, &used);
    if (used == v.size()) return n;
  } catch (const std::exception&) {
  }
  throw config_error(name + " must be an integer, got '" + v + "'");
}

std::vector<double> parse_thresholds(const std::string& name, const std::string& v) {
  std::vector<double> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = v.find(',', start);
    const std::string cell = text::collapse_whitespace(std::string_view(v).substr(start, comma - start));
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw config_error(name + ": '" + cell + "' is not a number");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

std::filesystem::path default_data_dir() {
  if (const char* dir = std::getenv("PAOSTRUCT_DATA_DIR"); dir != nullptr && *dir != '\0') return dir;
  return PAOSTRUCT_DEFAULT_DATA_DIR;
}

std::map<std::string, std::string> environment_overrides() {
  std::map<std::string, std::string> out;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    std::string_view kv(*e);
    if (kv.rfind("PAOSTRUCT_", 0) != 0) continue;
    const std::size_t eq = kv.find('=');
    if (eq == std::string_view::npos) continue;
    out.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
  }
  return out;
}

RunConfig RunConfig::defaults() {
  const std::filesystem::path data = default_data_dir();
  RunConfig c;
  c.engine.lexicon = data / "lexicon" / "abcdef_lexicon.json";
  c.engine.templates = data / "templates";
  c.ontology.fixture = data / "ontology" / "fixture.json";
  c.protocol = data / "protocols" / "abcdef.json";
  return c;
}

void RunConfig::merge_json(const Json& doc, const std::filesystem::path& base) {
  check_keys(doc, "config",
             {"engine", "server", "cache", "ontology", "eval", "protocol", "max_iterations"});
  if (auto e = doc.find("engine"); e != doc.end()) {
    check_keys(*e, "engine",
               {"mode", "endpoint", "model", "api_key_env", "temperature", "max_output_tokens", "timeout_ms",
                "max_attempts", "repair_rounds", "requests_per_second", "burst", "lexicon", "templates"});
    std::string mode = engine.stub ? "stub" : "remote";
    read(*e, "mode", "engine", mode);
    if (mode != "stub" && mode != "remote") throw config_error("engine.mode must be 'stub' or 'remote'");
    engine.stub = mode == "stub";
    read(*e, "endpoint", "engine", engine.remote.endpoint_url);
    read(*e, "model", "engine", engine.remote.model_id);
    read(*e, "api_key_env", "engine", engine.remote.api_key_env);
    read(*e, "temperature", "engine", engine.remote.temperature);
    read(*e, "max_output_tokens", "engine", engine.remote.max_output_tokens);
    read_ms(*e, "timeout_ms", "engine", engine.remote.request_timeout);
    read(*e, "max_attempts", "engine", engine.remote.retry.max_attempts);
    read(*e, "repair_rounds", "engine", engine.remote.repair_rounds);
    read(*e, "requests_per_second", "engine", engine.remote.requests_per_second);
    read(*e, "burst", "engine", engine.remote.burst);
    read_path(*e, "lexicon", "engine", base, engine.lexicon);
    read_path(*e, "templates", "engine", base, engine.templates);
  }
  if (auto s = doc.find("server"); s != doc.end()) {
    check_keys(*s, "server", {"transport", "host", "port", "command", "call_timeout_ms", "tools"});
    read(*s, "transport", "server", server.transport);
    read(*s, "host", "server", server.host);
    read(*s, "port", "server", server.port);
    read(*s, "command", "server", server.command);
    read_ms(*s, "call_timeout_ms", "server", server.call_timeout);
    read(*s, "tools", "server", server.tools);
  }
  if (auto c = doc.find("cache"); c != doc.end()) {
    check_keys(*c, "cache", {"path", "enabled"});
    read_path(*c, "path", "cache", base, cache.path);
    read(*c, "enabled", "cache", cache.enabled);
  }
  if (auto o = doc.find("ontology"); o != doc.end()) {
    check_keys(*o, "ontology",
               {"mode", "fixture", "base_url", "api_key_env", "timeout_ms", "max_attempts", "hierarchy_depth",
                "ontologies", "response_cache"});
    read(*o, "mode", "ontology", ontology.mode);
    read_path(*o, "fixture", "ontology", base, ontology.fixture);
    read(*o, "base_url", "ontology", ontology.remote.base_url);
    read(*o, "api_key_env", "ontology", ontology.remote.api_key_env);
    read_ms(*o, "timeout_ms", "ontology", ontology.remote.timeout);
    read(*o, "max_attempts", "ontology", ontology.remote.max_attempts);
    read(*o, "hierarchy_depth", "ontology", ontology.remote.hierarchy_depth);
    read(*o, "ontologies", "ontology", ontology.ontologies);
    read_path(*o, "response_cache", "ontology", base, ontology.response_cache);
  }
  if (auto v = doc.find("eval"); v != doc.end()) {
    check_keys(*v, "eval", {"thresholds", "granularity"});
    read(*v, "thresholds", "eval", eval.thresholds);
    std::string g(eval::to_string(eval.granularity));
    read(*v, "granularity", "eval", g);
    try {
      eval.granularity = eval::granularity_from_string(g);
    } catch (const Error& err) {
      throw config_error("eval." + err.detail());
    }
  }
  read_path(doc, "protocol", "config", base, protocol);
  read(doc, "max_iterations", "config", max_iterations);
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::string body;
  try {
    body = io::read_file(path);
  } catch (const Error& e) {
    throw config_error(e.detail());
  }
  Json doc;
  try {
    doc = parse_json(body, path.string());
  } catch (const Error& e) {
    throw config_error(e.detail());
  }
  merge_json(doc, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

void RunConfig::merge_env(const std::map<std::string, std::string>& env) {
  for (const auto& [name, value] : env) {
    if (name == "PAOSTRUCT_ENGINE_MODE") {
      if (value != "stub" && value != "remote") throw config_error(name + " must be 'stub' or 'remote'");
      engine.stub = value == "stub";
    } else if (name == "PAOSTRUCT_ENGINE_ENDPOINT") {
      engine.remote.endpoint_url = value;
    } else if (name == "PAOSTRUCT_ENGINE_MODEL") {
      engine.remote.model_id = value;
    } else if (name == "PAOSTRUCT_ENGINE_API_KEY_ENV") {
      engine.remote.api_key_env = value;
    } else if (name == "PAOSTRUCT_LEXICON") {
      engine.lexicon = value;
    } else if (name == "PAOSTRUCT_TEMPLATES") {
      engine.templates = value;
    } else if (name == "PAOSTRUCT_PROTOCOL") {
      protocol = value;
    } else if (name == "PAOSTRUCT_CACHE_PATH") {
      cache.path = value;
    } else if (name == "PAOSTRUCT_CACHE_ENABLED") {
      cache.enabled = parse_bool(name, value);
    } else if (name == "PAOSTRUCT_ONTOLOGY_MODE") {
      ontology.mode = value;
    } else if (name == "PAOSTRUCT_ONTOLOGY_FIXTURE") {
      ontology.fixture = value;
    } else if (name == "PAOSTRUCT_ONTOLOGY_API_KEY_ENV") {
      ontology.remote.api_key_env = value;
    } else if (name == "PAOSTRUCT_MAX_ITERATIONS") {
      max_iterations = static_cast<int>(parse_int(name, value));
    } else if (name == "PAOSTRUCT_EVAL_THRESHOLDS") {
      eval.thresholds = parse_thresholds(name, value);
    } else if (name == "PAOSTRUCT_SERVER_TRANSPORT") {
      server.transport = value;
    } else if (name == "PAOSTRUCT_SERVER_PORT") {
      const long port = parse_int(name, value);
      if (port < 0 || port > 65535) throw config_error(name + " is out of range");
      server.port = static_cast<std::uint16_t>(port);
    }
    // PAOSTRUCT_DATA_DIR and the API key variables are read elsewhere.
  }
}

void RunConfig::validate() const {
  if (engine.stub) {
    if (engine.lexicon.empty()) throw config_error("engine.lexicon is required in stub mode");
    if (!std::filesystem::exists(engine.lexicon)) {
      throw config_error("engine.lexicon " + engine.lexicon.string() + " does not exist");
    }
  } else {
    engine.remote.validate();
  }
  if (engine.templates.empty() || !std::filesystem::is_directory(engine.templates)) {
    throw config_error("engine.templates must name a directory, got '" + engine.templates.string() + "'");
  }
  if (ontology.mode == "fixture") {
    if (ontology.fixture.empty()) throw config_error("ontology.fixture is required in fixture mode");
    if (!std::filesystem::exists(ontology.fixture)) {
      throw config_error("ontology.fixture " + ontology.fixture.string() + " does not exist");
    }
  } else if (ontology.mode != "remote") {
    throw config_error("ontology.mode must be 'fixture' or 'remote', got '" + ontology.mode + "'");
  }
  for (const auto& o : ontology.ontologies) {
    if (std::find(ontology::kSupportedOntologies.begin(), ontology::kSupportedOntologies.end(), o) ==
        ontology::kSupportedOntologies.end()) {
      throw config_error("ontology.ontologies: unsupported ontology '" + o + "'");
    }
  }
  if (ontology.ontologies.empty()) throw config_error("ontology.ontologies must not be empty");
  if (eval.thresholds.empty()) throw config_error("eval.thresholds must not be empty");
  for (double t : eval.thresholds) {
    if (!(t > 0.0 && t <= 100.0)) throw config_error("eval.thresholds entries must be in (0, 100]");
  }
  if (max_iterations < 1) throw config_error("max_iterations must be >= 1");
  if (protocol.empty()) throw config_error("protocol path is required");
  const std::set<std::string> transports = {"inprocess", "stdio", "tcp"};
  if (!transports.count(server.transport)) {
    throw config_error("server.transport must be inprocess, stdio or tcp, got '" + server.transport + "'");
  }
  for (const auto& [name, on] : server.tools) {
    const auto& known = tools::tool_names();
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw config_error("server.tools: unknown tool '" + name + "'");
    }
  }
}

Json RunConfig::to_json() const {
  return {
      {"engine",
       {{"mode", engine.stub ? "stub" : "remote"},
        {"endpoint", engine.remote.endpoint_url},
        {"model", engine.remote.model_id},
        {"api_key_env", engine.remote.api_key_env},
        {"temperature", engine.remote.temperature},
        {"max_output_tokens", engine.remote.max_output_tokens},
        {"timeout_ms", engine.remote.request_timeout.count()},
        {"max_attempts", engine.remote.retry.max_attempts},
        {"repair_rounds", engine.remote.repair_rounds},
        {"requests_per_second", engine.remote.requests_per_second},
        {"burst", engine.remote.burst},
        {"lexicon", engine.lexicon.string()},
        {"templates", engine.templates.string()}}},
      {"server",
       {{"transport", server.transport},
        {"host", server.host},
        {"port", server.port},
        {"command", server.command},
        {"call_timeout_ms", server.call_timeout.count()},
        {"tools", server.tools}}},
      {"cache", {{"path", cache.path.string()}, {"enabled", cache.enabled}}},
      {"ontology",
       {{"mode", ontology.mode},
        {"fixture", ontology.fixture.string()},
        {"base_url", ontology.remote.base_url},
        {"api_key_env", ontology.remote.api_key_env},
        {"timeout_ms", ontology.remote.timeout.count()},
        {"max_attempts", ontology.remote.max_attempts},
        {"hierarchy_depth", ontology.remote.hierarchy_depth},
        {"ontologies", ontology.ontologies},
        {"response_cache", ontology.response_cache.string()}}},
      {"eval", {{"thresholds", eval.thresholds}, {"granularity", std::string(eval::to_string(eval.granularity))}}},
      {"protocol", protocol.string()},
      {"max_iterations", max_iterations},
  };
}

RunConfig resolve(const std::optional<std::filesystem::path>& file) {
  RunConfig c = RunConfig::defaults();
  if (file) c.merge_file(*file);
  c.merge_env(environment_overrides());
  return c;
}

agent::TaskOptions Runtime::task_options() const {
  agent::TaskOptions o;
  o.cache_enabled = config.cache.enabled;
  o.protocol_name = schema->name();
  o.max_iterations = config.max_iterations;
  return o;
}

Runtime build_runtime(const RunConfig& config, std::shared_ptr<agent::Clock> clock, bool for_serving) {
  config.validate();
  Runtime rt;
  rt.config = config;
  try {
    rt.schema = std::make_shared<const ProtocolSchema>(ProtocolSchema::load(config.protocol));
  } catch (const Error& e) {
    throw config_error("protocol: " + e.detail());
  }
  rt.prompts = std::make_shared<const llm::PromptLibrary>(llm::PromptLibrary::load_dir(config.engine.templates));
  if (config.engine.stub) {
    rt.lexicon = std::make_shared<const llm::Lexicon>(llm::Lexicon::load(config.engine.lexicon));
    rt.engine = std::make_shared<llm::StubEngine>(rt.lexicon);
  } else {
    rt.engine = std::make_shared<llm::RemoteEngine>(config.engine.remote);
  }

  std::shared_ptr<ontology::AnnotatorBackend> backend;
  if (config.ontology.mode == "fixture") {
    backend = ontology::FixtureBackend::load(config.ontology.fixture);
  } else {
    backend = std::make_shared<ontology::RemoteBackend>(config.ontology.remote);
  }
  std::optional<std::filesystem::path> annotator_cache;
  if (!config.ontology.response_cache.empty()) annotator_cache = config.ontology.response_cache;
  rt.ontology = std::make_shared<ontology::OntologyClient>(backend, config.ontology.ontologies, annotator_cache);

  rt.cache = config.cache.path.empty() ? std::make_shared<cache::ConceptCache>()
                                       : std::make_shared<cache::ConceptCache>(config.cache.path);

  llm::CompletionOptions completion;
  completion.repair_rounds = config.engine.remote.repair_rounds;
  completion.reasoning = config.engine.remote.reasoning;
  rt.context = tools::ToolContext{rt.engine, rt.prompts, rt.schema, rt.ontology, rt.cache, completion};

  std::set<std::string> enabled;
  for (const auto& name : tools::tool_names()) {
    auto it = config.server.tools.find(name);
    if (it == config.server.tools.end() || it->second) enabled.insert(name);
  }
  rt.server = tools::make_server(rt.context, enabled);
  if (for_serving) return rt;

  if (config.server.transport == "inprocess") {
    rt.client = std::make_shared<mcp::InProcessClient>(rt.server);
  } else if (config.server.transport == "stdio") {
    if (config.server.command.empty()) throw config_error("server.command is required for the stdio transport");
    rt.client = std::make_shared<mcp::SubprocessClient>(config.server.command, config.server.call_timeout);
  } else {
    if (config.server.port == 0) throw config_error("server.port is required for the tcp transport");
    rt.client = std::make_shared<mcp::StreamClient>(mcp::connect_tcp(config.server.host, config.server.port),
                                                    mcp::Framing::kLengthPrefixed, config.server.call_timeout);
  }

  agent::PaoEngine::Options options;
  options.completion = completion;
  options.clock = std::move(clock);
  options.cues = rt.lexicon;
  rt.agent = std::make_shared<agent::PaoEngine>(rt.engine, rt.prompts, rt.client, rt.schema, options);
  return rt;
}

}  // namespace paostruct::config
