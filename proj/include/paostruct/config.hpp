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

// Run configuration and the wiring that turns it into a working pipeline.
// Precedence: built-in defaults, then a JSON config file, then PAOSTRUCT_*
// environment variables, then command-line flags (applied by the caller).

#ifndef PAOSTRUCT_CONFIG_HPP_
#define PAOSTRUCT_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "paostruct/agent.hpp"
#include "paostruct/cache.hpp"
#include "paostruct/eval.hpp"
#include "paostruct/llm.hpp"
#include "paostruct/mcp.hpp"
#include "paostruct/ontology.hpp"
#include "paostruct/protocol.hpp"
#include "paostruct/tools.hpp"

namespace paostruct::config {

struct EngineSection {
  bool stub = true;
  llm::EngineConfig remote;
  std::filesystem::path lexicon;    // required in stub mode
  std::filesystem::path templates;  // directory with one template per role
};

struct ServerSection {
  std::string transport = "inprocess";  // inprocess | stdio | tcp
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::vector<std::string> command;  // stdio: server process to launch
  std::chrono::milliseconds call_timeout{mcp::kDefaultCallTimeout};
  std::map<std::string, bool> tools;  // per-tool enable flags; absent means enabled
};

struct CacheSection {
  std::filesystem::path path;  // empty keeps the cache in memory
  bool enabled = false;
};

struct OntologySection {
  std::string mode = "fixture";  // fixture | remote
  std::filesystem::path fixture;
  ontology::RemoteConfig remote;
  std::vector<std::string> ontologies = ontology::kSupportedOntologies;
  std::filesystem::path response_cache;  // empty disables the on-disk annotator cache
};

struct EvalSection {
  std::vector<double> thresholds = {80.0, 90.0};
  eval::Granularity granularity = eval::Granularity::kConcept;
};

struct RunConfig {
  EngineSection engine;
  ServerSection server;
  CacheSection cache;
  OntologySection ontology;
  EvalSection eval;
  std::filesystem::path protocol;
  int max_iterations = 12;

  // Stub engine, fixture ontology and the bundled data directory.
  static RunConfig defaults();
  // Overlays the document onto *this; relative paths resolve against base_dir.
  // Unknown keys raise Error(kConfigError).
  void merge_json(const Json& doc, const std::filesystem::path& base_dir);
  void merge_file(const std::filesystem::path& path);
  // Applies PAOSTRUCT_* overrides from env.
  void merge_env(const std::map<std::string, std::string>& env);
  // Throws Error(kConfigError) naming the offending field.
  void validate() const;
  Json to_json() const;
};

// Data directory: PAOSTRUCT_DATA_DIR when set, else the one baked in at
// build time.
std::filesystem::path default_data_dir();

// PAOSTRUCT_* variables from the process environment.
std::map<std::string, std::string> environment_overrides();

// defaults() + optional file + process environment.
RunConfig resolve(const std::optional<std::filesystem::path>& file);

// Everything a task needs, built from a validated RunConfig.
struct Runtime {
  RunConfig config;
  std::shared_ptr<const ProtocolSchema> schema;
  std::shared_ptr<const llm::Lexicon> lexicon;  // null for the remote engine
  std::shared_ptr<llm::ChatEngine> engine;
  std::shared_ptr<const llm::PromptLibrary> prompts;
  std::shared_ptr<ontology::OntologyClient> ontology;
  std::shared_ptr<cache::ConceptCache> cache;
  tools::ToolContext context;
  std::shared_ptr<mcp::ToolServer> server;
  std::shared_ptr<mcp::ToolClient> client;
  std::shared_ptr<agent::PaoEngine> agent;

  agent::TaskOptions task_options() const;
};

// With for_serving the tool client is skipped (the server is the product).
Runtime build_runtime(const RunConfig& config, std::shared_ptr<agent::Clock> clock = nullptr,
                      bool for_serving = false);

}  // namespace paostruct::config

#endif  // PAOSTRUCT_CONFIG_HPP_
