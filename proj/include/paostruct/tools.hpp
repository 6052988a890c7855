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

// The six pipeline tools. Each has a typed entry point and a JSON handler
// registered on a ToolServer under its wire name.

#ifndef PAOSTRUCT_TOOLS_HPP_
#define PAOSTRUCT_TOOLS_HPP_

#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "paostruct/cache.hpp"
#include "paostruct/llm.hpp"
#include "paostruct/mcp.hpp"
#include "paostruct/ontology.hpp"
#include "paostruct/protocol.hpp"

namespace paostruct::tools {

inline constexpr const char* kGetConcept = "get_concept";
inline constexpr const char* kMapOntology = "map_ontology";
inline constexpr const char* kFilterOntology = "filter_ontology";
inline constexpr const char* kCategorize = "categorize_concepts";
inline constexpr const char* kGenerateReport = "generate_report";
inline constexpr const char* kCheckCache = "check_cache";

// Registration order.
const std::vector<std::string>& tool_names();

struct ToolContext {
  std::shared_ptr<llm::ChatEngine> engine;
  std::shared_ptr<const llm::PromptLibrary> prompts;
  std::shared_ptr<const ProtocolSchema> schema;
  std::shared_ptr<ontology::OntologyClient> ontology;
  std::shared_ptr<cache::ConceptCache> cache;
  llm::CompletionOptions completion;
};

struct ConceptMapping {
  MedicalConcept term;
  std::vector<ontology::AnnotatorHit> hits;
};

struct FilteredMapping {
  MedicalConcept term;
  std::optional<ontology::AnnotatorHit> primary;
  std::vector<ontology::AnnotatorHit> secondary;
  std::string rationale;
};

struct GeneratedReport {
  StructuredReport report;
  std::vector<MedicalConcept> rejected;  // concepts with no source sentence
};

struct CacheLookup {
  std::vector<CategorizedConcept> hits;
  std::vector<MedicalConcept> misses;
};

// Engine failures surface as Error(kEngineUnavailable / kMalformedOutput);
// the JSON handlers turn them into TOOL_ERROR results.
std::vector<MedicalConcept> get_concept(const ToolContext& ctx, const std::string& report_text);
std::vector<ConceptMapping> map_ontology(const ToolContext& ctx, const std::vector<MedicalConcept>& concepts);
std::vector<FilteredMapping> filter_ontology(const ToolContext& ctx, const std::vector<ConceptMapping>& mappings);
// Throws Error(kInvalidCategory) when the engine keeps naming categories
// outside the schema after one correction round.
std::vector<CategorizedConcept> categorize_concepts(const ToolContext& ctx, const std::vector<FilteredMapping>& items,
                                                    bool cache_results = false);
// Throws Error(kInvalidReport) when the engine's report still fails
// validation or grounding after one correction round.
GeneratedReport generate_report(const ToolContext& ctx, const std::vector<CategorizedConcept>& categorized);
CacheLookup check_cache(const ToolContext& ctx, const std::vector<MedicalConcept>& concepts);

Json to_json(const ConceptMapping& m);
Json to_json(const FilteredMapping& f);
ConceptMapping mapping_from_json(const Json& j, const std::string& path);
FilteredMapping filtered_from_json(const Json& j, const std::string& path);

std::vector<mcp::ToolDescriptor> descriptors();

// Registers the tools named in `enabled` (all six when empty) in the
// canonical order.
void register_tools(mcp::ToolServer& server, ToolContext ctx, const std::set<std::string>& enabled = {});
std::shared_ptr<mcp::ToolServer> make_server(ToolContext ctx, const std::set<std::string>& enabled = {});

}  // namespace paostruct::tools

#endif  // PAOSTRUCT_TOOLS_HPP_
