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

#include "paostruct/tools.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "paostruct/error.hpp"
#include "paostruct/text.hpp"

namespace paostruct::tools {

namespace {

using llm::Role;

void require_engine(const ToolContext& ctx) {
  if (!ctx.engine || !ctx.prompts) throw Error(ErrorCode::kConfigError, "tool context lacks an engine");
  if (!ctx.schema) throw Error(ErrorCode::kConfigError, "tool context lacks a protocol schema");
}

std::string join_keys(const ProtocolSchema& schema) {
  std::string out;
  for (const auto& k : schema.keys()) out += (out.empty() ? "" : ", ") + k;
  return out;
}

// One extra engine turn after a semantic problem the schema cannot catch.
llm::StructuredCompletion correct(const ToolContext& ctx, const llm::StructuredCompletion& previous, Role role,
                                  const std::string& problem) {
  auto conversation = previous.conversation;
  conversation.push_back({"user", "Your answer was well-formed but not usable: " + problem +
                                      ". Reply again with the complete corrected JSON value."});
  llm::CompletionOptions opts = ctx.completion;
  opts.repair_rounds = 0;
  auto c = llm::complete_conversation(*ctx.engine, std::move(conversation), llm::output_schema(role), opts);
  c.value();
  return c;
}

Json concept_list_json(const std::vector<MedicalConcept>& concepts) {
  Json out = Json::array();
  for (const auto& c : concepts) out.push_back(paostruct::to_json(c));
  return out;
}

std::vector<MedicalConcept> concepts_from(const Json& arr, const std::string& path) {
  std::vector<MedicalConcept> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    out.push_back(concept_from_json(arr[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

// Parameter errors found after schema validation are the caller's fault.
template <typename F>
auto as_invalid_params(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError) throw Error(ErrorCode::kInvalidParams, e.detail());
    throw;
  }
}

const Json kConceptSchema = {
    {"type", {"object", "string"}},
    {"required", {"text"}},
    {"properties",
     {{"text", {{"type", "string"}, {"minLength", 1}}},
      {"normalized", {{"type", "string"}}},
      {"source_sentence", {{"type", {"string", "null"}}}},
      {"polarity", {{"enum", {"present", "absent", "uncertain"}}}}}}};

const Json kHitSchema = {{"type", "object"},
                         {"required", {"ontology", "class_id", "match"}},
                         {"properties",
                          {{"ontology", {{"type", "string"}}},
                           {"class_id", {{"type", "string"}}},
                           {"preferred_label", {{"type", "string"}}},
                           {"match", {{"type", "array"}, {"items", {{"type", "integer"}}}}},
                           {"ancestors", {{"type", "array"}}}}}};

const Json kCategorizedSchema = {{"type", "object"},
                                 {"required", {"concept", "category"}},
                                 {"properties",
                                  {{"concept", kConceptSchema},
                                   {"category", {{"type", "string"}, {"minLength", 1}}},
                                   {"rationale", {{"type", "string"}}},
                                   {"primary_ontology_id", {{"type", {"string", "null"}}}}}}};

Json array_of(const Json& item) { return {{"type", "array"}, {"items", item}}; }

}  // namespace

const std::vector<std::string>& tool_names() {
  static const std::vector<std::string> names = {kGetConcept, kMapOntology,     kFilterOntology,
                                                 kCategorize, kGenerateReport, kCheckCache};
  return names;
}

// ---------------------------------------------------------------------------
// JSON forms

Json to_json(const ConceptMapping& m) {
  Json hits = Json::array();
  for (const auto& h : m.hits) hits.push_back(h.to_json());
  return {{"concept", paostruct::to_json(m.term)}, {"hits", std::move(hits)}};
}

Json to_json(const FilteredMapping& f) {
  Json secondary = Json::array();
  for (const auto& h : f.secondary) secondary.push_back(h.to_json());
  return {{"concept", paostruct::to_json(f.term)},
          {"primary", f.primary ? f.primary->to_json() : Json()},
          {"secondary", std::move(secondary)},
          {"rationale", f.rationale}};
}

ConceptMapping mapping_from_json(const Json& j, const std::string& path) {
  ConceptMapping m;
  m.term = concept_from_json(require_field(j, "concept", path), path + ".concept");
  if (auto h = j.find("hits"); h != j.end()) {
    for (std::size_t i = 0; i < h->size(); ++i) {
      m.hits.push_back(ontology::AnnotatorHit::from_json((*h)[i], path + ".hits[" + std::to_string(i) + "]"));
    }
  }
  return m;
}

FilteredMapping filtered_from_json(const Json& j, const std::string& path) {
  FilteredMapping f;
  f.term = concept_from_json(require_field(j, "concept", path), path + ".concept");
  if (auto p = j.find("primary"); p != j.end() && !p->is_null()) {
    f.primary = ontology::AnnotatorHit::from_json(*p, path + ".primary");
  }
  if (auto s = j.find("secondary"); s != j.end()) {
    for (std::size_t i = 0; i < s->size(); ++i) {
      f.secondary.push_back(
          ontology::AnnotatorHit::from_json((*s)[i], path + ".secondary[" + std::to_string(i) + "]"));
    }
  }
  f.rationale = j.value("rationale", "");
  return f;
}

// ---------------------------------------------------------------------------
// Tools

std::vector<MedicalConcept> get_concept(const ToolContext& ctx, const std::string& report_text) {
  const std::string collapsed = text::collapse_whitespace(report_text);
  if (collapsed.empty()) return {};
  require_engine(ctx);
  const auto answer = llm::ask(*ctx.engine, *ctx.prompts, Role::kExtract, {{"report_text", report_text}},
                               ctx.completion);
  const auto sentences = text::split_sentences(report_text);

  struct Positioned {
    std::size_t sentence_pos, term_pos;
    MedicalConcept c;
  };
  std::vector<Positioned> found;
  for (const auto& item : answer.value()["concepts"]) {
    const std::string term = text::collapse_whitespace(item["text"].get<std::string>());
    if (term.empty()) continue;
    std::string source = text::collapse_whitespace(item["source_sentence"].get<std::string>());
    if (source.empty() || !text::contains_normalized(report_text, source)) {
      // Ground a misquoted sentence to the first report sentence naming the term.
      source.clear();
      const std::string lt = text::to_lower(term);
      for (const auto& s : sentences) {
        if (text::to_lower(s).find(lt) != std::string::npos) {
          source = s;
          break;
        }
      }
    }
    const Polarity pol = polarity_from_string(item.value("polarity", "present"));
    const std::size_t spos = source.empty() ? std::string::npos : collapsed.find(source);
    const std::size_t tpos = text::to_lower(source).find(text::to_lower(term));
    found.push_back({spos, tpos, MedicalConcept::make(term, source, pol)});
  }
  std::stable_sort(found.begin(), found.end(), [](const Positioned& a, const Positioned& b) {
    return std::tie(a.sentence_pos, a.term_pos) < std::tie(b.sentence_pos, b.term_pos);
  });
  std::vector<MedicalConcept> out;
  std::set<std::string> seen;
  for (auto& f : found) {
    if (f.c.normalized.empty() || !seen.insert(f.c.normalized).second) continue;
    out.push_back(std::move(f.c));
  }
  return out;
}

std::vector<ConceptMapping> map_ontology(const ToolContext& ctx, const std::vector<MedicalConcept>& concepts) {
  if (!ctx.ontology) throw Error(ErrorCode::kAnnotatorUnavailable, "no ontology backend configured");
  std::vector<ConceptMapping> out;
  for (const auto& c : concepts) out.push_back({c, ctx.ontology->annotate(c.normalized)});
  return out;
}

std::vector<FilteredMapping> filter_ontology(const ToolContext& ctx, const std::vector<ConceptMapping>& mappings) {
  std::vector<FilteredMapping> out;
  Json items = Json::array();
  for (std::size_t i = 0; i < mappings.size(); ++i) {
    out.push_back({mappings[i].term, std::nullopt, {}, "no mappings"});
    if (mappings[i].hits.empty()) continue;
    Json hits = Json::array();
    for (const auto& h : mappings[i].hits) hits.push_back(h.to_json());
    items.push_back({{"index", i},
                     {"concept", mappings[i].term.text},
                     {"normalized", mappings[i].term.normalized},
                     {"hits", std::move(hits)}});
  }
  if (items.empty()) return out;
  require_engine(ctx);
  const auto answer =
      llm::ask(*ctx.engine, *ctx.prompts, Role::kFilter, {{"items", items}}, ctx.completion);

  const Json& decided = answer.value()["items"];
  for (std::size_t k = 0; k < decided.size() && k < items.size(); ++k) {
    const Json& d = decided[k];
    const std::size_t i = d.contains("index") ? d["index"].get<std::size_t>() : items[k]["index"].get<std::size_t>();
    if (i >= mappings.size() || mappings[i].hits.empty()) continue;
    const auto& hits = mappings[i].hits;
    FilteredMapping& f = out[i];
    const std::string primary_id = d["primary"].is_string() ? d["primary"].get<std::string>() : "";
    // The partition is rebuilt from the input so every hit lands exactly
    // once whatever the engine listed as secondary.
    f.primary.reset();
    f.secondary.clear();
    for (const auto& h : hits) {
      if (!f.primary && h.class_id == primary_id) {
        f.primary = h;
      } else {
        f.secondary.push_back(h);
      }
    }
    f.rationale = d.value("rationale", "");
  }
  for (std::size_t i = 0; i < mappings.size(); ++i) {
    if (!mappings[i].hits.empty() && !out[i].primary && out[i].secondary.empty()) {
      out[i].secondary = mappings[i].hits;  // engine skipped this item
      out[i].rationale = "no decision";
    }
  }
  return out;
}

std::vector<CategorizedConcept> categorize_concepts(const ToolContext& ctx, const std::vector<FilteredMapping>& items,
                                                    bool cache_results) {
  if (items.empty()) return {};
  require_engine(ctx);
  const ProtocolSchema& schema = *ctx.schema;
  Json list = Json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    Json secondary = Json::array();
    for (const auto& h : items[i].secondary) secondary.push_back(h.preferred_label);
    list.push_back({{"index", i},
                    {"text", items[i].term.text},
                    {"normalized", items[i].term.normalized},
                    {"polarity", std::string(to_string(items[i].term.polarity))},
                    {"primary_label", items[i].primary ? items[i].primary->preferred_label : ""},
                    {"secondary_labels", std::move(secondary)}});
  }
  const Json input = {{"protocol", schema.to_json()}, {"items", list}};
  auto answer = llm::ask(*ctx.engine, *ctx.prompts, Role::kCategorize, input, ctx.completion);

  auto problems_in = [&](const Json& value, std::map<std::size_t, const Json*>& by_index) {
    by_index.clear();
    std::string problems;
    for (const auto& c : value["categorized"]) {
      const auto idx = c["index"].get<std::int64_t>();
      if (idx < 0 || static_cast<std::size_t>(idx) >= items.size()) continue;
      const std::string key = c["category"].get<std::string>();
      if (!schema.has_key(key)) {
        problems += (problems.empty() ? "" : "; ") + std::string("item ") + std::to_string(idx) + " has category '" +
                    key + "' which is not one of " + join_keys(schema);
        continue;
      }
      by_index.emplace(static_cast<std::size_t>(idx), &c);
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (!by_index.count(i) && problems.find("item " + std::to_string(i) + " ") == std::string::npos) {
        problems += (problems.empty() ? "" : "; ") + std::string("item ") + std::to_string(i) + " has no category";
      }
    }
    return problems;
  };

  std::map<std::size_t, const Json*> by_index;
  std::string problems = problems_in(answer.value(), by_index);
  if (!problems.empty()) {
    answer = correct(ctx, answer, Role::kCategorize, problems);
    problems = problems_in(answer.value(), by_index);
    if (!problems.empty()) throw Error(ErrorCode::kInvalidCategory, problems);
  }

  std::vector<CategorizedConcept> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Json& c = *by_index.at(i);
    CategorizedConcept cc{items[i].term, c["category"].get<std::string>(), c.value("rationale", ""), std::nullopt};
    if (items[i].primary) cc.primary_ontology_id = items[i].primary->class_id;
    if (cache_results && ctx.cache) {
      ctx.cache->put(cc.term.text, cc.category_key, items[i].primary ? items[i].primary->preferred_label : "",
                     cc.primary_ontology_id);
    }
    out.push_back(std::move(cc));
  }
  return out;
}

GeneratedReport generate_report(const ToolContext& ctx, const std::vector<CategorizedConcept>& categorized) {
  if (!ctx.schema) throw Error(ErrorCode::kConfigError, "tool context lacks a protocol schema");
  const ProtocolSchema& schema = *ctx.schema;
  GeneratedReport result{StructuredReport::empty_for(schema), {}};

  Json concepts = Json::array();
  std::set<std::string> sources;
  for (std::size_t i = 0; i < categorized.size(); ++i) {
    const auto& c = categorized[i];
    if (!schema.has_key(c.category_key)) {
      throw Error(ErrorCode::kInvalidParams, "concept '" + c.term.text + "' has unknown category " + c.category_key);
    }
    if (text::collapse_whitespace(c.term.source_sentence).empty()) {
      result.rejected.push_back(c.term);
      continue;
    }
    sources.insert(text::collapse_whitespace(c.term.source_sentence));
    concepts.push_back({{"index", i},
                        {"text", c.term.text},
                        {"category", c.category_key},
                        {"polarity", std::string(to_string(c.term.polarity))},
                        {"source_sentence", text::collapse_whitespace(c.term.source_sentence)}});
  }
  if (concepts.empty()) return result;
  require_engine(ctx);

  auto assemble = [&](const Json& value, StructuredReport& report) {
    report = StructuredReport::empty_for(schema);
    std::vector<std::string> problems;
    for (const auto& s : value["sections"]) {
      const std::string key = s["key"].get<std::string>();
      auto it = std::find_if(report.sections.begin(), report.sections.end(),
                             [&](const ReportSection& r) { return r.key == key; });
      if (it == report.sections.end()) {
        problems.push_back("unknown section " + key);
        continue;
      }
      for (const auto& f : s["findings"]) {
        Finding finding;
        finding.text = f["text"].get<std::string>();
        for (const auto& c : f.value("concepts", Json::array())) finding.concept_refs.push_back(c.get<std::string>());
        for (const auto& src : f["source_sentences"]) {
          const std::string sentence = text::collapse_whitespace(src.get<std::string>());
          if (!sources.count(sentence)) {
            problems.push_back("section " + key + " cites a sentence not in the input: \"" + sentence + "\"");
          }
          finding.source_sentences.push_back(sentence);
        }
        it->findings.push_back(std::move(finding));
      }
    }
    for (const auto& v : validate_structured_report(report, schema).violations) {
      problems.push_back(v.location + ": " + v.rule);
    }
    std::string joined;
    for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
    return joined;
  };

  const Json input = {{"protocol", schema.to_json()}, {"concepts", concepts}};
  auto answer = llm::ask(*ctx.engine, *ctx.prompts, Role::kGenerate, input, ctx.completion);
  std::string problems = assemble(answer.value(), result.report);
  if (!problems.empty()) {
    answer = correct(ctx, answer, Role::kGenerate, problems);
    problems = assemble(answer.value(), result.report);
    if (!problems.empty()) throw Error(ErrorCode::kInvalidReport, problems);
  }
  return result;
}

CacheLookup check_cache(const ToolContext& ctx, const std::vector<MedicalConcept>& concepts) {
  CacheLookup out;
  for (const auto& c : concepts) {
    std::optional<cache::CacheEntry> e;
    if (ctx.cache) e = ctx.cache->check(c.text);
    if (e && (!ctx.schema || ctx.schema->has_key(e->category_key))) {
      out.hits.push_back({c, e->category_key, "cached categorization", e->primary_ontology_id});
    } else {
      out.misses.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Registration

std::vector<mcp::ToolDescriptor> descriptors() {
  const Json concepts = array_of(kConceptSchema);
  std::vector<mcp::ToolDescriptor> d;
  d.push_back({kGetConcept,
               "Extract clinically relevant concepts from a free-text report, each with its source sentence "
               "and polarity.",
               {{"type", "object"},
                {"required", {"report_text"}},
                {"properties", {{"report_text", {{"type", "string"}}}}}},
               {{"type", "object"}, {"required", {"concepts"}}, {"properties", {{"concepts", concepts}}}},
               true});
  d.push_back({kMapOntology,
               "Look up ontology classes (SNOMEDCT, RADLEX) with ancestor chains for each concept.",
               {{"type", "object"}, {"required", {"concepts"}}, {"properties", {{"concepts", concepts}}}},
               {{"type", "object"},
                {"required", {"mappings"}},
                {"properties",
                 {{"mappings",
                   array_of({{"type", "object"},
                             {"required", {"concept", "hits"}},
                             {"properties", {{"concept", kConceptSchema}, {"hits", array_of(kHitSchema)}}}})}}}},
               true});
  d.push_back({kFilterOntology,
               "Split each concept's ontology hits into one primary mapping (the principal finding) and "
               "secondary mappings (qualifiers such as laterality or size).",
               {{"type", "object"},
                {"required", {"mappings"}},
                {"properties",
                 {{"mappings", array_of({{"type", "object"},
                                         {"required", {"concept"}},
                                         {"properties", {{"concept", kConceptSchema}, {"hits", array_of(kHitSchema)}}}})}}}},
               {{"type", "object"}, {"required", {"filtered"}}, {"properties", {{"filtered", {{"type", "array"}}}}}},
               true});
  d.push_back({kCategorize,
               "Assign each concept to exactly one protocol category, using its ontology context when given. "
               "Pass filter_ontology output as items, or bare concepts.",
               {{"type", "object"},
                {"properties",
                 {{"items", array_of({{"type", "object"}, {"required", {"concept"}}, {"properties", {{"concept", kConceptSchema}}}})},
                  {"concepts", concepts},
                  {"cache_results", {{"type", "boolean"}}}}}},
               {{"type", "object"},
                {"required", {"categorized"}},
                {"properties", {{"categorized", array_of(kCategorizedSchema)}}}},
               true});
  d.push_back({kGenerateReport,
               "Render categorized concepts as a protocol-structured report whose findings cite their source "
               "sentences; concepts without a source sentence are returned as rejected.",
               {{"type", "object"},
                {"required", {"categorized"}},
                {"properties", {{"categorized", array_of(kCategorizedSchema)}}}},
               {{"type", "object"},
                {"required", {"report", "rejected"}},
                {"properties", {{"report", {{"type", "object"}}}, {"rejected", concepts}}}},
               true});
  d.push_back({kCheckCache,
               "Look up cached categorizations. With 'concept' returns {hit, entry?}; with 'concepts' returns "
               "{hits, misses, all_hit} where hits are categorized concepts.",
               {{"type", "object"},
                {"properties", {{"concept", {{"type", "string"}}}, {"concepts", concepts}}}},
               {{"type", "object"}},
               false});
  return d;
}

void register_tools(mcp::ToolServer& server, ToolContext ctx, const std::set<std::string>& enabled) {
  auto shared = std::make_shared<const ToolContext>(std::move(ctx));
  std::map<std::string, mcp::ToolHandler> handlers;

  handlers[kGetConcept] = [shared](const Json& a) {
    return Json{{"concepts", concept_list_json(get_concept(*shared, a["report_text"].get<std::string>()))}};
  };
  handlers[kMapOntology] = [shared](const Json& a) {
    const auto concepts = as_invalid_params([&] { return concepts_from(a["concepts"], "concepts"); });
    Json out = Json::array();
    for (const auto& m : map_ontology(*shared, concepts)) out.push_back(to_json(m));
    return Json{{"mappings", std::move(out)}};
  };
  handlers[kFilterOntology] = [shared](const Json& a) {
    const auto mappings = as_invalid_params([&] {
      std::vector<ConceptMapping> v;
      for (std::size_t i = 0; i < a["mappings"].size(); ++i) {
        v.push_back(mapping_from_json(a["mappings"][i], "mappings[" + std::to_string(i) + "]"));
      }
      return v;
    });
    Json out = Json::array();
    for (const auto& f : filter_ontology(*shared, mappings)) out.push_back(to_json(f));
    return Json{{"filtered", std::move(out)}};
  };
  handlers[kCategorize] = [shared](const Json& a) {
    const auto items = as_invalid_params([&] {
      std::vector<FilteredMapping> v;
      if (a.contains("items")) {
        for (std::size_t i = 0; i < a["items"].size(); ++i) {
          v.push_back(filtered_from_json(a["items"][i], "items[" + std::to_string(i) + "]"));
        }
      } else if (a.contains("concepts")) {
        for (auto& c : concepts_from(a["concepts"], "concepts")) v.push_back({std::move(c), std::nullopt, {}, ""});
      } else {
        throw Error(ErrorCode::kInvalidParams, "one of 'items' or 'concepts' is required");
      }
      return v;
    });
    Json out = Json::array();
    for (const auto& c : categorize_concepts(*shared, items, a.value("cache_results", false))) {
      out.push_back(paostruct::to_json(c));
    }
    return Json{{"categorized", std::move(out)}};
  };
  handlers[kGenerateReport] = [shared](const Json& a) {
    const auto categorized = as_invalid_params([&] {
      std::vector<CategorizedConcept> v;
      for (std::size_t i = 0; i < a["categorized"].size(); ++i) {
        v.push_back(categorized_from_json(a["categorized"][i], "categorized[" + std::to_string(i) + "]"));
      }
      return v;
    });
    const auto generated = generate_report(*shared, categorized);
    return Json{{"report", paostruct::to_json(generated.report)}, {"rejected", concept_list_json(generated.rejected)}};
  };
  handlers[kCheckCache] = [shared](const Json& a) {
    if (a.contains("concept")) {
      std::optional<cache::CacheEntry> e;
      if (shared->cache) e = shared->cache->check(a["concept"].get<std::string>());
      if (!e) return Json{{"hit", false}};
      return Json{{"hit", true}, {"entry", e->to_json()}};
    }
    if (!a.contains("concepts")) throw Error(ErrorCode::kInvalidParams, "one of 'concept' or 'concepts' is required");
    const auto concepts = as_invalid_params([&] { return concepts_from(a["concepts"], "concepts"); });
    const auto lookup = check_cache(*shared, concepts);
    Json hits = Json::array();
    for (const auto& h : lookup.hits) hits.push_back(paostruct::to_json(h));
    return Json{{"hits", std::move(hits)},
                {"misses", concept_list_json(lookup.misses)},
                {"all_hit", lookup.misses.empty()}};
  };

  for (auto& d : descriptors()) {
    if (!enabled.empty() && !enabled.count(d.name)) continue;
    const std::string name = d.name;
    server.register_tool(std::move(d), handlers.at(name));
  }
}

std::shared_ptr<mcp::ToolServer> make_server(ToolContext ctx, const std::set<std::string>& enabled) {
  auto server = std::make_shared<mcp::ToolServer>();
  register_tools(*server, std::move(ctx), enabled);
  return server;
}

}  // namespace paostruct::tools
