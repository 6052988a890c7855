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


#include <doctest.h>

#include "helpers.hpp"
#include "paostruct/error.hpp"
#include "paostruct/io.hpp"
#include "paostruct/text.hpp"
#include "paostruct/tools.hpp"

using namespace paostruct;
using namespace paostruct::tools;
using llm::Role;

namespace {

struct Fixture {
  config::Runtime rt = testing::stub_runtime();
  std::shared_ptr<testing::ScriptedEngine> engine =
      std::make_shared<testing::ScriptedEngine>(std::make_shared<llm::StubEngine>(testing::lexicon()));
  ToolContext ctx;

  Fixture() {
    ctx = rt.context;
    ctx.engine = engine;
    ctx.cache = std::make_shared<cache::ConceptCache>();
  }
};

const std::string kReport =
    "PA and lateral chest radiograph. The heart is enlarged with cardiomegaly. Small right pleural effusion. "
    "No pneumothorax. The trachea is midline.";

}  // namespace

TEST_CASE("get_concept grounds every concept in a report sentence") {
  Fixture f;
  const auto concepts = get_concept(f.ctx, kReport);
  REQUIRE(concepts.size() >= 3);
  std::set<std::string> seen;
  for (const auto& c : concepts) {
    CAPTURE(c.text);
    CHECK(text::contains_normalized(kReport, c.source_sentence));
    CHECK(c.normalized == text::normalize_concept(c.text));
    CHECK(seen.insert(c.normalized).second);
  }
  const auto pneumo = std::find_if(concepts.begin(), concepts.end(),
                                   [](const MedicalConcept& c) { return c.normalized == "pneumothorax"; });
  REQUIRE(pneumo != concepts.end());
  CHECK(pneumo->polarity == Polarity::kAbsent);

  const std::size_t before = f.engine->conversations.size();
  CHECK(get_concept(f.ctx, "  \n\t ").empty());
  CHECK(f.engine->conversations.size() == before);
}

TEST_CASE("get_concept repairs misquoted sentences and duplicate terms") {
  Fixture f;
  f.engine->on(Role::kExtract, [](const Json&, int) {
    return std::string(R"({"concepts":[
      {"text":"pleural effusion","source_sentence":"Small right pleural effusion."},
      {"text":"cardiomegaly","source_sentence":"something the report never said"},
      {"text":"Pleural  Effusions","source_sentence":"Small right pleural effusion."}]})");
  });
  const auto concepts = get_concept(f.ctx, kReport);
  REQUIRE(concepts.size() == 2);
  CHECK(concepts[0].text == "cardiomegaly");
  CHECK(concepts[0].source_sentence == "The heart is enlarged with cardiomegaly.");
  CHECK(concepts[1].text == "pleural effusion");
}

TEST_CASE("map and filter keep every hit exactly once") {
  Fixture f;
  const auto concepts = get_concept(f.ctx, kReport);
  const auto mapped = map_ontology(f.ctx, concepts);
  REQUIRE(mapped.size() == concepts.size());
  for (const auto& m : mapped) {
    for (const auto& h : m.hits) CHECK(h.valid_for(m.term.normalized));
  }
  auto check_partition = [&](const std::vector<FilteredMapping>& filtered) {
    REQUIRE(filtered.size() == mapped.size());
    for (std::size_t i = 0; i < mapped.size(); ++i) {
      CHECK(filtered[i].term == mapped[i].term);
      CHECK(filtered[i].secondary.size() + (filtered[i].primary ? 1 : 0) == mapped[i].hits.size());
    }
  };
  check_partition(filter_ontology(f.ctx, mapped));

  // An engine naming an unknown primary and duplicating secondaries.
  f.engine->on(Role::kFilter, [](const Json& input, int) {
    Json items = Json::array();
    for (const auto& it : input["items"]) {
      items.push_back({{"index", it["index"]}, {"primary", "BOGUS:1"},
                       {"secondary", {"BOGUS:1", "BOGUS:1"}}, {"rationale", "x"}});
    }
    return dump_compact(Json{{"items", items}});
  });
  const auto odd = filter_ontology(f.ctx, mapped);
  check_partition(odd);
  for (const auto& x : odd) CHECK_FALSE(x.primary.has_value());

  f.ctx.ontology = nullptr;
  CHECK_THROWS_WITH_AS(map_ontology(f.ctx, concepts), doctest::Contains("ANNOTATOR_UNAVAILABLE"), Error);
}

TEST_CASE("categorize corrects an out-of-schema category once") {
  Fixture f;
  const std::vector<FilteredMapping> items = {{MedicalConcept::make("cardiomegaly", "s."), std::nullopt, {}, ""}};

  f.engine->on(Role::kCategorize, [](const Json&, int call) {
    return std::string(call == 0 ? R"({"categorized":[{"index":0,"category":"G"}]})"
                                 : R"({"categorized":[{"index":0,"category":"D","rationale":"heart"}]})");
  });
  const auto ok = categorize_concepts(f.ctx, items, true);
  REQUIRE(ok.size() == 1);
  CHECK(ok[0].category_key == "D");
  const auto& last = f.engine->conversations.back();
  CHECK(last.size() == 3);
  CHECK(last.back().content.find("'G'") != std::string::npos);
  REQUIRE(f.ctx.cache->peek("Cardiomegaly"));
  CHECK(f.ctx.cache->peek("cardiomegaly")->category_key == "D");
}

TEST_CASE("categorize fails after a second invalid category") {
  Fixture f;
  const std::vector<FilteredMapping> items = {{MedicalConcept::make("cardiomegaly", "s."), std::nullopt, {}, ""}};
  f.engine->on(Role::kCategorize,
               [](const Json&, int) { return std::string(R"({"categorized":[{"index":0,"category":"G"}]})"); });
  CHECK_THROWS_WITH_AS(categorize_concepts(f.ctx, items), doctest::Contains("INVALID_CATEGORY"), Error);

  auto server = make_server(f.ctx);
  const auto r = server->call_tool(3, kCategorize, {{"concepts", {{{"text", "cardiomegaly"}}}}});
  CHECK_FALSE(r.ok);
  CHECK(r.error.code == ErrorCode::kToolError);
  CHECK(r.error.reason == "INVALID_CATEGORY");
}

TEST_CASE("generate_report rejects concepts without a source sentence") {
  Fixture f;
  const std::vector<CategorizedConcept> in = {
      {MedicalConcept::make("cardiomegaly", "The heart is enlarged with cardiomegaly."), "D", "", std::nullopt},
      {MedicalConcept::make("pleural effusion", ""), "C", "", std::nullopt}};
  const auto g = generate_report(f.ctx, in);
  REQUIRE(g.rejected.size() == 1);
  CHECK(g.rejected[0].text == "pleural effusion");
  CHECK(validate_structured_report(g.report, *f.ctx.schema).ok());
  std::size_t findings = 0;
  for (const auto& s : g.report.sections) findings += s.findings.size();
  CHECK(findings == 1);

  const auto none = generate_report(f.ctx, {in[1]});
  CHECK(none.rejected.size() == 1);
  for (const auto& s : none.report.sections) CHECK(s.findings.empty());

  CHECK_THROWS_WITH_AS(generate_report(f.ctx, {{MedicalConcept::make("x", "x."), "Q", "", std::nullopt}}),
                       doctest::Contains("INVALID_PARAMS"), Error);
}

TEST_CASE("generate_report refuses findings citing unknown sentences") {
  Fixture f;
  f.engine->on(Role::kGenerate, [](const Json&, int) {
    return std::string(
        R"({"sections":[{"key":"D","findings":[{"text":"Big heart.","source_sentences":["Invented sentence."]}]}]})");
  });
  const std::vector<CategorizedConcept> in = {
      {MedicalConcept::make("cardiomegaly", "The heart is enlarged with cardiomegaly."), "D", "", std::nullopt}};
  CHECK_THROWS_WITH_AS(generate_report(f.ctx, in), doctest::Contains("INVALID_REPORT"), Error);
  CHECK(f.engine->conversations.size() == 2);
}

TEST_CASE("check_cache splits hits from misses") {
  Fixture f;
  f.ctx.cache->put("Pleural effusion", "C", "Pleural effusion", std::string("SNOMEDCT:60046008"));
  f.ctx.cache->put("stale", "Z", "");
  const auto lookup = check_cache(f.ctx, {MedicalConcept::make("pleural effusions"), MedicalConcept::make("stale"),
                                          MedicalConcept::make("cardiomegaly")});
  REQUIRE(lookup.hits.size() == 1);
  CHECK(lookup.hits[0].category_key == "C");
  CHECK(lookup.hits[0].primary_ontology_id == "SNOMEDCT:60046008");
  CHECK(lookup.misses.size() == 2);

  auto server = make_server(f.ctx);
  const auto single = server->call_tool(1, kCheckCache, {{"concept", "PLEURAL EFFUSION"}});
  REQUIRE(single.ok);
  CHECK(single.payload["hit"] == true);
  CHECK(single.payload["entry"]["hits"] == 2);
  const auto batch = server->call_tool(2, kCheckCache, {{"concepts", {{{"text", "cardiomegaly"}}}}});
  REQUIRE(batch.ok);
  CHECK(batch.payload["all_hit"] == false);
  CHECK(server->call_tool(3, kCheckCache, Json::object()).error.code == ErrorCode::kInvalidParams);
}

TEST_CASE("tool registration and parameter errors") {
  Fixture f;
  std::vector<std::string> names;
  for (const auto& d : descriptors()) names.push_back(d.name);
  CHECK(names == tool_names());

  auto subset = make_server(f.ctx, {kMapOntology, kGetConcept});
  const auto listed = subset->list_tools();
  REQUIRE(listed.size() == 2);
  CHECK(listed[0].name == kGetConcept);
  CHECK(listed[1].name == kMapOntology);
  CHECK(subset->call_tool(1, kCategorize, Json::object()).error.code == ErrorCode::kToolNotFound);

  auto server = make_server(f.ctx);
  CHECK(server->call_tool(1, kGetConcept, Json::object()).error.code == ErrorCode::kInvalidParams);
  CHECK(server->call_tool(2, kMapOntology, {{"concepts", {{{"txt", "x"}}}}}).error.code == ErrorCode::kInvalidParams);
  CHECK(server->call_tool(3, kCategorize, Json::object()).error.code == ErrorCode::kInvalidParams);

  f.engine->on(Role::kExtract, [](const Json&, int) { return std::string("never json"); });
  const auto broken = server->call_tool(4, kGetConcept, {{"report_text", "Mild cardiomegaly."}});
  CHECK(broken.error.code == ErrorCode::kToolError);
  CHECK(broken.error.reason == "MALFORMED_OUTPUT");

  const auto fine = server->call_tool(5, kMapOntology, {{"concepts", {{{"text", "trachea"}}}}});
  REQUIRE(fine.ok);
  CHECK_FALSE(fine.payload["mappings"][0]["hits"].empty());
}
