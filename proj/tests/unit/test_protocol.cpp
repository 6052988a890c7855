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
#include "paostruct/protocol.hpp"

using namespace paostruct;

namespace {

StructuredReport sample_report() {
  auto r = StructuredReport::empty_for(ProtocolSchema::abcdef());
  r.sections[1].findings.push_back({"Small right pleural effusion.", {"pleural effusion"}, {"Small right pleural effusion."}});
  r.sections[2].findings.push_back({"Cardiomegaly.", {"cardiomegaly"}, {"The heart is enlarged with cardiomegaly."}});
  return r;
}

}  // namespace

TEST_CASE("shipped schema has six ordered categories") {
  const auto s = ProtocolSchema::abcdef();
  CHECK(s.keys() == std::vector<std::string>{"A", "B", "C", "D", "E", "F"});
  CHECK(s.find("D")->title == "Diaphragm");
  CHECK_FALSE(s.has_key("G"));
  const auto loaded = ProtocolSchema::load(testing::kData / "protocols" / "abcdef.json");
  CHECK(loaded.keys() == s.keys());
  CHECK(ProtocolSchema::from_json(s.to_json()) == s);
}

TEST_CASE("schema invariants are enforced") {
  auto make = [](std::vector<ProtocolCategory> cats) { return ProtocolSchema("X", "1", std::move(cats)); };
  CHECK_THROWS_AS(make({}), Error);
  CHECK_THROWS_AS(make({{"A", "One", ""}, {"A", "Two", ""}}), Error);
  CHECK_THROWS_AS(make({{"a", "Lower", ""}}), Error);
  CHECK_THROWS_AS(make({{"AB", "Long", ""}}), Error);
  CHECK_THROWS_AS(make({{"A", "", ""}}), Error);
  try {
    make({{"A", "One", ""}, {"A", "Two", ""}});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfigError);
  }
}

TEST_CASE("empty report validates and renders explicit markers") {
  const auto schema = ProtocolSchema::abcdef();
  const auto r = StructuredReport::empty_for(schema);
  CHECK(validate_structured_report(r, schema).ok());
  const std::string text = render_report_text(r);
  std::size_t markers = 0;
  for (std::size_t p = text.find(kNoFindingsMarker); p != std::string::npos; p = text.find(kNoFindingsMarker, p + 1)) {
    ++markers;
  }
  CHECK(markers == 6);
  CHECK(text.find("A. Airways") < text.find("F. Foreign Bodies and Devices"));
}

TEST_CASE("validation reports missing, reordered and ungrounded sections") {
  const auto schema = ProtocolSchema::abcdef();
  auto r = sample_report();
  CHECK(validate_structured_report(r, schema).ok());

  auto missing = r;
  missing.sections.erase(missing.sections.begin() + 3);
  auto v = validate_structured_report(missing, schema);
  CHECK_FALSE(v.ok());
  CHECK(v.summary().find("D") != std::string::npos);

  auto swapped = r;
  std::swap(swapped.sections[0], swapped.sections[1]);
  CHECK_FALSE(validate_structured_report(swapped, schema).ok());

  auto ungrounded = r;
  ungrounded.sections[1].findings[0].source_sentences.clear();
  CHECK_FALSE(validate_structured_report(ungrounded, schema).ok());

  auto untitled = r;
  untitled.sections[4].title = "";
  CHECK_FALSE(validate_structured_report(untitled, schema).ok());
}

TEST_CASE("grounding checks every cited sentence against the source") {
  const auto r = sample_report();
  const std::string source =
      "PA chest. The heart   is enlarged with cardiomegaly. Small right pleural effusion. No pneumothorax.";
  CHECK(check_grounding(r, source).ok());
  const auto bad = check_grounding(r, "The heart is enlarged with cardiomegaly.");
  REQUIRE_FALSE(bad.ok());
  CHECK(bad.violations.size() == 1);
  CHECK(bad.violations[0].location.find("B") != std::string::npos);
}

TEST_CASE("report document round trips byte for byte") {
  const auto r = sample_report();
  const std::string doc = serialize_report(r);
  CHECK(doc.back() == '\n');
  CHECK(deserialize_report(doc) == r);
  CHECK(serialize_report(deserialize_report(doc)) == doc);
  CHECK(doc.find("\n  ") != std::string::npos);

  auto unicode = r;
  unicode.sections[0].findings.push_back({"Tube \xe2\x80\x94 ok", {}, {"Tube \xe2\x80\x94 ok"}});
  const std::string udoc = serialize_report(unicode);
  CHECK(udoc.find("\xe2\x80\x94") != std::string::npos);
  CHECK(deserialize_report(udoc) == unicode);
}

TEST_CASE("malformed report documents name the failing field") {
  CHECK_THROWS_WITH_AS(deserialize_report("{"), doctest::Contains("PARSE_ERROR"), Error);
  CHECK_THROWS_WITH_AS(report_from_json(Json{{"protocol_name", "ABCDEF"}, {"sections", Json::array({{{"key", 3}}})}}),
                       doctest::Contains("sections[0]"), Error);
}

TEST_CASE("concept JSON conversions") {
  const auto c = MedicalConcept::make("Pleural Effusions", "No pleural effusions.", Polarity::kAbsent);
  CHECK(c.normalized == "pleural effusion");
  CHECK(concept_from_json(to_json(c)) == c);
  const CategorizedConcept cc{c, "B", "lexicon", std::string("RADLEX:RID34539")};
  CHECK(categorized_from_json(to_json(cc)) == cc);
  CHECK(polarity_from_string("uncertain") == Polarity::kUncertain);
  CHECK_THROWS_AS(polarity_from_string("maybe"), Error);
  CHECK_THROWS_AS(concept_from_json(Json{{"text", 5}}), Error);
}
