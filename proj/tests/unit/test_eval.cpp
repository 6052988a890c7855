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

#include <numeric>
#include <random>
#include <set>

#include "helpers.hpp"
#include "paostruct/eval.hpp"
#include "paostruct/io.hpp"
#include "paostruct/tools.hpp"

using namespace paostruct;
using namespace paostruct::eval;

namespace {

const Json& expected() {
  static const Json j = parse_json(io::read_file(testing::kFixtures / "eval" / "expected.json"), "expected.json");
  return j;
}

void check_averaged(const Averaged& got, const Json& want) {
  CHECK(got.macro == doctest::Approx(want["macro"].get<double>()).epsilon(1e-12));
  CHECK(got.weighted == doctest::Approx(want["weighted"].get<double>()).epsilon(1e-12));
}

void check_counts(const std::vector<LabelCounts>& got, const Json& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CAPTURE(want[i]["label"]);
    CHECK(got[i].label == want[i]["label"].get<std::string>());
    CHECK(got[i].tp == want[i]["tp"].get<std::int64_t>());
    CHECK(got[i].fp == want[i]["fp"].get<std::int64_t>());
    CHECK(got[i].fn == want[i]["fn"].get<std::int64_t>());
  }
}

void check_extraction(const MetricsReport& m, const Json& want) {
  check_counts(m.per_label, want["per_label"]);
  check_averaged(m.precision, want["precision"]);
  check_averaged(m.recall, want["recall"]);
  check_averaged(m.f1, want["f1"]);
  CHECK(m.subset_accuracy == doctest::Approx(want["subset_accuracy"].get<double>()).epsilon(1e-12));
  CHECK(m.hamming_loss == doctest::Approx(want["hamming_loss"].get<double>()).epsilon(1e-12));
}

void check_categorization(const CategorizationReport& c, const Json& want) {
  CHECK(Json(c.confusion) == want["confusion"]);
  check_counts(c.per_class, want["per_class"]);
  check_averaged(c.precision, want["precision"]);
  check_averaged(c.recall, want["recall"]);
  check_averaged(c.f1, want["f1"]);
  check_averaged(c.jaccard, want["jaccard"]);
}

}  // namespace

TEST_CASE("fuzzy similarity pinned values") {
  const Json& d = expected()["derived"];
  CHECK(fuzzy_similarity("opacity", "opacities") == d["sim_opacity_opacities"].get<double>());
  CHECK(fuzzy_similarity("no effusion", "absence of effusion") == d["sim_no_effusion"].get<double>());
  CHECK(fuzzy_similarity("Pleural Effusion", "pleural  effusion") == 100.0);
  CHECK(fuzzy_similarity("", "effusion") == 0.0);
  CHECK(fuzzy_similarity("", "") == 100.0);
  const auto a = align_concepts({"no effusion"}, {"absence of effusion"}, 80.0);
  CHECK(a.matched.empty());
  CHECK(a.unmatched_pred.size() == 1);
  CHECK(a.unmatched_gold.size() == 1);
}

TEST_CASE("alignment is one-to-one and prefers the closer prediction") {
  const auto a = align_concepts({"effusions", "effusion"}, {"effusion"}, 80.0);
  REQUIRE(a.matched.size() == 1);
  CHECK(a.matched[0].pred_index == 1);
  CHECK(a.unmatched_pred == std::vector<std::size_t>{0});

  const auto same = align_concepts({"a", "b", "c"}, {"c", "a", "b"}, 100.0);
  CHECK(same.matched.size() == 3);
  CHECK(same.unmatched_gold.empty());

  CHECK_THROWS_AS(align_concepts({}, {}, 0.0), Error);
  CHECK_THROWS_AS(align_concepts({}, {}, 100.5), Error);
}

TEST_CASE("alignment respects the threshold on random inputs") {
  std::mt19937 rng(11);
  const std::string alphabet = "ab c";
  auto rs = [&] {
    std::string s;
    for (int n = std::uniform_int_distribution<int>(0, 6)(rng); n > 0; --n) s += alphabet[rng() % alphabet.size()];
    return s;
  };
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> p(rng() % 6), g(rng() % 6);
    for (auto& s : p) s = rs();
    for (auto& s : g) s = rs();
    const double t = 40.0 + static_cast<double>(rng() % 61);
    const auto a = align_concepts(p, g, t);
    std::set<std::size_t> ps, gs;
    for (const auto& m : a.matched) {
      CHECK(m.similarity >= t);
      CHECK(ps.insert(m.pred_index).second);
      CHECK(gs.insert(m.gold_index).second);
    }
    CHECK(ps.size() + a.unmatched_pred.size() == p.size());
    CHECK(gs.size() + a.unmatched_gold.size() == g.size());
  }
}

TEST_CASE("extraction metrics: two-report example matches the counting oracle") {
  const std::vector<ReportConcepts> corpus = {{{"a", "b"}, {"a"}}, {{"c"}, {"c", "b"}}};
  check_extraction(extraction_metrics(corpus, 80.0), expected()["derived"]["two_report_example"]);
}

TEST_CASE("extraction metrics: degenerate policies") {
  const std::vector<ReportConcepts> perfect = {{{"x", "y"}, {"y", "x"}}, {{"z"}, {"z"}}, {{"x"}, {"x"}}};
  const auto p = extraction_metrics(perfect, 90.0);
  CHECK(p.precision.macro == 1.0);
  CHECK(p.recall.weighted == 1.0);
  CHECK(p.f1.macro == 1.0);
  CHECK(p.subset_accuracy == 1.0);
  CHECK(p.hamming_loss == 0.0);

  const std::vector<ReportConcepts> silent = {{{"x", "y"}, {}}, {{"z"}, {}}};
  const auto s = extraction_metrics(silent, 80.0);
  CHECK(s.precision.macro == 0.0);
  CHECK(s.recall.macro == 0.0);
  CHECK(s.subset_accuracy == 0.0);
  CHECK(s.hamming_loss == doctest::Approx(3.0 / (3.0 * 2.0)));

  CHECK_THROWS_WITH_AS(extraction_metrics(std::vector<ReportConcepts>{}, 80.0), doctest::Contains("EMPTY_CORPUS"),
                       Error);
}

TEST_CASE("extraction metrics: false positives go to the closest label, ties to the first") {
  // "ab" is equally close (50) to "aa" and "bb"; it is charged to "aa".
  const std::vector<ReportConcepts> corpus = {{{"aa", "bb"}, {"aa", "bb", "ab"}}};
  const auto m = extraction_metrics(corpus, 100.0);
  REQUIRE(m.per_label.size() == 2);
  CHECK(m.per_label[0].label == "aa");
  CHECK(m.per_label[0].fp == 1);
  CHECK(m.per_label[1].fp == 0);

  const auto oov = extraction_metrics(std::vector<ReportConcepts>{{{"aa"}, {"aa", "zz"}}}, 100.0);
  REQUIRE(oov.per_label.size() == 2);
  CHECK(oov.per_label[1].label == kOutOfVocab);
  CHECK(oov.per_label[1].fp == 1);
  CHECK(oov.precision.macro == 1.0);  // out-of-vocabulary has no support
  CHECK(oov.hamming_loss == 1.0);
}

TEST_CASE("extraction metrics: hamming loss is zero exactly when every report is exact") {
  std::mt19937 rng(5);
  const std::vector<std::string> vocab = {"a", "b", "c", "dd"};
  for (int i = 0; i < 200; ++i) {
    std::vector<ReportConcepts> corpus(1 + rng() % 4);
    for (auto& r : corpus) {
      for (int k = rng() % 3; k >= 0; --k) r.gold.push_back(vocab[rng() % vocab.size()]);
      for (int k = rng() % 3; k > 0; --k) r.pred.push_back(vocab[rng() % vocab.size()]);
    }
    const auto m = extraction_metrics(corpus, 100.0);
    CHECK((m.hamming_loss == 0.0) == (m.subset_accuracy == 1.0));
    for (const auto& c : m.per_label) {
      const double p = c.precision(), r = c.recall();
      CHECK(c.f1() == doctest::Approx(p + r == 0 ? 0 : 2 * p * r / (p + r)));
    }
    for (double v : {m.precision.macro, m.precision.weighted, m.recall.macro, m.recall.weighted, m.f1.macro,
                     m.f1.weighted}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("categorization metrics: pinned example and conservation") {
  const auto schema = ProtocolSchema::abcdef();
  const auto c = categorization_metrics({{"B", "B"}, {"C", "B"}, {"F", "F"}}, schema);
  check_categorization(c, expected()["derived"]["categorization_example"]);
  CHECK(c.confusion[1][2] == 1);

  const auto single = categorization_metrics({{"D", "D"}, {"A", "D"}}, schema);
  CHECK(single.precision.macro == single.per_class[3].precision());
  CHECK(single.recall.macro == single.per_class[3].recall());

  std::int64_t total = 0;
  for (const auto& row : c.confusion) total += std::accumulate(row.begin(), row.end(), std::int64_t{0});
  CHECK(total == 3);

  CHECK_THROWS_WITH_AS(categorization_metrics({}, schema), doctest::Contains("EMPTY_INPUT"), Error);
  CHECK_THROWS_WITH_AS(categorization_metrics({{"G", "B"}}, schema), doctest::Contains("INVALID_CATEGORY"), Error);
}

TEST_CASE("McNemar pinned values and laws") {
  const Json& d = expected()["derived"];
  CHECK(mcnemar_p_value(1, 9) == doctest::Approx(d["mcnemar_1_9"].get<double>()).epsilon(1e-12));
  CHECK(mcnemar_p_value(40, 60) == doctest::Approx(d["mcnemar_40_60"].get<double>()).epsilon(1e-9));
  CHECK(mcnemar_p_value(0, 0) == 1.0);
  CHECK(mcnemar_p_value(5, 5) == 1.0);
  CHECK(mcnemar_test({true, true, false}, {true, true, false}) == 1.0);
  CHECK_THROWS_AS(mcnemar_test({true}, {true, false}), Error);
  CHECK_THROWS_AS(mcnemar_p_value(-1, 2), Error);
  const std::vector<bool> a = {true, false, true, false, true, true}, b = {false, false, true, true, false, false};
  CHECK(mcnemar_test(a, b) == mcnemar_test(b, a));
}

TEST_CASE("fixture evaluation matches the frozen oracle output") {
  const auto schema = ProtocolSchema::abcdef();
  const auto gold = load_gold(testing::kData / "eval" / "gold.jsonl", schema);
  const std::vector<NamedPredictions> models = {
      {"Our Model", load_predictions(testing::kData / "eval" / "pred_agent.jsonl", schema)},
      {"Baseline", load_predictions(testing::kData / "eval" / "pred_baseline.jsonl", schema)}};
  const auto report = evaluate(gold, models, schema, {80.0, 90.0}, Granularity::kConcept);
  const Json& want = expected()["fixture"];
  REQUIRE(report.thresholds.size() == want.size());
  for (std::size_t t = 0; t < want.size(); ++t) {
    const auto& tr = report.thresholds[t];
    CAPTURE(tr.threshold);
    CHECK(tr.threshold == want[t]["threshold"].get<double>());
    for (std::size_t m = 0; m < tr.models.size(); ++m) {
      const Json& w = want[t]["models"][m];
      CAPTURE(w["name"]);
      CHECK(tr.models[m].name == w["name"].get<std::string>());
      check_extraction(tr.models[m].extraction, w["extraction"]);
      if (w["categorization"].is_null()) {
        CHECK_FALSE(tr.models[m].categorization.has_value());
      } else {
        REQUIRE(tr.models[m].categorization.has_value());
        check_categorization(*tr.models[m].categorization, w["categorization"]);
      }
      if (w.contains("extraction_p")) {
        REQUIRE(tr.extraction_p[m].has_value());
        CHECK(*tr.extraction_p[m] == doctest::Approx(w["extraction_p"].get<double>()).epsilon(1e-12));
        CHECK(tr.categorization_p[m].has_value() == !w["categorization_p"].is_null());
      } else {
        CHECK_FALSE(tr.extraction_p[m].has_value());
      }
    }
  }
  const std::string text = report.render_text();
  CHECK(text.find("Concept extraction @80 fuzzy confidence (macro, weighted)") != std::string::npos);
  CHECK(text.find("vs Our Model (p-value)") != std::string::npos);
  CHECK(text.find("Jaccard Score (IoU)") != std::string::npos);
  CHECK(text.find("Subset Accuracy") != std::string::npos);
}

TEST_CASE("evaluation inputs: identical predictions score perfectly") {
  const auto schema = ProtocolSchema::abcdef();
  const auto gold = load_gold(testing::kData / "eval" / "gold.jsonl", schema);
  std::vector<PredRecord> same;
  for (const auto& g : gold) {
    PredRecord p{g.report_id, {}};
    for (const auto& c : g.gold_concepts) p.concepts.push_back({c.text, c.category});
    same.push_back(p);
  }
  const auto m = evaluate_model("copy", gold, same, schema, 90.0, Granularity::kReport);
  CHECK(m.extraction.f1.macro == 1.0);
  CHECK(m.extraction.subset_accuracy == 1.0);
  CHECK(m.categorization->f1.weighted == 1.0);
  CHECK(m.extraction_correct.size() == gold.size());
}

TEST_CASE("evaluation inputs: malformed records name the record") {
  const auto schema = ProtocolSchema::abcdef();
  CHECK_THROWS_WITH_AS(parse_gold(R"({"report_id":"r9","text":"x","gold_concepts":[{"text":"a","category":"Q"}]})",
                                  schema),
                       doctest::Contains("r9"), Error);
  CHECK_THROWS_WITH_AS(parse_predictions(R"([{"report_id":"p1","concepts":[{"text":"a","category":"Z"}]}])", schema),
                       doctest::Contains("p1"), Error);
  CHECK_THROWS_WITH_AS(parse_predictions(R"({"report_id":"p2","concepts":[{"text":"  "}]})", schema),
                       doctest::Contains("p2"), Error);
  const auto gold = parse_gold(R"({"report_id":"r1","text":"t","gold_concepts":[]})", schema);
  const auto extra = parse_predictions("{\"report_id\":\"r1\",\"concepts\":[]}\n{\"report_id\":\"r2\",\"concepts\":[]}",
                                       schema);
  CHECK_THROWS_WITH_AS(pair_records(gold, extra), doctest::Contains("r2"), Error);
  CHECK_THROWS_WITH_AS(pair_records(gold, {}), doctest::Contains("r1"), Error);
  CHECK(parse_predictions(R"({"report_id":"r1","concepts":["plain", {"text":"obj"}]})", schema)[0].concepts.size() ==
        2);
}

TEST_CASE("rubric aggregation matches the oracle and rejects bad rows") {
  const auto summary = rubric_aggregate(load_rubric(testing::kData / "eval" / "rubric.csv"));
  const Json& want = expected()["rubric"];
  for (const auto& g : summary.groups) {
    CAPTURE(g.name);
    CHECK(g.accuracy == doctest::Approx(want["groups"][g.name]["accuracy"].get<double>()));
    CHECK(g.structure == doctest::Approx(want["groups"][g.name]["structure"].get<double>()));
  }
  CHECK(summary.groups.size() == 2);
  CHECK(summary.pooled.accuracy == doctest::Approx(want["pooled"]["accuracy"].get<double>()));
  CHECK(summary.render_text().find("4.56") != std::string::npos);

  const auto all_five = rubric_aggregate(parse_rubric_csv("sample_id,rater_id,accuracy,structure\ns,r,5,5\n"));
  CHECK(all_five.pooled.accuracy == 5.0);
  const auto half = rubric_aggregate(parse_rubric_csv(
      "sample_id,rater_id,accuracy,structure\na,r,5,5\nb,r,4,5\nc,r,5,5\nd,r,4,5\n"));
  CHECK(half.pooled.accuracy == 4.5);

  CHECK_THROWS_WITH_AS(parse_rubric_csv("sample_id,rater_id,accuracy,structure\na,r,5,5\nb,r,6,5\n"),
                       doctest::Contains("row 3"), Error);
  CHECK_THROWS_AS(parse_rubric_csv("sample_id,rater_id,accuracy,structure\na,r,x,5\n"), Error);
  CHECK_THROWS_AS(parse_rubric_csv("id,accuracy\n"), Error);
}

TEST_CASE("timing table averages per column and renders dashes") {
  agent::PipelineTrace t;
  t.kind = agent::TaskKind::kConceptsToConcepts;
  auto step = [](std::string tool, std::int64_t act_ms) {
    agent::TraceStep s;
    s.plan.tool = tool;
    s.act = agent::ActRecord{};
    s.act->tool = std::move(tool);
    s.act->result = mcp::ToolResult::success(1, Json::object());
    s.act_ms = act_ms;
    return s;
  };
  t.steps = {step(tools::kMapOntology, 2000), step(tools::kFilterOntology, 4000), step(tools::kCategorize, 1500)};
  t.planning_ms = 2500;
  t.total_ms = 12000;
  const auto row = timing_table({t}, t.kind);
  CHECK(row.planning == doctest::Approx(2.5));
  CHECK(row.ontology_mapping == doctest::Approx(2.0));
  CHECK(row.ontology_filtering == doctest::Approx(4.0));
  CHECK(row.categorization == doctest::Approx(1.5));
  CHECK_FALSE(row.get_concept.has_value());
  CHECK_FALSE(row.generation.has_value());
  CHECK(row.overall == doctest::Approx(12.0));
  const auto cells = row.cells();
  CHECK(cells[1] == "-");
  CHECK(cells[5] == "-");
  CHECK(cells[2] == "2.00");
  const std::string table = render_timing_table({row});
  CHECK(table.find("Ontology filtering") != std::string::npos);

  CHECK_THROWS_WITH_AS(timing_table({}, t.kind), doctest::Contains("EMPTY_INPUT"), Error);
  CHECK_THROWS_AS(timing_table({t}, agent::TaskKind::kReportToReport), Error);
}
