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

// Evaluation: fuzzy alignment of predicted against gold concepts,
// multi-label extraction metrics, multiclass categorization metrics,
// McNemar significance, rubric aggregation and per-tool timing summaries.

#ifndef PAOSTRUCT_EVAL_HPP_
#define PAOSTRUCT_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paostruct/agent.hpp"
#include "paostruct/json.hpp"
#include "paostruct/protocol.hpp"

namespace paostruct::eval {

// Label that collects false positives with no similar gold label.
inline constexpr std::string_view kOutOfVocab = "OUT_OF_VOCAB";

// Edit-distance similarity in [0, 100] over lowercased, whitespace-collapsed
// code points, rounded to 4 decimals. Two empty strings score 100.
double fuzzy_similarity(std::string_view a, std::string_view b);

struct MatchedPair {
  std::size_t pred_index = 0;
  std::size_t gold_index = 0;
  double similarity = 0.0;

  bool operator==(const MatchedPair&) const = default;
};

struct Alignment {
  std::vector<MatchedPair> matched;  // in acceptance order
  std::vector<std::size_t> unmatched_pred;
  std::vector<std::size_t> unmatched_gold;
  double threshold = 0.0;
};

// Greedy one-to-one alignment. Candidate pairs scoring >= threshold are
// taken in order of similarity (desc), gold text, pred text, gold index,
// pred index; a pair is accepted when both ends are still free.
// Throws Error(kInvalidArgument) unless 0 < threshold <= 100.
Alignment align_concepts(const std::vector<std::string>& pred, const std::vector<std::string>& gold,
                         double threshold);

struct ReportConcepts {
  std::vector<std::string> gold;
  std::vector<std::string> pred;
};

struct LabelCounts {
  std::string label;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  std::int64_t support() const { return tp + fn; }
  double precision() const;
  double recall() const;
  double f1() const;
  double jaccard() const;
};

struct Averaged {
  double macro = 0.0;
  double weighted = 0.0;
};

struct MetricsReport {
  std::vector<LabelCounts> per_label;  // label order, OUT_OF_VOCAB last when present
  Averaged precision;
  Averaged recall;
  Averaged f1;
  double subset_accuracy = 0.0;
  double hamming_loss = 0.0;
  std::size_t n_samples = 0;
  std::size_t label_space_size = 0;
  double threshold = 0.0;

  Json to_json() const;
};

// Distinct normalized gold texts, sorted.
std::vector<std::string> label_space(const std::vector<ReportConcepts>& corpus);

// Multi-label scores from precomputed alignments (one per report).
// Throws Error(kEmptyCorpus) for an empty corpus.
MetricsReport extraction_metrics(const std::vector<ReportConcepts>& corpus,
                                 const std::vector<Alignment>& alignments);
MetricsReport extraction_metrics(const std::vector<ReportConcepts>& corpus, double threshold);

struct CategorizationReport {
  std::vector<std::string> keys;                    // schema order
  std::vector<std::vector<std::int64_t>> confusion;  // [gold][pred]
  std::vector<LabelCounts> per_class;               // schema order
  Averaged precision;
  Averaged recall;
  Averaged f1;
  Averaged jaccard;
  std::size_t n_pairs = 0;

  Json to_json() const;
};

struct CategoryPair {
  std::string pred_key;
  std::string gold_key;
};

// Throws Error(kEmptyInput) for no pairs and Error(kInvalidCategory) for a
// key the schema lacks.
CategorizationReport categorization_metrics(const std::vector<CategoryPair>& pairs,
                                            const ProtocolSchema& schema);

struct DiscordantCounts {
  std::int64_t b = 0;  // first right, second wrong
  std::int64_t c = 0;  // first wrong, second right
};

DiscordantCounts discordant_counts(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b);

// Two-sided p-value: exact binomial when b + c < 25, otherwise chi-square
// with continuity correction and one degree of freedom. b + c == 0 gives 1.
double mcnemar_p_value(std::int64_t b, std::int64_t c);

// Throws Error(kInvalidArgument) when the vectors differ in length.
double mcnemar_test(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b);

// Survival function of the chi-square distribution with one degree of freedom.
double chi_square_sf_df1(double x);

// ---------------------------------------------------------------------------
// Files

struct GoldConcept {
  std::string text;
  std::string category;
};

struct GoldRecord {
  std::string report_id;
  std::string report_text;
  std::vector<GoldConcept> gold_concepts;
};

struct PredConcept {
  std::string text;
  std::optional<std::string> category;
};

struct PredRecord {
  std::string report_id;
  std::vector<PredConcept> concepts;
};

// Either a JSON array of records or one record per line. Errors name the
// record id (or line) and raise Error(kParseError).
std::vector<GoldRecord> load_gold(const std::filesystem::path& path, const ProtocolSchema& schema);
std::vector<GoldRecord> parse_gold(std::string_view text, const ProtocolSchema& schema);
std::vector<PredRecord> load_predictions(const std::filesystem::path& path, const ProtocolSchema& schema);
std::vector<PredRecord> parse_predictions(std::string_view text, const ProtocolSchema& schema);

// Pairs every gold record with its prediction by report id. Unknown or
// missing ids raise Error(kParseError) naming the record.
std::vector<std::pair<const GoldRecord*, const PredRecord*>> pair_records(const std::vector<GoldRecord>& gold,
                                                                          const std::vector<PredRecord>& pred);

enum class Granularity { kConcept, kReport };

std::string_view to_string(Granularity g);
Granularity granularity_from_string(std::string_view s);

struct ModelEvaluation {
  std::string name;
  std::vector<ReportConcepts> corpus;
  std::vector<Alignment> alignments;
  MetricsReport extraction;
  std::optional<CategorizationReport> categorization;  // absent when no matched pred has a category
  std::vector<bool> extraction_correct;               // McNemar items
  std::vector<bool> categorization_correct;
};

// Scores one prediction set at one threshold.
ModelEvaluation evaluate_model(std::string name, const std::vector<GoldRecord>& gold,
                               const std::vector<PredRecord>& pred, const ProtocolSchema& schema,
                               double threshold, Granularity granularity = Granularity::kConcept);

struct ThresholdResult {
  double threshold = 0.0;
  std::vector<ModelEvaluation> models;       // first is the reference model
  std::vector<std::optional<double>> extraction_p;      // vs models[0]; nullopt for models[0]
  std::vector<std::optional<double>> categorization_p;  // nullopt when not comparable
};

struct EvalReport {
  Granularity granularity = Granularity::kConcept;
  std::vector<std::string> category_keys;
  std::vector<ThresholdResult> thresholds;

  Json to_json() const;
  // Plain-text tables: extraction per threshold, categorization, confusion.
  std::string render_text() const;
};

struct NamedPredictions {
  std::string name;
  std::vector<PredRecord> records;
};

EvalReport evaluate(const std::vector<GoldRecord>& gold, const std::vector<NamedPredictions>& models,
                    const ProtocolSchema& schema, const std::vector<double>& thresholds,
                    Granularity granularity = Granularity::kConcept);

// ---------------------------------------------------------------------------
// Rubric

struct RubricScore {
  std::string sample_id;
  std::string rater_id;
  std::string group;  // rater panel, e.g. "Radiologist"; defaults to rater_id
  int accuracy = 0;   // 1..5
  int structure = 0;  // 1..5
};

// CSV with header sample_id,rater_id[,group],accuracy,structure. A score
// outside 1..5 raises Error(kParseError) naming the row.
std::vector<RubricScore> parse_rubric_csv(std::string_view text);
std::vector<RubricScore> load_rubric(const std::filesystem::path& path);

struct RubricMeans {
  std::string name;
  std::size_t n = 0;
  double accuracy = 0.0;
  double structure = 0.0;
};

struct RubricSummary {
  std::vector<RubricMeans> groups;  // first-seen order
  std::vector<RubricMeans> raters;  // first-seen order
  RubricMeans pooled;

  Json to_json() const;
  std::string render_text() const;
};

// Throws Error(kEmptyInput) for no rows and Error(kInvalidArgument) for a
// score outside 1..5.
RubricSummary rubric_aggregate(const std::vector<RubricScore>& scores);

// ---------------------------------------------------------------------------
// Timing

struct TimingSummary {
  agent::TaskKind kind = agent::TaskKind::kReportToReport;
  bool cache_enabled = false;
  std::size_t n_traces = 0;
  // Mean seconds per column; nullopt when no trace invoked that stage.
  std::optional<double> planning;
  std::optional<double> get_concept;
  std::optional<double> ontology_mapping;
  std::optional<double> ontology_filtering;
  std::optional<double> categorization;
  std::optional<double> generation;
  double overall = 0.0;

  Json to_json() const;
  // Cells in column order; absent stages render as "-".
  std::vector<std::string> cells(int decimals = 2) const;
};

// Throws Error(kEmptyInput) for no traces and Error(kInvalidArgument) when
// a trace has another task kind or cache setting.
TimingSummary timing_table(const std::vector<agent::PipelineTrace>& traces, agent::TaskKind kind);

std::string render_timing_table(const std::vector<TimingSummary>& rows);

// Fixed-decimal rendering used by every table.
std::string format_fixed(double value, int decimals);

}  // namespace paostruct::eval

#endif  // PAOSTRUCT_EVAL_HPP_
