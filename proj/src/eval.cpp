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

#include "paostruct/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "paostruct/io.hpp"
#include "paostruct/text.hpp"

namespace paostruct::eval {

namespace {

double ratio(std::int64_t num, std::int64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string threshold_label(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

// Pipe table with padded columns.
std::string render_grid(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size(), 0);
  auto measure = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  };
  measure(header);
  for (const auto& r : rows) measure(r);
  auto line = [&](const std::vector<std::string>& r) {
    std::string out = "|";
    for (std::size_t i = 0; i < width.size(); ++i) {
      const std::string cell = i < r.size() ? r[i] : "";
      out += " " + cell + std::string(width[i] - cell.size(), ' ') + " |";
    }
    return out + "\n";
  };
  std::string out = line(header);
  out += "|";
  for (std::size_t w : width) out += std::string(w + 2, '-') + "|";
  out += "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

std::string pair_cell(const Averaged& a) { return format_fixed(a.macro, 2) + ", " + format_fixed(a.weighted, 2); }

std::string p_cell(const std::optional<double>& p) {
  if (!p) return "-";
  if (*p < 1e-4) return "<0.0001";
  return format_fixed(*p, 4);
}

template <typename Counts>
void average(const std::vector<Counts>& rows, Averaged& p, Averaged& r, Averaged& f, Averaged* j) {
  std::int64_t total = 0;
  int with_support = 0;
  for (const auto& c : rows) {
    if (c.support() == 0) continue;
    ++with_support;
    total += c.support();
    p.macro += c.precision();
    r.macro += c.recall();
    f.macro += c.f1();
    p.weighted += c.precision() * static_cast<double>(c.support());
    r.weighted += c.recall() * static_cast<double>(c.support());
    f.weighted += c.f1() * static_cast<double>(c.support());
    if (j != nullptr) {
      j->macro += c.jaccard();
      j->weighted += c.jaccard() * static_cast<double>(c.support());
    }
  }
  if (with_support == 0) return;
  for (Averaged* a : {&p, &r, &f, j}) {
    if (a == nullptr) continue;
    a->macro /= with_support;
    a->weighted /= static_cast<double>(total);
  }
}

Json averaged_json(const Averaged& a) { return {{"macro", a.macro}, {"weighted", a.weighted}}; }

Json counts_json(const LabelCounts& c, bool with_jaccard) {
  Json j = {{"label", c.label},     {"tp", c.tp},          {"fp", c.fp},   {"fn", c.fn},
            {"support", c.support()}, {"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()}};
  if (with_jaccard) j["jaccard"] = c.jaccard();
  return j;
}

// Records come either as a JSON array or one object per line; returns each
// with a locator used in error messages.
std::vector<std::pair<Json, std::string>> read_records(std::string_view text, std::string_view what) {
  std::vector<std::pair<Json, std::string>> out;
  const std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return out;
  if (text[first] == '[') {
    const Json doc = parse_json(text, what);
    std::size_t i = 0;
    for (const auto& r : doc) out.emplace_back(r, "record " + std::to_string(++i));
    return out;
  }
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, nl - pos);
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      out.emplace_back(parse_json(line, std::string(what) + " line " + std::to_string(line_no)),
                       "line " + std::to_string(line_no));
    }
    pos = nl + 1;
  }
  return out;
}

std::string record_id(const Json& r, const std::string& locator, std::string_view what) {
  if (!r.is_object()) throw Error(ErrorCode::kParseError, std::string(what) + " " + locator + " is not an object");
  auto it = r.find("report_id");
  if (it == r.end()) throw Error(ErrorCode::kParseError, std::string(what) + " " + locator + " lacks report_id");
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  throw Error(ErrorCode::kParseError, std::string(what) + " " + locator + ": report_id must be a string");
}

std::string kind_label(agent::TaskKind k) {
  std::string s(agent::to_string(k));
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

}  // namespace

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s[0] == '-') s.erase(0, 1);  // no "-0.00"
  return s;
}

double fuzzy_similarity(std::string_view a, std::string_view b) {
  const std::u32string x = text::utf8_decode(text::normalize_for_matching(a));
  const std::u32string y = text::utf8_decode(text::normalize_for_matching(b));
  const std::size_t longest = std::max(x.size(), y.size());
  if (longest == 0) return 100.0;
  const double d = static_cast<double>(text::levenshtein(x, y));
  const double score = (1.0 - d / static_cast<double>(longest)) * 100.0;
  return std::round(score * 10000.0) / 10000.0;
}

Alignment align_concepts(const std::vector<std::string>& pred, const std::vector<std::string>& gold,
                         double threshold) {
  if (!(threshold > 0.0 && threshold <= 100.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold must be in (0, 100], got " + threshold_label(threshold));
  }
  std::vector<MatchedPair> candidates;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      const double s = fuzzy_similarity(pred[p], gold[g]);
      if (s >= threshold) candidates.push_back({p, g, s});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const MatchedPair& l, const MatchedPair& r) {
    if (l.similarity != r.similarity) return l.similarity > r.similarity;
    if (gold[l.gold_index] != gold[r.gold_index]) return gold[l.gold_index] < gold[r.gold_index];
    if (pred[l.pred_index] != pred[r.pred_index]) return pred[l.pred_index] < pred[r.pred_index];
    if (l.gold_index != r.gold_index) return l.gold_index < r.gold_index;
    return l.pred_index < r.pred_index;
  });

  Alignment out;
  out.threshold = threshold;
  std::vector<bool> pred_used(pred.size(), false);
  std::vector<bool> gold_used(gold.size(), false);
  for (const auto& c : candidates) {
    if (pred_used[c.pred_index] || gold_used[c.gold_index]) continue;
    pred_used[c.pred_index] = gold_used[c.gold_index] = true;
    out.matched.push_back(c);
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (!pred_used[p]) out.unmatched_pred.push_back(p);
  }
  for (std::size_t g = 0; g < gold.size(); ++g) {
    if (!gold_used[g]) out.unmatched_gold.push_back(g);
  }
  return out;
}

double LabelCounts::precision() const { return ratio(tp, tp + fp); }
double LabelCounts::recall() const { return ratio(tp, tp + fn); }
double LabelCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}
double LabelCounts::jaccard() const { return ratio(tp, tp + fp + fn); }

std::vector<std::string> label_space(const std::vector<ReportConcepts>& corpus) {
  std::set<std::string> labels;
  for (const auto& r : corpus) {
    for (const auto& g : r.gold) labels.insert(text::normalize_for_matching(g));
  }
  return {labels.begin(), labels.end()};
}

MetricsReport extraction_metrics(const std::vector<ReportConcepts>& corpus, const std::vector<Alignment>& alignments) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyCorpus, "no reports to score");
  if (alignments.size() != corpus.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one alignment per report is required");
  }
  const std::vector<std::string> labels = label_space(corpus);
  std::map<std::string, LabelCounts> counts;
  for (const auto& l : labels) counts[l].label = l;
  LabelCounts oov{std::string(kOutOfVocab)};

  MetricsReport m;
  m.n_samples = corpus.size();
  m.label_space_size = labels.size();
  m.threshold = alignments.front().threshold;
  std::size_t exact_reports = 0;
  std::int64_t errors = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& report = corpus[i];
    const auto& a = alignments[i];
    for (const auto& pair : a.matched) counts[text::normalize_for_matching(report.gold[pair.gold_index])].tp++;
    for (std::size_t g : a.unmatched_gold) counts[text::normalize_for_matching(report.gold[g])].fn++;
    for (std::size_t p : a.unmatched_pred) {
      // Charge the false positive to the closest gold label.
      const std::string* best = nullptr;
      double best_score = 0.0;
      for (const auto& l : labels) {
        const double s = fuzzy_similarity(report.pred[p], l);
        if (s > best_score) {
          best_score = s;
          best = &l;
        }
      }
      if (best != nullptr) {
        counts[*best].fp++;
      } else {
        oov.fp++;
      }
    }
    errors += static_cast<std::int64_t>(a.unmatched_gold.size() + a.unmatched_pred.size());
    if (a.unmatched_gold.empty() && a.unmatched_pred.empty()) ++exact_reports;
  }
  for (auto& [label, c] : counts) m.per_label.push_back(c);
  if (oov.fp > 0) m.per_label.push_back(oov);

  average(m.per_label, m.precision, m.recall, m.f1, nullptr);
  m.subset_accuracy = ratio(static_cast<std::int64_t>(exact_reports), static_cast<std::int64_t>(corpus.size()));
  const auto grid = static_cast<std::int64_t>(std::max<std::size_t>(labels.size(), 1) * corpus.size());
  m.hamming_loss = ratio(errors, grid);
  return m;
}

MetricsReport extraction_metrics(const std::vector<ReportConcepts>& corpus, double threshold) {
  std::vector<Alignment> alignments;
  alignments.reserve(corpus.size());
  for (const auto& r : corpus) alignments.push_back(align_concepts(r.pred, r.gold, threshold));
  return extraction_metrics(corpus, alignments);
}

Json MetricsReport::to_json() const {
  Json labels = Json::array();
  for (const auto& c : per_label) labels.push_back(counts_json(c, false));
  return {{"threshold", threshold},
          {"n_samples", n_samples},
          {"label_space_size", label_space_size},
          {"precision", averaged_json(precision)},
          {"recall", averaged_json(recall)},
          {"f1", averaged_json(f1)},
          {"subset_accuracy", subset_accuracy},
          {"hamming_loss", hamming_loss},
          {"per_label", std::move(labels)}};
}

CategorizationReport categorization_metrics(const std::vector<CategoryPair>& pairs, const ProtocolSchema& schema) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "no categorization pairs to score");
  CategorizationReport r;
  r.keys = schema.keys();
  const std::size_t k = r.keys.size();
  r.confusion.assign(k, std::vector<std::int64_t>(k, 0));
  auto index_of = [&](const std::string& key) {
    auto it = std::find(r.keys.begin(), r.keys.end(), key);
    if (it == r.keys.end()) {
      throw Error(ErrorCode::kInvalidCategory, "'" + key + "' is not a category of " + schema.name());
    }
    return static_cast<std::size_t>(it - r.keys.begin());
  };
  for (const auto& p : pairs) r.confusion[index_of(p.gold_key)][index_of(p.pred_key)]++;
  r.n_pairs = pairs.size();
  for (std::size_t i = 0; i < k; ++i) {
    LabelCounts c{r.keys[i]};
    c.tp = r.confusion[i][i];
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      c.fn += r.confusion[i][j];
      c.fp += r.confusion[j][i];
    }
    r.per_class.push_back(c);
  }
  average(r.per_class, r.precision, r.recall, r.f1, &r.jaccard);
  return r;
}

Json CategorizationReport::to_json() const {
  Json classes = Json::array();
  for (const auto& c : per_class) classes.push_back(counts_json(c, true));
  return {{"n_pairs", n_pairs},
          {"keys", keys},
          {"confusion", confusion},
          {"precision", averaged_json(precision)},
          {"recall", averaged_json(recall)},
          {"f1", averaged_json(f1)},
          {"jaccard", averaged_json(jaccard)},
          {"per_class", std::move(classes)}};
}

DiscordantCounts discordant_counts(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b) {
  if (correct_a.size() != correct_b.size()) {
    throw Error(ErrorCode::kInvalidArgument, "McNemar needs paired outcomes (" + std::to_string(correct_a.size()) +
                                                 " vs " + std::to_string(correct_b.size()) + ")");
  }
  DiscordantCounts d;
  for (std::size_t i = 0; i < correct_a.size(); ++i) {
    if (correct_a[i] && !correct_b[i]) ++d.b;
    if (!correct_a[i] && correct_b[i]) ++d.c;
  }
  return d;
}

double chi_square_sf_df1(double x) { return x <= 0.0 ? 1.0 : std::erfc(std::sqrt(x / 2.0)); }

double mcnemar_p_value(std::int64_t b, std::int64_t c) {
  if (b < 0 || c < 0) throw Error(ErrorCode::kInvalidArgument, "discordant counts must be non-negative");
  const std::int64_t n = b + c;
  if (n == 0) return 1.0;
  if (n < 25) {
    // Exact: binomial coefficients fit in 64 bits and 2^n is exact in double.
    std::uint64_t coef = 1;
    std::uint64_t tail = 0;
    for (std::int64_t k = 0; k <= std::min(b, c); ++k) {
      tail += coef;
      coef = coef * static_cast<std::uint64_t>(n - k) / static_cast<std::uint64_t>(k + 1);
    }
    return std::min(1.0, 2.0 * static_cast<double>(tail) / std::ldexp(1.0, static_cast<int>(n)));
  }
  const double diff = static_cast<double>(std::llabs(b - c)) - 1.0;
  return chi_square_sf_df1(diff * diff / static_cast<double>(n));
}

double mcnemar_test(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b) {
  const auto d = discordant_counts(correct_a, correct_b);
  return mcnemar_p_value(d.b, d.c);
}

// ---------------------------------------------------------------------------
// Files

std::vector<GoldRecord> parse_gold(std::string_view text, const ProtocolSchema& schema) {
  std::vector<GoldRecord> out;
  std::set<std::string> seen;
  for (const auto& [r, locator] : read_records(text, "gold file")) {
    GoldRecord g;
    g.report_id = record_id(r, locator, "gold");
    const std::string where = "gold record '" + g.report_id + "'";
    if (!seen.insert(g.report_id).second) throw Error(ErrorCode::kParseError, where + " appears twice");
    auto t = r.find("text");
    if (t == r.end() || !t->is_string()) throw Error(ErrorCode::kParseError, where + " lacks text");
    g.report_text = t->get<std::string>();
    auto list = r.find("gold_concepts");
    if (list == r.end() || !list->is_array()) throw Error(ErrorCode::kParseError, where + " lacks gold_concepts");
    std::size_t i = 0;
    for (const auto& c : *list) {
      ++i;
      const std::string at = where + " concept " + std::to_string(i);
      if (!c.is_object() || !c.contains("text") || !c["text"].is_string() || !c.contains("category") ||
          !c["category"].is_string()) {
        throw Error(ErrorCode::kParseError, at + " needs string text and category");
      }
      GoldConcept gc{c["text"].get<std::string>(), c["category"].get<std::string>()};
      if (text::collapse_whitespace(gc.text).empty()) throw Error(ErrorCode::kParseError, at + " has empty text");
      if (!schema.has_key(gc.category)) {
        throw Error(ErrorCode::kParseError,
                    at + ": category '" + gc.category + "' is not in protocol " + schema.name());
      }
      g.gold_concepts.push_back(std::move(gc));
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GoldRecord> load_gold(const std::filesystem::path& path, const ProtocolSchema& schema) {
  return parse_gold(io::read_file(path), schema);
}

std::vector<PredRecord> parse_predictions(std::string_view text, const ProtocolSchema& schema) {
  std::vector<PredRecord> out;
  std::set<std::string> seen;
  for (const auto& [r, locator] : read_records(text, "prediction file")) {
    PredRecord p;
    p.report_id = record_id(r, locator, "prediction");
    const std::string where = "prediction '" + p.report_id + "'";
    if (!seen.insert(p.report_id).second) throw Error(ErrorCode::kParseError, where + " appears twice");
    auto list = r.find("concepts");
    if (list == r.end() || !list->is_array()) throw Error(ErrorCode::kParseError, where + " lacks concepts");
    std::size_t i = 0;
    for (const auto& c : *list) {
      ++i;
      const std::string at = where + " concept " + std::to_string(i);
      PredConcept pc;
      if (c.is_string()) {
        pc.text = c.get<std::string>();
      } else if (c.is_object() && c.contains("text") && c["text"].is_string()) {
        pc.text = c["text"].get<std::string>();
        if (auto cat = c.find("category"); cat != c.end() && !cat->is_null()) {
          if (!cat->is_string() || !schema.has_key(cat->get<std::string>())) {
            throw Error(ErrorCode::kParseError, at + ": category " + cat->dump() + " is not in protocol " +
                                                    schema.name());
          }
          pc.category = cat->get<std::string>();
        }
      } else {
        throw Error(ErrorCode::kParseError, at + " needs string text");
      }
      if (text::collapse_whitespace(pc.text).empty()) throw Error(ErrorCode::kParseError, at + " has empty text");
      p.concepts.push_back(std::move(pc));
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PredRecord> load_predictions(const std::filesystem::path& path, const ProtocolSchema& schema) {
  return parse_predictions(io::read_file(path), schema);
}

std::vector<std::pair<const GoldRecord*, const PredRecord*>> pair_records(const std::vector<GoldRecord>& gold,
                                                                          const std::vector<PredRecord>& pred) {
  std::map<std::string, const PredRecord*> by_id;
  for (const auto& p : pred) by_id[p.report_id] = &p;
  std::set<std::string> gold_ids;
  std::vector<std::pair<const GoldRecord*, const PredRecord*>> out;
  for (const auto& g : gold) {
    gold_ids.insert(g.report_id);
    auto it = by_id.find(g.report_id);
    if (it == by_id.end()) {
      throw Error(ErrorCode::kParseError, "predictions lack report '" + g.report_id + "'");
    }
    out.emplace_back(&g, it->second);
  }
  for (const auto& p : pred) {
    if (!gold_ids.count(p.report_id)) {
      throw Error(ErrorCode::kParseError, "prediction for unknown report '" + p.report_id + "'");
    }
  }
  return out;
}

std::string_view to_string(Granularity g) { return g == Granularity::kConcept ? "concept" : "report"; }

Granularity granularity_from_string(std::string_view s) {
  if (s == "concept") return Granularity::kConcept;
  if (s == "report") return Granularity::kReport;
  throw Error(ErrorCode::kInvalidArgument, "granularity must be 'concept' or 'report', got '" + std::string(s) + "'");
}

ModelEvaluation evaluate_model(std::string name, const std::vector<GoldRecord>& gold,
                               const std::vector<PredRecord>& pred, const ProtocolSchema& schema,
                               double threshold, Granularity granularity) {
  ModelEvaluation m;
  m.name = std::move(name);
  const auto paired = pair_records(gold, pred);
  std::vector<CategoryPair> pairs;
  for (const auto& [g, p] : paired) {
    ReportConcepts rc;
    for (const auto& c : g->gold_concepts) rc.gold.push_back(c.text);
    for (const auto& c : p->concepts) rc.pred.push_back(c.text);
    Alignment a = align_concepts(rc.pred, rc.gold, threshold);

    std::vector<bool> found(rc.gold.size(), false);
    std::vector<bool> right_category(rc.gold.size(), false);
    for (const auto& pair : a.matched) {
      found[pair.gold_index] = true;
      const auto& pc = p->concepts[pair.pred_index];
      if (pc.category) {
        const std::string& gold_key = g->gold_concepts[pair.gold_index].category;
        pairs.push_back({*pc.category, gold_key});
        right_category[pair.gold_index] = *pc.category == gold_key;
      }
    }
    if (granularity == Granularity::kConcept) {
      m.extraction_correct.insert(m.extraction_correct.end(), found.begin(), found.end());
      m.categorization_correct.insert(m.categorization_correct.end(), right_category.begin(), right_category.end());
    } else {
      const bool exact = a.unmatched_gold.empty() && a.unmatched_pred.empty();
      m.extraction_correct.push_back(exact);
      m.categorization_correct.push_back(
          exact && std::all_of(right_category.begin(), right_category.end(), [](bool b) { return b; }));
    }
    m.corpus.push_back(std::move(rc));
    m.alignments.push_back(std::move(a));
  }
  m.extraction = extraction_metrics(m.corpus, m.alignments);
  if (!pairs.empty()) m.categorization = categorization_metrics(pairs, schema);
  return m;
}

EvalReport evaluate(const std::vector<GoldRecord>& gold, const std::vector<NamedPredictions>& models,
                    const ProtocolSchema& schema, const std::vector<double>& thresholds, Granularity granularity) {
  if (models.empty()) throw Error(ErrorCode::kInvalidArgument, "no prediction sets given");
  if (thresholds.empty()) throw Error(ErrorCode::kInvalidArgument, "no thresholds given");
  EvalReport report;
  report.granularity = granularity;
  report.category_keys = schema.keys();
  for (double t : thresholds) {
    ThresholdResult tr;
    tr.threshold = t;
    for (const auto& model : models) {
      tr.models.push_back(evaluate_model(model.name, gold, model.records, schema, t, granularity));
    }
    const ModelEvaluation& ref = tr.models.front();
    for (std::size_t i = 0; i < tr.models.size(); ++i) {
      if (i == 0) {
        tr.extraction_p.push_back(std::nullopt);
        tr.categorization_p.push_back(std::nullopt);
        continue;
      }
      const ModelEvaluation& other = tr.models[i];
      tr.extraction_p.push_back(mcnemar_test(ref.extraction_correct, other.extraction_correct));
      if (ref.categorization && other.categorization) {
        tr.categorization_p.push_back(mcnemar_test(ref.categorization_correct, other.categorization_correct));
      } else {
        tr.categorization_p.push_back(std::nullopt);
      }
    }
    report.thresholds.push_back(std::move(tr));
  }
  return report;
}

Json EvalReport::to_json() const {
  Json ts = Json::array();
  for (const auto& t : thresholds) {
    Json models = Json::array();
    for (std::size_t i = 0; i < t.models.size(); ++i) {
      const auto& m = t.models[i];
      Json entry = {{"name", m.name}, {"extraction", m.extraction.to_json()}};
      entry["categorization"] = m.categorization ? m.categorization->to_json() : Json();
      entry["extraction_p_value"] = t.extraction_p[i] ? Json(*t.extraction_p[i]) : Json();
      entry["categorization_p_value"] = t.categorization_p[i] ? Json(*t.categorization_p[i]) : Json();
      models.push_back(std::move(entry));
    }
    ts.push_back({{"threshold", t.threshold}, {"models", std::move(models)}});
  }
  return {{"granularity", std::string(eval::to_string(granularity))},
          {"categories", category_keys},
          {"thresholds", std::move(ts)}};
}

std::string EvalReport::render_text() const {
  std::ostringstream out;
  for (const auto& t : thresholds) {
    out << "Concept extraction @" << threshold_label(t.threshold) << " fuzzy confidence (macro, weighted)\n\n";
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < t.models.size(); ++i) {
      const auto& m = t.models[i].extraction;
      rows.push_back({t.models[i].name, pair_cell(m.precision), pair_cell(m.recall), pair_cell(m.f1),
                      format_fixed(m.subset_accuracy, 2), format_fixed(m.hamming_loss, 4), p_cell(t.extraction_p[i])});
    }
    out << render_grid({"Model", "Precision", "Recall", "F1 score", "Subset Accuracy", "Hamming loss",
                        "vs Our Model (p-value)"},
                       rows)
        << "\n";

    rows.clear();
    for (std::size_t i = 0; i < t.models.size(); ++i) {
      const auto& c = t.models[i].categorization;
      if (!c) {
        rows.push_back({t.models[i].name, "-", "-", "-", "-", "-"});
        continue;
      }
      rows.push_back({t.models[i].name, pair_cell(c->precision), pair_cell(c->recall), pair_cell(c->f1),
                      pair_cell(c->jaccard), p_cell(t.categorization_p[i])});
    }
    out << "Concept categorization @" << threshold_label(t.threshold) << " (macro, weighted)\n\n"
        << render_grid({"Model", "Precision", "Recall", "F1 score", "Jaccard Score (IoU)", "vs Our Agent (p-values)"},
                       rows)
        << "\n";

    for (const auto& m : t.models) {
      if (!m.categorization) continue;
      const auto& c = *m.categorization;
      std::vector<std::string> header = {"gold \\ pred"};
      header.insert(header.end(), c.keys.begin(), c.keys.end());
      std::vector<std::vector<std::string>> grid;
      for (std::size_t i = 0; i < c.keys.size(); ++i) {
        std::vector<std::string> row = {c.keys[i]};
        for (auto v : c.confusion[i]) row.push_back(std::to_string(v));
        grid.push_back(std::move(row));
      }
      out << "Confusion matrix, " << m.name << " @" << threshold_label(t.threshold) << "\n\n"
          << render_grid(header, grid) << "\n";
    }
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Rubric

std::vector<RubricScore> parse_rubric_csv(std::string_view text) {
  std::vector<std::vector<std::string>> lines;
  std::vector<std::size_t> line_numbers;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(text::collapse_whitespace(line.substr(start, comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    lines.push_back(std::move(cells));
    line_numbers.push_back(line_no);
  }
  if (lines.empty()) return {};

  const auto& header = lines.front();
  auto column = [&](const char* name, bool required) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required) throw Error(ErrorCode::kParseError, std::string("rubric header lacks '") + name + "'");
      return std::nullopt;
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t sample = *column("sample_id", true);
  const std::size_t rater = *column("rater_id", true);
  const auto group = column("group", false);
  const std::size_t accuracy = *column("accuracy", true);
  const std::size_t structure = *column("structure", true);

  std::vector<RubricScore> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& cells = lines[i];
    const std::string row = "rubric row " + std::to_string(line_numbers[i]);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kParseError, row + ": expected " + std::to_string(header.size()) + " fields, got " +
                                              std::to_string(cells.size()));
    }
    auto score = [&](std::size_t col, const char* name) {
      const std::string& cell = cells[col];
      int v = 0;
      std::size_t used = 0;
      try {
        v = std::stoi(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size() || v < 1 || v > 5) {
        throw Error(ErrorCode::kParseError, row + ": " + name + " score '" + cell + "' is not an integer in 1..5");
      }
      return v;
    };
    RubricScore s;
    s.sample_id = cells[sample];
    s.rater_id = cells[rater];
    s.group = group && !cells[*group].empty() ? cells[*group] : s.rater_id;
    s.accuracy = score(accuracy, "accuracy");
    s.structure = score(structure, "structure");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<RubricScore> load_rubric(const std::filesystem::path& path) { return parse_rubric_csv(io::read_file(path)); }

RubricSummary rubric_aggregate(const std::vector<RubricScore>& scores) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyInput, "no rubric scores");
  struct Sum {
    std::string name;
    std::size_t n = 0;
    std::int64_t accuracy = 0;
    std::int64_t structure = 0;
    RubricMeans means() const {
      return {name, n, static_cast<double>(accuracy) / static_cast<double>(n),
              static_cast<double>(structure) / static_cast<double>(n)};
    }
  };
  std::vector<Sum> groups;
  std::vector<Sum> raters;
  Sum pooled{"Pooled"};
  auto bucket = [](std::vector<Sum>& v, const std::string& name) -> Sum& {
    for (auto& s : v) {
      if (s.name == name) return s;
    }
    v.push_back({name});
    return v.back();
  };
  std::size_t row = 0;
  for (const auto& s : scores) {
    ++row;
    if (s.accuracy < 1 || s.accuracy > 5 || s.structure < 1 || s.structure > 5) {
      throw Error(ErrorCode::kInvalidArgument, "score row " + std::to_string(row) + " is outside 1..5");
    }
    for (Sum* sum : {&bucket(groups, s.group), &bucket(raters, s.rater_id), &pooled}) {
      sum->n++;
      sum->accuracy += s.accuracy;
      sum->structure += s.structure;
    }
  }
  RubricSummary out;
  for (const auto& g : groups) out.groups.push_back(g.means());
  for (const auto& r : raters) out.raters.push_back(r.means());
  out.pooled = pooled.means();
  return out;
}

Json RubricSummary::to_json() const {
  auto rows = [](const std::vector<RubricMeans>& v) {
    Json a = Json::array();
    for (const auto& m : v) a.push_back({{"name", m.name}, {"n", m.n}, {"accuracy", m.accuracy}, {"structure", m.structure}});
    return a;
  };
  return {{"groups", rows(groups)},
          {"raters", rows(raters)},
          {"pooled", {{"n", pooled.n}, {"accuracy", pooled.accuracy}, {"structure", pooled.structure}}}};
}

std::string RubricSummary::render_text() const {
  std::vector<std::vector<std::string>> rows;
  for (const auto& g : groups) rows.push_back({g.name, format_fixed(g.accuracy, 2), format_fixed(g.structure, 2)});
  rows.push_back({pooled.name, format_fixed(pooled.accuracy, 2), format_fixed(pooled.structure, 2)});
  return render_grid({"Method", "Average Accuracy score", "Average Structure score"}, rows);
}

// ---------------------------------------------------------------------------
// Timing

TimingSummary timing_table(const std::vector<agent::PipelineTrace>& traces, agent::TaskKind kind) {
  if (traces.empty()) throw Error(ErrorCode::kEmptyInput, "no traces for " + kind_label(kind));
  TimingSummary row;
  row.kind = kind;
  row.cache_enabled = traces.front().options.cache_enabled;
  row.n_traces = traces.size();

  struct Column {
    std::optional<double> TimingSummary::*field;
    const char* tool;  // nullptr for the planning column
  };
  const Column columns[] = {
      {&TimingSummary::planning, nullptr},
      {&TimingSummary::get_concept, "get_concept"},
      {&TimingSummary::ontology_mapping, "map_ontology"},
      {&TimingSummary::ontology_filtering, "filter_ontology"},
      {&TimingSummary::categorization, "categorize_concepts"},
      {&TimingSummary::generation, "generate_report"},
  };
  std::int64_t overall_ms = 0;
  for (const auto& t : traces) {
    if (t.kind != kind) {
      throw Error(ErrorCode::kInvalidArgument,
                  "trace for " + kind_label(t.kind) + " mixed into the " + kind_label(kind) + " row");
    }
    if (t.options.cache_enabled != row.cache_enabled) {
      throw Error(ErrorCode::kInvalidArgument, "traces mix cache-enabled and cache-disabled runs");
    }
    overall_ms += t.total_ms;
    const auto per_tool = t.tool_ms();
    for (const auto& col : columns) {
      std::optional<double> ms;
      if (col.tool == nullptr) {
        if (!t.steps.empty()) ms = static_cast<double>(t.planning_ms);
      } else if (auto it = per_tool.find(col.tool); it != per_tool.end()) {
        ms = static_cast<double>(it->second);
      }
      if (!ms) continue;
      auto& slot = row.*(col.field);
      slot = slot.value_or(0.0) + *ms;
    }
  }
  const double n = static_cast<double>(traces.size());
  for (const auto& col : columns) {
    auto& slot = row.*(col.field);
    if (slot) slot = *slot / n / 1000.0;
  }
  row.overall = static_cast<double>(overall_ms) / n / 1000.0;
  return row;
}

Json TimingSummary::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(); };
  return {{"task_kind", std::string(agent::to_string(kind))},
          {"cache_enabled", cache_enabled},
          {"n_traces", n_traces},
          {"planning", opt(planning)},
          {"get_concept", opt(get_concept)},
          {"ontology_mapping", opt(ontology_mapping)},
          {"ontology_filtering", opt(ontology_filtering)},
          {"categorization", opt(categorization)},
          {"generation", opt(generation)},
          {"overall", overall}};
}

std::vector<std::string> TimingSummary::cells(int decimals) const {
  auto cell = [&](const std::optional<double>& v) { return v ? format_fixed(*v, decimals) : std::string("-"); };
  return {cell(planning),       cell(get_concept), cell(ontology_mapping),
          cell(ontology_filtering), cell(categorization), cell(generation),
          format_fixed(overall, decimals)};
}

std::string render_timing_table(const std::vector<TimingSummary>& rows) {
  std::vector<std::vector<std::string>> grid;
  for (const auto& r : rows) {
    std::vector<std::string> line = {kind_label(r.kind) + (r.cache_enabled ? " (check cache enabled)" : "")};
    const auto cells = r.cells();
    line.insert(line.end(), cells.begin(), cells.end());
    grid.push_back(std::move(line));
  }
  return render_grid({"Task", "Planning", "Get concept", "Ontology mapping", "Ontology filtering", "Categorization",
                      "Generation", "Overall"},
                     grid);
}

}  // namespace paostruct::eval
