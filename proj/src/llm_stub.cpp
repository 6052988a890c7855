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

#include <algorithm>
#include <cctype>
#include <set>

#include "paostruct/error.hpp"
#include "paostruct/io.hpp"
#include "paostruct/llm.hpp"
#include "paostruct/text.hpp"

namespace paostruct::llm {

namespace {

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_word_byte(char ch) {
  const auto c = static_cast<unsigned char>(ch);
  return std::isalnum(c) != 0 || c >= 0x80 || c == '-' || c == '\'';
}

struct Token {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string norm;
};

// Word tokens of `s` with byte spans; each carries its normalized lemma.
std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_word_byte(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_word_byte(s[j])) ++j;
    for (auto& part : split_words(text::normalize_concept(s.substr(i, j - i)))) {
      out.push_back({i, j, std::move(part)});
    }
    i = j;
  }
  return out;
}

bool is_alnum_at(std::string_view s, std::size_t i) {
  return i < s.size() && std::isalnum(static_cast<unsigned char>(s[i])) != 0;
}

// Whole-phrase occurrence of `cue` in lowercase `hay`.
bool has_phrase(std::string_view hay, std::string_view cue) {
  if (cue.empty()) return false;
  for (std::size_t at = hay.find(cue); at != std::string_view::npos; at = hay.find(cue, at + 1)) {
    const bool left = at == 0 || !is_alnum_at(hay, at - 1);
    const bool right = !is_alnum_at(hay, at + cue.size());
    if (left && right) return true;
  }
  return false;
}

bool has_any(std::string_view hay, const std::vector<std::string>& cues) {
  return std::any_of(cues.begin(), cues.end(), [&](const std::string& c) { return has_phrase(hay, c); });
}

std::vector<std::string> string_list(const Json& j, std::string_view key) {
  std::vector<std::string> out;
  if (auto it = j.find(key); it != j.end()) {
    for (const auto& v : *it) out.push_back(text::to_lower(v.get<std::string>()));
  }
  return out;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string wrap(const std::string& reasoning, const Json& value) {
  return "<think>\n" + reasoning + "\n</think>\n```json\n" + dump_pretty(value) + "```\n";
}

const std::set<std::string, std::less<>> kStopwords = {"a",   "an",  "and",       "the", "of",
                                                        "or",  "in",  "including", "to",  "with",
                                                        "for", "on",  "at",        "by"};

// Category whose title and scope share the most content words with the
// concept; ties and zero overlap go to the earliest category.
std::string category_by_scope(const Json& categories, const std::string& normalized_text) {
  std::set<std::string> words;
  for (auto& w : split_words(normalized_text)) {
    if (!kStopwords.count(w)) words.insert(w);
  }
  std::string best;
  int best_score = -1;
  for (const auto& c : categories) {
    const std::string scope = text::normalize_concept(c.value("title", "") + " " + c.value("scope_description", ""));
    std::set<std::string> scope_words;
    for (auto& w : split_words(scope)) scope_words.insert(w);
    int score = 0;
    for (const auto& w : words) score += scope_words.count(w) ? 1 : 0;
    if (score > best_score) {
      best_score = score;
      best = c.value("key", "");
    }
  }
  return best;
}

bool category_in(const Json& categories, std::string_view key) {
  return std::any_of(categories.begin(), categories.end(),
                     [&](const Json& c) { return c.value("key", "") == key; });
}

const Json& input_field(const Json& input, std::string_view key, std::string_view role) {
  auto it = input.find(key);
  if (it == input.end()) {
    throw Error(ErrorCode::kStubUnsupported,
                std::string(role) + " input lacks '" + std::string(key) + "'");
  }
  return *it;
}

Json ref(const std::string& step, const std::string& pointer) {
  return {{"$ref", step + "#" + pointer}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Lexicon

void Lexicon::add(LexiconEntry e) {
  if (e.normalized.empty()) e.normalized = text::normalize_concept(e.term);
  if (e.normalized.empty()) throw Error(ErrorCode::kConfigError, "lexicon term is empty");
  const std::size_t idx = entries_.size();
  auto add_form = [&](const std::string& form) {
    const std::string n = text::normalize_concept(form);
    if (n.empty()) return;
    by_normalized_.emplace(n, idx);  // first entry claiming a form keeps it
    patterns_.push_back({split_words(n), idx});
  };
  entries_.push_back(std::move(e));
  add_form(entries_.back().term);
  for (const auto& a : entries_.back().aliases) add_form(a);
  std::stable_sort(patterns_.begin(), patterns_.end(), [](const Pattern& a, const Pattern& b) {
    return a.tokens.size() > b.tokens.size();
  });
}

Lexicon Lexicon::from_json(const Json& j) {
  Lexicon lex;
  const Json& cues = j.value("cues", Json::object());
  lex.negation_pre_ = string_list(cues, "negation_pre");
  lex.negation_post_ = string_list(cues, "negation_post");
  lex.uncertain_pre_ = string_list(cues, "uncertain_pre");
  lex.uncertain_post_ = string_list(cues, "uncertain_post");
  lex.pseudo_ = string_list(cues, "pseudo_negation");
  lex.terminators_ = string_list(cues, "scope_terminators");
  if (auto r = j.find("finding_roots"); r != j.end()) {
    for (const auto& id : *r) lex.finding_roots_.push_back(id.get<std::string>());
  }
  const Json& terms = require_array(j, "terms", "lexicon");
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const std::string path = "lexicon.terms[" + std::to_string(i) + "]";
    LexiconEntry e;
    e.term = require_string(terms[i], "term", path);
    e.category_key = require_string(terms[i], "category_key", path);
    e.primary_ontology_label = optional_string(terms[i], "primary_ontology_label", path).value_or("");
    if (auto c = terms[i].find("polarity_cues"); c != terms[i].end()) {
      for (const auto& v : *c) e.polarity_cues.push_back(text::to_lower(v.get<std::string>()));
    }
    if (auto a = terms[i].find("aliases"); a != terms[i].end()) {
      for (const auto& v : *a) e.aliases.push_back(v.get<std::string>());
    }
    lex.add(std::move(e));
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  try {
    return from_json(parse_json(io::read_file(path), path.string()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNotFound) throw Error(ErrorCode::kConfigError, "lexicon " + e.detail());
    throw;
  }
}

Json Lexicon::to_json() const {
  Json terms = Json::array();
  for (const auto& e : entries_) {
    Json t = {{"term", e.term},
              {"category_key", e.category_key},
              {"primary_ontology_label", e.primary_ontology_label},
              {"polarity_cues", e.polarity_cues}};
    if (!e.aliases.empty()) t["aliases"] = e.aliases;
    terms.push_back(std::move(t));
  }
  return {{"finding_roots", finding_roots_},
          {"cues",
           {{"negation_pre", negation_pre_},
            {"negation_post", negation_post_},
            {"uncertain_pre", uncertain_pre_},
            {"uncertain_post", uncertain_post_},
            {"pseudo_negation", pseudo_},
            {"scope_terminators", terminators_}}},
          {"terms", std::move(terms)}};
}

const LexiconEntry* Lexicon::find_normalized(std::string_view normalized) const {
  auto it = by_normalized_.find(normalized);
  return it == by_normalized_.end() ? nullptr : &entries_[it->second];
}

const LexiconEntry* Lexicon::match(std::string_view normalized) const {
  if (const auto* exact = find_normalized(normalized)) return exact;
  const auto words = split_words(normalized);
  for (const auto& p : patterns_) {  // longest first
    if (p.tokens.size() > words.size()) continue;
    for (std::size_t i = 0; i + p.tokens.size() <= words.size(); ++i) {
      if (std::equal(p.tokens.begin(), p.tokens.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) {
        return &entries_[p.entry];
      }
    }
  }
  return nullptr;
}

const LexiconEntry* Lexicon::find_by_label(std::string_view label) const {
  const std::string want = text::normalize_concept(label);
  if (want.empty()) return nullptr;
  for (const auto& e : entries_) {
    if (text::normalize_concept(e.primary_ontology_label) == want) return &e;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// Polarity

std::string detect_polarity(const Lexicon& lexicon, std::string_view sentence, std::size_t begin,
                            std::size_t end, const LexiconEntry* entry) {
  std::string lower = text::to_lower(sentence);
  // Mask pseudo-negations ("no change in ...") so their cue words are inert.
  for (const auto& p : lexicon.pseudo_negations()) {
    for (std::size_t at = lower.find(p); at != std::string::npos; at = lower.find(p, at + p.size())) {
      std::fill(lower.begin() + static_cast<std::ptrdiff_t>(at),
                lower.begin() + static_cast<std::ptrdiff_t>(at + p.size()), ' ');
    }
  }
  // Scope: from the nearest terminator before the mention to the nearest
  // one after it.
  std::size_t scope_begin = 0;
  std::size_t scope_end = lower.size();
  auto consider = [&](std::size_t at, std::size_t len) {
    if (at + len <= begin) scope_begin = std::max(scope_begin, at + len);
    if (at >= end) scope_end = std::min(scope_end, at);
  };
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (lower[i] == ';' || lower[i] == ':') consider(i, 1);
  }
  for (const auto& t : lexicon.scope_terminators()) {
    for (std::size_t at = lower.find(t); at != std::string::npos; at = lower.find(t, at + 1)) {
      const bool whole = (at == 0 || !is_alnum_at(lower, at - 1)) && !is_alnum_at(lower, at + t.size());
      if (whole) consider(at, t.size());
    }
  }
  const std::string_view full(lower);
  const std::string_view pre = full.substr(scope_begin, begin - scope_begin);
  const std::string_view post = full.substr(end, scope_end - end);

  if (has_any(post, lexicon.uncertainty_post_cues()) || has_any(pre, lexicon.uncertainty_cues())) {
    return "uncertain";
  }
  if (has_any(pre, lexicon.negation_cues()) || has_any(post, lexicon.negation_post_cues())) return "absent";
  if (entry != nullptr && (has_any(pre, entry->polarity_cues) || has_any(post, entry->polarity_cues))) {
    return "absent";
  }
  return "present";
}

std::pair<std::string, std::string> split_leading_cue(const Lexicon& lexicon, std::string_view raw) {
  const std::string trimmed = text::collapse_whitespace(raw);
  const std::string lower = text::to_lower(trimmed);
  std::string best_cue;
  std::string polarity = "present";
  auto scan = [&](const std::vector<std::string>& cues, const char* pol) {
    for (const auto& c : cues) {
      if (c.size() > best_cue.size() && lower.size() > c.size() && lower.compare(0, c.size(), c) == 0 &&
          lower[c.size()] == ' ') {
        best_cue = c;
        polarity = pol;
      }
    }
  };
  scan(lexicon.negation_cues(), "absent");
  scan(lexicon.uncertainty_cues(), "uncertain");
  if (best_cue.empty()) return {trimmed, "present"};
  return {trimmed.substr(best_cue.size() + 1), polarity};
}

// ---------------------------------------------------------------------------
// Stub engine

StubEngine::StubEngine(std::shared_ptr<const Lexicon> lexicon) : lexicon_(std::move(lexicon)) {
  if (!lexicon_) throw Error(ErrorCode::kConfigError, "stub engine requires a lexicon");
}

std::string StubEngine::generate(const std::vector<ChatMessage>& conversation) {
  const ChatMessage* prompt = nullptr;
  for (const auto& m : conversation) {
    if (m.role == "user") {
      prompt = &m;
      break;
    }
  }
  if (prompt == nullptr) throw Error(ErrorCode::kStubUnsupported, "conversation has no user prompt");
  const auto role = prompt_role(prompt->content);
  if (!role) throw Error(ErrorCode::kStubUnsupported, "prompt carries no role tag");
  const auto input = prompt_input(prompt->content);
  if (!input) throw Error(ErrorCode::kStubUnsupported, "prompt lacks a parseable task_input block");

  Json out;
  switch (*role) {
    case Role::kExtract:
      out = extract(*input);
      break;
    case Role::kCategorize:
      out = categorize(*input);
      break;
    case Role::kFilter:
      out = filter(*input);
      break;
    case Role::kPlan:
      out = plan(*input);
      break;
    case Role::kObserve:
      out = observe(*input);
      break;
    case Role::kGenerate:
      out = generate_report(*input);
      break;
  }
  return wrap("stub " + std::string(to_string(*role)) + " over " + std::to_string(conversation.size()) +
                  " message(s)",
              out);
}

Json StubEngine::extract(const Json& input) const {
  const std::string report = input_field(input, "report_text", "extract").get<std::string>();
  struct Hit {
    std::size_t begin, end;  // byte span in the report
    std::size_t entry;
    std::size_t sentence;
  };
  std::vector<Hit> hits;
  const auto spans = text::sentence_spans(report);
  for (std::size_t si = 0; si < spans.size(); ++si) {
    const std::string_view sentence = std::string_view(report).substr(spans[si].begin, spans[si].end - spans[si].begin);
    const auto tokens = tokenize(sentence);
    std::vector<Hit> local;
    for (const auto& p : lexicon_->patterns()) {
      const std::size_t n = p.tokens.size();
      for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        bool eq = true;
        for (std::size_t k = 0; k < n && eq; ++k) eq = tokens[i + k].norm == p.tokens[k];
        if (!eq) continue;
        const Hit h{spans[si].begin + tokens[i].begin, spans[si].begin + tokens[i + n - 1].end, p.entry, si};
        // Patterns arrive longest first, so a contained match is a shorter
        // term inside one already taken.
        const bool covered = std::any_of(local.begin(), local.end(), [&](const Hit& o) {
          return o.begin <= h.begin && h.end <= o.end;
        });
        if (!covered) local.push_back(h);
      }
    }
    hits.insert(hits.end(), local.begin(), local.end());
  }
  std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.end > b.end;
  });

  Json concepts = Json::array();
  std::set<std::string> seen;
  for (const auto& h : hits) {
    const LexiconEntry& e = lexicon_->entries()[h.entry];
    if (!seen.insert(e.normalized).second) continue;
    const auto& sp = spans[h.sentence];
    const std::string_view sentence = std::string_view(report).substr(sp.begin, sp.end - sp.begin);
    concepts.push_back({{"text", e.term},
                        {"source_sentence", text::collapse_whitespace(sentence)},
                        {"polarity", detect_polarity(*lexicon_, sentence, h.begin - sp.begin, h.end - sp.begin, &e)}});
  }
  return {{"concepts", std::move(concepts)}};
}

Json StubEngine::categorize(const Json& input) const {
  const Json& categories = input_field(input, "protocol", "categorize").value("categories", Json::array());
  if (categories.empty()) throw Error(ErrorCode::kStubUnsupported, "categorize input has no categories");
  Json out = Json::array();
  for (const auto& item : input_field(input, "items", "categorize")) {
    const std::string text_value = item.value("text", "");
    const std::string normalized = item.value("normalized", text::normalize_concept(text_value));
    std::string key;
    std::string rationale;
    if (const auto* e = lexicon_->match(normalized); e != nullptr && category_in(categories, e->category_key)) {
      key = e->category_key;
      rationale = "lexicon term '" + e->term + "'";
    } else if (const auto* byl = lexicon_->find_by_label(item.value("primary_label", ""));
               byl != nullptr && category_in(categories, byl->category_key)) {
      key = byl->category_key;
      rationale = "ontology label '" + item.value("primary_label", "") + "'";
    } else {
      key = category_by_scope(categories, normalized + " " + text::normalize_concept(item.value("primary_label", "")));
      rationale = "closest category scope";
    }
    out.push_back({{"index", item.value("index", static_cast<int>(out.size()))},
                   {"category", key},
                   {"rationale", rationale}});
  }
  return {{"categorized", std::move(out)}};
}

Json StubEngine::filter(const Json& input) const {
  const auto& roots = lexicon_->finding_roots();
  Json out = Json::array();
  for (const auto& item : input_field(input, "items", "filter")) {
    const Json& hits = item.value("hits", Json::array());
    const std::string concept_text = item.value("concept", "");
    Json result = {{"index", item.value("index", static_cast<int>(out.size()))},
                   {"primary", nullptr},
                   {"secondary", Json::array()}};
    if (hits.empty()) {
      result["rationale"] = "no mappings";
      out.push_back(std::move(result));
      continue;
    }
    auto span_len = [](const Json& h) {
      const Json& m = h.value("match", Json::array({0, 0}));
      return m.size() == 2 ? m[1].get<std::int64_t>() - m[0].get<std::int64_t>() : 0;
    };
    // Longest span, then smallest class id.
    auto better = [&](const Json& a, const Json& b) {
      const auto la = span_len(a), lb = span_len(b);
      if (la != lb) return la > lb;
      return a.value("class_id", "") < b.value("class_id", "");
    };
    auto pick = [&](auto pred) -> const Json* {
      const Json* best = nullptr;
      for (const auto& h : hits) {
        if (pred(h) && (best == nullptr || better(h, *best))) best = &h;
      }
      return best;
    };

    const auto* entry = lexicon_->match(text::normalize_concept(concept_text));
    const std::string want_label = entry ? text::normalize_concept(entry->primary_ontology_label) : "";
    const Json* primary = nullptr;
    std::string why;
    if (!want_label.empty()) {
      primary = pick([&](const Json& h) { return text::normalize_concept(h.value("preferred_label", "")) == want_label; });
      why = "lexicon label";
    }
    if (primary == nullptr) {
      primary = pick([&](const Json& h) {
        for (const auto& a : h.value("ancestors", Json::array())) {
          if (std::find(roots.begin(), roots.end(), a.value("class_id", "")) != roots.end()) return true;
        }
        return false;
      });
      why = "finding ancestor";
    }
    if (primary == nullptr) {
      primary = pick([](const Json&) { return true; });
      why = "longest match";
    }
    result["primary"] = primary->value("class_id", "");
    for (const auto& h : hits) {
      if (&h != primary) result["secondary"].push_back(h.value("class_id", ""));
    }
    result["rationale"] = why;
    out.push_back(std::move(result));
  }
  return {{"items", std::move(out)}};
}

Json StubEngine::generate_report(const Json& input) const {
  const Json& categories = input_field(input, "protocol", "generate").value("categories", Json::array());
  const Json& concepts = input_field(input, "concepts", "generate");
  Json sections = Json::array();
  for (const auto& cat : categories) {
    const std::string key = cat.value("key", "");
    Json findings = Json::array();
    for (const auto& c : concepts) {
      if (c.value("category", "") != key) continue;
      const std::string term = c.value("text", "");
      const std::string pol = c.value("polarity", "present");
      std::string sentence = pol == "absent" ? "No " + term : pol == "uncertain" ? "Possible " + term : capitalize(term);
      Json sources = Json::array();
      if (!c.value("source_sentence", "").empty()) sources.push_back(c["source_sentence"]);
      findings.push_back({{"text", sentence + "."}, {"concepts", Json::array({term})}, {"source_sentences", sources}});
    }
    sections.push_back({{"key", key}, {"findings", std::move(findings)}});
  }
  return {{"sections", std::move(sections)}};
}

// The canonical tool order, recomputed from the history on every call:
//   [get_concept] [check_cache] map_ontology filter_ontology
//   categorize_concepts [generate_report]
// A warm cache with no misses skips straight to the output.
Json StubEngine::plan(const Json& input) const {
  const std::string task = input_field(input, "task", "plan").get<std::string>();
  const Json& options = input.value("options", Json::object());
  const bool cache = options.value("cache_enabled", false);
  const bool from_report = task.rfind("report_to_", 0) == 0;
  const bool to_report = task.size() >= 10 && task.compare(task.size() - 10, 10, "_to_report") == 0;

  std::map<std::string, std::string> step_of;  // tool -> step index of its last success
  std::map<std::string, Json> summary_of;
  for (const auto& h : input.value("history", Json::array())) {
    if (!h.value("ok", false)) continue;
    const std::string tool = h.value("tool", "");
    step_of[tool] = std::to_string(h.value("step", 0));
    summary_of[tool] = h.value("summary", Json::object());
  }
  auto done = [&](const char* tool) { return step_of.count(tool) > 0; };
  auto call = [](const char* tool, Json params, const char* why) {
    return Json{{"action", "call"}, {"tool", tool}, {"params", std::move(params)}, {"rationale", why}};
  };
  auto final_output = [](Json output, const char* why) {
    return Json{{"action", "final"}, {"output", std::move(output)}, {"rationale", why}};
  };

  if (from_report && !done("get_concept")) {
    return call("get_concept", {{"report_text", ref("input", "/report_text")}}, "extract concepts from the report");
  }
  const Json concepts = from_report ? ref(step_of["get_concept"], "/concepts") : ref("input", "/concepts");
  if (cache && !done("check_cache")) {
    return call("check_cache", {{"concepts", concepts}}, "reuse cached categorizations");
  }

  Json categorized;
  if (cache && summary_of["check_cache"].value("misses", 1) == 0) {
    categorized = ref(step_of["check_cache"], "/hits");
  } else {
    const Json pending = cache ? ref(step_of["check_cache"], "/misses") : concepts;
    if (!done("map_ontology")) return call("map_ontology", {{"concepts", pending}}, "map concepts to ontologies");
    if (!done("filter_ontology")) {
      return call("filter_ontology", {{"mappings", ref(step_of["map_ontology"], "/mappings")}},
                  "separate primary from secondary mappings");
    }
    if (!done("categorize_concepts")) {
      return call("categorize_concepts",
                  {{"items", ref(step_of["filter_ontology"], "/filtered")}, {"cache_results", cache}},
                  "assign protocol categories");
    }
    categorized = ref(step_of["categorize_concepts"], "/categorized");
    if (cache) {
      categorized = {{"$concat", Json::array({ref(step_of["check_cache"], "/hits"), categorized})}};
    }
  }
  if (to_report) {
    if (!done("generate_report")) {
      return call("generate_report", {{"categorized", categorized}}, "render the structured report");
    }
    return final_output(ref(step_of["generate_report"], "/report"), "report generated");
  }
  return final_output(categorized, "concepts categorized");
}

Json StubEngine::observe(const Json& input) const {
  const Json& history = input_field(input, "history", "observe");
  if (history.empty()) return {{"verdict", "continue"}, {"justification", "nothing executed yet"}};
  const Json& last = history.back();
  if (!last.value("ok", false)) return {{"verdict", "continue"}, {"justification", "last call failed"}};
  const Json next = plan(input);
  const std::string last_step = std::to_string(last.value("step", 0));
  if (next["action"] == "final" && next["output"].is_object() && next["output"].contains("$ref")) {
    const std::string target = next["output"]["$ref"].get<std::string>();
    if (target == last_step + "#/report" || target == last_step + "#/categorized") {
      return {{"verdict", "terminate"}, {"justification", "last result is the requested output"}};
    }
  }
  return {{"verdict", "continue"}, {"justification", "pipeline incomplete"}};
}

}  // namespace paostruct::llm
