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

#include "paostruct/text.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

namespace paostruct::text {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

// Non-ASCII bytes count as word characters so UTF-8 sequences are never split.
bool is_word(char c) {
  return is_ascii_alnum(c) || static_cast<unsigned char>(c) >= 0x80;
}

bool is_alpha_lower(char c) { return c >= 'a' && c <= 'z'; }

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Irregular plurals and words that merely look plural. Every value is also
// present as an identity key, which keeps lemmatization at a fixed point.
const std::unordered_map<std::string_view, std::string_view>& exceptions() {
  static const auto* table = [] {
    auto* m = new std::unordered_map<std::string_view, std::string_view>{
        {"pneumothoraces", "pneumothorax"},
        {"hemothoraces", "hemothorax"},
        {"hydropneumothoraces", "hydropneumothorax"},
        {"thoraces", "thorax"},
        {"apices", "apex"},
        {"vertices", "vertex"},
        {"cortices", "cortex"},
        {"vertebrae", "vertebra"},
        {"bullae", "bulla"},
        {"bronchi", "bronchus"},
        {"emboli", "embolus"},
        {"calculi", "calculus"},
        {"metastases", "metastasis"},
        {"diagnoses", "diagnosis"},
        {"stenoses", "stenosis"},
        {"axes", "axis"},
        {"mediastina", "mediastinum"},
        {"diverticula", "diverticulum"},
        {"hila", "hilum"},
        {"sinuses", "sinus"},
        {"atelectases", "atelectasis"},
        {"atelectasis", "atelectasis"},
        {"pancreas", "pancreas"},
        {"gas", "gas"},
        {"series", "series"},
        {"species", "species"},
        {"lymphangitis", "lymphangitis"},
        {"diabetes", "diabetes"},
        {"herpes", "herpes"},
    };
    std::vector<std::string_view> values;
    for (const auto& [k, v] : *m) values.push_back(v);
    for (auto v : values) m->emplace(v, v);
    return m;
  }();
  return *table;
}

std::string lemmatize_once(std::string_view t) {
  if (auto it = exceptions().find(t); it != exceptions().end()) {
    return std::string(it->second);
  }
  if (t.empty() || !is_alpha_lower(t.back())) return std::string(t);
  if (ends_with(t, "ss") || ends_with(t, "us") || ends_with(t, "is")) {
    return std::string(t);
  }
  const std::size_t n = t.size();
  if (n > 4 && ends_with(t, "ies")) {
    return std::string(t.substr(0, n - 3)) + "y";
  }
  if (n > 4 && (ends_with(t, "sses") || ends_with(t, "xes") || ends_with(t, "ches") ||
                ends_with(t, "shes") || ends_with(t, "zzes"))) {
    return std::string(t.substr(0, n - 2));
  }
  if (n > 3 && t.back() == 's') {
    return std::string(t.substr(0, n - 1));
  }
  return std::string(t);
}

const std::unordered_set<std::string_view>& abbreviations() {
  static const std::unordered_set<std::string_view> set = {
      "dr.", "vs.", "approx.", "e.g.", "i.e.", "mr.", "mrs.", "ms.", "no.",
      "st.", "fig.", "etc.", "cf.", "resp.", "incl.", "pt.",
  };
  return set;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string lemmatize_token(std::string_view token) {
  std::string current(token);
  // Every rule either shortens the token or lands on an exception fixed point.
  for (;;) {
    std::string next = lemmatize_once(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

namespace {

// Only the head after the last hyphen inflects ("x-rays" -> "x-ray"); a
// segment never lemmatizes to nothing, so hyphens always stay interior.
std::string lemmatize_compound(std::string_view token) {
  const std::size_t dash = token.rfind('-');
  const std::string_view head = dash == std::string_view::npos ? token : token.substr(dash + 1);
  std::string lemma = lemmatize_token(head);
  if (lemma.empty()) lemma = std::string(head);
  return std::string(token.substr(0, token.size() - head.size())) + lemma;
}

}  // namespace

std::string normalize_concept(std::string_view text) {
  const std::string lower = to_lower(text);
  std::string cleaned;
  cleaned.reserve(lower.size());
  for (std::size_t i = 0; i < lower.size(); ++i) {
    const char c = lower[i];
    if (is_word(c)) {
      cleaned.push_back(c);
    } else if (c == '\'') {
      // possessives fold into the word: "patient's" -> "patients"
    } else if (c == '-' && !cleaned.empty() && is_word(cleaned.back()) &&
               i + 1 < lower.size() && is_word(lower[i + 1])) {
      cleaned.push_back('-');
    } else {
      cleaned.push_back(' ');
    }
  }

  std::string out;
  std::size_t i = 0;
  while (i < cleaned.size()) {
    while (i < cleaned.size() && cleaned[i] == ' ') ++i;
    std::size_t j = i;
    while (j < cleaned.size() && cleaned[j] != ' ') ++j;
    if (j > i) {
      if (!out.empty()) out.push_back(' ');
      out += lemmatize_compound(std::string_view(cleaned).substr(i, j - i));
    }
    i = j;
  }
  return out;
}

std::string normalize_for_matching(std::string_view text) {
  return collapse_whitespace(to_lower(text));
}

std::vector<SentenceSpan> sentence_spans(std::string_view text) {
  std::vector<SentenceSpan> spans;
  const std::size_t n = text.size();

  auto emit = [&](std::size_t b, std::size_t e) {
    while (b < e && is_space(text[b])) ++b;
    while (e > b && is_space(text[e - 1])) --e;
    if (e > b) spans.push_back({b, e});
  };

  std::size_t start = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    if (i + 1 < n && !is_space(text[i + 1])) continue;

    std::size_t j = i + 1;
    while (j < n && is_space(text[j])) ++j;
    if (j < n && !(text[j] >= 'A' && text[j] <= 'Z')) continue;

    if (c == '.') {
      std::size_t w = i;
      while (w > start && !is_space(text[w - 1])) --w;
      const std::string token = to_lower(text.substr(w, i + 1 - w));
      if (abbreviations().count(token) != 0) continue;
    }
    emit(start, i + 1);
    start = i + 1;
  }
  emit(start, n);
  return spans;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& span : sentence_spans(text)) {
    out.push_back(collapse_whitespace(text.substr(span.begin, span.end - span.begin)));
  }
  return out;
}

bool contains_normalized(std::string_view haystack, std::string_view needle) {
  const std::string n = collapse_whitespace(needle);
  if (n.empty()) return false;
  return collapse_whitespace(haystack).find(n) != std::string::npos;
}

std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool valid = len > 0 && i + static_cast<std::size_t>(len) <= s.size();
    for (int k = 1; valid && k < len; ++k) {
      const auto bk = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((bk & 0xC0) != 0x80) {
        valid = false;
      } else {
        cp = (cp << 6) | (bk & 0x3F);
      }
    }
    if (!valid) {
      out.push_back(U'\uFFFD');
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(len);
  }
  return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t find_term(std::string_view hay, std::string_view term, std::size_t from) {
  if (term.empty()) return std::string_view::npos;
  auto boundary_at = [&](std::size_t pos) { return pos >= hay.size() || !is_word(hay[pos]); };
  for (std::size_t pos = hay.find(term, from); pos != std::string_view::npos;
       pos = hay.find(term, pos + 1)) {
    if (pos > 0 && is_word(hay[pos - 1])) continue;
    const std::size_t e = pos + term.size();
    if (boundary_at(e)) return pos;
    if (hay[e] == 's' && boundary_at(e + 1)) return pos;
    if (hay.substr(e, 2) == "es" && boundary_at(e + 2)) return pos;
  }
  return std::string_view::npos;
}

}  // namespace paostruct::text
