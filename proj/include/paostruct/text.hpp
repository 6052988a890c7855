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

// Text primitives used throughout the pipeline: concept normalization with
// a rule-based lemmatizer, sentence segmentation for source grounding, and
// the edit distance behind fuzzy evaluation.

#ifndef PAOSTRUCT_TEXT_HPP_
#define PAOSTRUCT_TEXT_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace paostruct::text {

// ASCII lowercase; bytes >= 0x80 pass through untouched.
std::string to_lower(std::string_view s);

// Trim and collapse every run of ASCII whitespace into a single space.
std::string collapse_whitespace(std::string_view s);

// Lemmatize a single lowercase token: exception dictionary first, then the
// suffix rules (-ies -> -y, -sses/-xes/-ches/-shes -> drop "es", -s -> drop)
// with protected endings (-ss, -us, -is). Stable: lemma(lemma(t)) == lemma(t).
std::string lemmatize_token(std::string_view token);

// Lowercase, strip punctuation except hyphens between word characters,
// collapse whitespace, lemmatize each token. Idempotent.
std::string normalize_concept(std::string_view text);

// Evaluation-side normalization: lowercase + collapsed whitespace only.
// Lemmatization is deliberately absent so lexical variants still differ.
std::string normalize_for_matching(std::string_view text);

struct SentenceSpan {
  std::size_t begin = 0;  // byte offset into the source text
  std::size_t end = 0;    // one past the last byte
};

// Sentence boundaries: '.', '!' or '?' followed by whitespace and an
// uppercase letter (or end of text), unless the token ending in '.' is a
// known abbreviation. Line breaks alone never split. Spans are trimmed.
std::vector<SentenceSpan> sentence_spans(std::string_view text);

// Sentences as whitespace-collapsed strings, in order.
std::vector<std::string> split_sentences(std::string_view text);

// True when collapse_whitespace(needle) occurs in collapse_whitespace(hay).
bool contains_normalized(std::string_view haystack, std::string_view needle);

// UTF-8 to code points; invalid bytes decode as U+FFFD one byte at a time.
std::u32string utf8_decode(std::string_view s);

// Unit-cost insert/delete/substitute distance over code points.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

// Case-insensitive search for a term with word boundaries on the left and
// on the right, where a trailing plural "s"/"es" is tolerated. Returns
// std::string_view::npos when absent.
std::size_t find_term(std::string_view haystack_lower, std::string_view term_lower,
                      std::size_t from = 0);

}  // namespace paostruct::text

#endif  // PAOSTRUCT_TEXT_HPP_
