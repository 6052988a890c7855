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

#include <random>

#include "paostruct/text.hpp"

using namespace paostruct::text;

TEST_CASE("normalize_concept lowercases, strips punctuation and lemmatizes") {
  CHECK(normalize_concept("Pleural Effusions.") == "pleural effusion");
  CHECK(normalize_concept("  Rib   fractures ") == "rib fracture");
  CHECK(normalize_concept("opacities") == "opacity");
  CHECK(normalize_concept("right-sided effusion") == "right-sided effusion");
  CHECK(normalize_concept("- effusion -") == "effusion");
  CHECK(normalize_concept("atelectasis") == "atelectasis");
  CHECK(normalize_concept("") == "");
}

TEST_CASE("lemmatize_token protects endings and is stable") {
  CHECK(lemmatize_token("glass") == "glass");
  CHECK(lemmatize_token("bronchus") == "bronchus");
  CHECK(lemmatize_token("stenosis") == "stenosis");
  CHECK(lemmatize_token("boxes") == "box");
  CHECK(lemmatize_token("nodules") == "nodule");
  for (const char* t : {"opacities", "nodules", "masses", "lines", "ribs"}) {
    CHECK(lemmatize_token(lemmatize_token(t)) == lemmatize_token(t));
  }
}

TEST_CASE("normalize_concept is idempotent on random input") {
  std::mt19937 rng(3);
  const std::string alphabet = "abcsyiEe -.,;'()-";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    for (int n = std::uniform_int_distribution<int>(0, 20)(rng); n > 0; --n) {
      s += alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
    }
    const std::string once = normalize_concept(s);
    CHECK_MESSAGE(normalize_concept(once) == once, "input: '" << s << "'");
  }
}

TEST_CASE("normalize_for_matching keeps lexical variants apart") {
  CHECK(normalize_for_matching("  Pleural\tEffusion ") == "pleural effusion");
  CHECK(normalize_for_matching("opacities") != normalize_for_matching("opacity"));
}

TEST_CASE("sentence splitting respects abbreviations and line breaks") {
  const auto s = split_sentences("Dr. Smith reviewed the film. No effusion.\nStable\nheart size. e.g. nothing else");
  REQUIRE(s.size() == 3);
  CHECK(s[0] == "Dr. Smith reviewed the film.");
  CHECK(s[1] == "No effusion.");
  CHECK(s[2] == "Stable heart size. e.g. nothing else");
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("   \n ").empty());
}

TEST_CASE("sentence spans index into the source") {
  const std::string text = "  First one. Second one.  ";
  const auto spans = sentence_spans(text);
  REQUIRE(spans.size() == 2);
  CHECK(text.substr(spans[0].begin, spans[0].end - spans[0].begin) == "First one.");
  CHECK(text.substr(spans[1].begin, spans[1].end - spans[1].begin) == "Second one.");
}

TEST_CASE("levenshtein over code points") {
  CHECK(levenshtein(utf8_decode("opacity"), utf8_decode("opacities")) == 3);
  CHECK(levenshtein(utf8_decode(""), utf8_decode("abc")) == 3);
  CHECK(levenshtein(utf8_decode("kitten"), utf8_decode("sitting")) == 3);
  CHECK(levenshtein(utf8_decode("caf\xc3\xa9"), utf8_decode("cafe")) == 1);
  CHECK(utf8_decode("\xff").size() == 1);
}

TEST_CASE("find_term matches whole words with plural tolerance") {
  CHECK(find_term("small pleural effusions noted", "pleural effusion") == 6);
  CHECK(find_term("effusion", "effusion") == 0);
  CHECK(find_term("noneffusion", "effusion") == std::string_view::npos);
  CHECK(find_term("effusionx", "effusion") == std::string_view::npos);
  CHECK(find_term("a b a", "a", 1) == 4);
}

TEST_CASE("contains_normalized ignores whitespace differences") {
  CHECK(contains_normalized("No   pleural\neffusion.", "pleural effusion"));
  CHECK_FALSE(contains_normalized("No effusion.", "pleural effusion"));
}
