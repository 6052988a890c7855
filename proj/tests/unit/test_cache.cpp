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

#include <thread>

#include "helpers.hpp"
#include "paostruct/cache.hpp"
#include "paostruct/error.hpp"
#include "paostruct/io.hpp"

using namespace paostruct;
using paostruct::cache::ConceptCache;

TEST_CASE("cache lookups normalize and count hits") {
  ConceptCache c;
  CHECK_FALSE(c.check("effusion"));
  c.put("Pleural  Effusions", "C", "Pleural effusion");
  auto e = c.check("pleural effusion");
  REQUIRE(e);
  CHECK(e->original == "Pleural Effusions");
  CHECK(e->hit_count == 1);
  CHECK(c.check("PLEURAL EFFUSION")->hit_count == 2);
  CHECK(c.peek("pleural effusion")->hit_count == 2);
  c.put("pleural effusion", "B", "x");
  CHECK(c.peek("pleural effusion")->category_key == "B");
  CHECK(c.peek("pleural effusion")->hit_count == 2);
  CHECK(c.stats().entries == 1);
  CHECK(c.stats().total_hits == 2);
  CHECK_THROWS_AS(c.put("  ", "C", ""), Error);
  CHECK_THROWS_AS(c.put("x", "", ""), Error);
  c.clear();
  CHECK(c.stats().entries == 0);
  CHECK(c.stats().total_hits == 0);
}

TEST_CASE("cache log survives a restart") {
  testing::TempDir dir;
  const auto path = dir.path / "sub" / "cache.jsonl";
  {
    ConceptCache c(path);
    c.put("cardiomegaly", "D", "Cardiomegaly", std::string("SNOMEDCT:8186001"));
    c.put("atelectasis", "B", "Atelectasis");
    c.check("cardiomegaly");
    c.check("cardiomegaly");
  }
  ConceptCache again(path);
  const auto entries = again.entries();
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].key == "atelectasis");
  CHECK(entries[1].hit_count == 2);
  CHECK(entries[1].primary_ontology_id == "SNOMEDCT:8186001");
  again.clear();
  CHECK(ConceptCache(path).stats().entries == 0);
}

TEST_CASE("damaged cache logs name the line") {
  testing::TempDir dir;
  const auto path = dir.path / "cache.jsonl";
  const std::string header = R"({"format":"paostruct-concept-cache","version":1})";
  const std::string put = R"({"op":"put","key":"a","text":"a","category":"A","label":"","id":null,"created_at":0})";

  io::write_file_atomic(path, header + "\n" + put + "\n{oops\n");
  CHECK_THROWS_WITH_AS(ConceptCache{path}, doctest::Contains("line 3"), Error);
  io::write_file_atomic(path, header + "\n" + put);
  CHECK_THROWS_WITH_AS(ConceptCache{path}, doctest::Contains("truncated"), Error);
  io::write_file_atomic(path, R"({"format":"paostruct-concept-cache","version":9})" "\n");
  CHECK_THROWS_WITH_AS(ConceptCache{path}, doctest::Contains("version"), Error);
  io::write_file_atomic(path, header + "\n" + R"({"op":"drop","key":"a"})" "\n");
  CHECK_THROWS_WITH_AS(ConceptCache{path}, doctest::Contains("CACHE_CORRUPT"), Error);
  io::write_file_atomic(path, "[]\n");
  CHECK_THROWS_WITH_AS(ConceptCache{path}, doctest::Contains("line 1"), Error);
}

TEST_CASE("concurrent readers see whole entries") {
  ConceptCache c;
  std::atomic<bool> stop{false};
  std::thread writer([&] {
    for (int i = 0; i < 2000; ++i) c.put("term " + std::to_string(i % 17), i % 2 ? "A" : "B", "label");
    stop = true;
  });
  std::int64_t seen = 0;
  while (!stop) {
    if (auto e = c.check("term 3")) {
      CHECK((e->category_key == "A" || e->category_key == "B"));
      ++seen;
    }
  }
  writer.join();
  CHECK(c.peek("term 3")->hit_count == seen);
}
