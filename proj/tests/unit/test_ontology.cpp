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
#include <httplib.h>

#include <atomic>
#include <thread>

#include "helpers.hpp"
#include "paostruct/error.hpp"
#include "paostruct/io.hpp"
#include "paostruct/ontology.hpp"

using namespace paostruct;
using namespace paostruct::ontology;

namespace {

std::shared_ptr<FixtureBackend> fixture() {
  static auto f = FixtureBackend::load(testing::kData / "ontology" / "fixture.json");
  return f;
}

// Counts calls and blocks each one until released.
class GateBackend : public AnnotatorBackend {
 public:
  std::vector<AnnotatorHit> annotate(const std::string& query, const std::vector<std::string>& ontologies) override {
    ++calls;
    while (!open) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    return fixture()->annotate(query, ontologies);
  }
  std::vector<AncestorRef> ancestors(const std::string& id) override { return fixture()->ancestors(id); }
  std::string name() const override { return "gate"; }

  std::atomic<int> calls{0};
  std::atomic<bool> open{false};
};

}  // namespace

TEST_CASE("fixture backend matches terms at word boundaries") {
  const auto f = fixture();
  const std::string q = "deviated trachea";
  const auto hits = f->annotate(q, kSupportedOntologies);
  REQUIRE_FALSE(hits.empty());
  std::set<std::string> ids;
  for (const auto& h : hits) {
    CHECK(h.valid_for(q));
    ids.insert(h.class_id);
    CHECK(q.substr(h.match_begin, h.match_end - h.match_begin).size() > 0);
  }
  CHECK(ids.count("SNOMEDCT:301229001") == 1);
  CHECK(ids.count("RADLEX:RID1243") == 1);

  for (const auto& h : f->annotate(q, {"RADLEX"})) CHECK(h.ontology == "RADLEX");
  CHECK(f->annotate("extracheal", kSupportedOntologies).empty());
  CHECK(f->annotate("", kSupportedOntologies).empty());
}

TEST_CASE("fixture ancestors run from parent to root") {
  const auto chain = fixture()->ancestors("RADLEX:RID5");
  REQUIRE(chain.size() == 1);
  CHECK(chain[0] == AncestorRef{"RADLEX:RID1", "RadLex entity"});
  CHECK(fixture()->ancestors("RADLEX:RID1").empty());
  CHECK_THROWS_WITH_AS(fixture()->ancestors("NOPE:1"), doctest::Contains("NOT_FOUND"), Error);
}

TEST_CASE("fixture loading rejects broken class tables") {
  const Json dangling = {{"classes", {{"X:1", {{"label", "a"}, {"ontology", "X"}, {"parent", "X:9"}}}}},
                         {"terms", Json::object()}};
  CHECK_THROWS_WITH_AS(FixtureBackend::from_json(dangling), doctest::Contains("X:9"), Error);
  const Json cycle = {{"classes",
                       {{"X:1", {{"label", "a"}, {"ontology", "X"}, {"parent", "X:2"}}},
                        {"X:2", {{"label", "b"}, {"ontology", "X"}, {"parent", "X:1"}}}}},
                      {"terms", Json::object()}};
  CHECK_THROWS_WITH_AS(FixtureBackend::from_json(cycle), doctest::Contains("CONFIG_ERROR"), Error);
  const Json unknown_term = {{"classes", Json::object()}, {"terms", {{"a", {"X:1"}}}}};
  CHECK_THROWS_AS(FixtureBackend::from_json(unknown_term), Error);
  CHECK_THROWS_AS(FixtureBackend::load(testing::kData / "missing.json"), Error);
}

TEST_CASE("hit validity") {
  AnnotatorHit h{"X", "X:1", "a", 0, 3, {{"X:2", "b"}}};
  CHECK(h.valid_for("abc"));
  CHECK_FALSE(h.valid_for("ab"));
  h.ancestors.push_back({"X:1", "a"});
  CHECK_FALSE(h.valid_for("abc"));
  AnnotatorHit back = AnnotatorHit::from_json(AnnotatorHit{"X", "X:1", "a", 1, 2, {}}.to_json());
  CHECK(back.match_begin == 1);
  CHECK_THROWS_AS(AnnotatorHit::from_json(Json{{"ontology", "X"}}), Error);
}

TEST_CASE("client caches by normalized text and ontology set") {
  auto backend = std::make_shared<GateBackend>();
  backend->open = true;
  OntologyClient client(backend);
  const auto a = client.annotate("Deviated  Trachea");
  const auto b = client.annotate("deviated trachea");
  CHECK(a == b);
  CHECK(client.stats().backend_calls == 1);
  CHECK(client.stats().cache_hits == 1);
  client.annotate("deviated trachea", {"RADLEX"});
  CHECK(client.stats().backend_calls == 2);
  CHECK_THROWS_WITH_AS(client.annotate("x", {"MESH"}), doctest::Contains("INVALID_ARGUMENT"), Error);
}

TEST_CASE("concurrent misses share one backend call") {
  auto backend = std::make_shared<GateBackend>();
  OntologyClient client(backend);
  std::vector<std::future<std::vector<AnnotatorHit>>> futures;
  for (int i = 0; i < 8; ++i) {
    futures.push_back(std::async(std::launch::async, [&] { return client.annotate("trachea"); }));
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  backend->open = true;
  std::vector<std::vector<AnnotatorHit>> results;
  for (auto& f : futures) results.push_back(f.get());
  CHECK(backend->calls == 1);
  for (const auto& r : results) CHECK(r == results.front());
  CHECK(client.stats().backend_calls == 1);
}

TEST_CASE("client cache persists across instances") {
  testing::TempDir dir;
  const auto path = dir.path / "onto.json";
  auto backend = std::make_shared<GateBackend>();
  backend->open = true;
  {
    OntologyClient c(backend, kSupportedOntologies, path);
    c.annotate("trachea");
  }
  REQUIRE(std::filesystem::exists(path));
  OntologyClient again(backend, kSupportedOntologies, path);
  again.annotate("trachea");
  CHECK(again.stats().backend_calls == 0);
  CHECK(backend->calls == 1);

  io::write_file_atomic(path, "{not json");
  CHECK_THROWS_AS(OntologyClient(backend, kSupportedOntologies, path), Error);
}

TEST_CASE("remote annotator responses are translated") {
  const std::string q = "small pleural effusion";
  const Json body = Json::parse(R"([
    {"annotatedClass": {"@id": "http://purl.bioontology.org/ontology/SNOMEDCT/60046008",
                        "prefLabel": "Pleural effusion",
                        "links": {"ontology": "https://data.bioontology.org/ontologies/SNOMEDCT"}},
     "hierarchy": [
       {"annotatedClass": {"@id": "http://purl.bioontology.org/ontology/SNOMEDCT/404684003", "prefLabel": "Clinical finding"}, "distance": 2},
       {"annotatedClass": {"@id": "http://purl.bioontology.org/ontology/SNOMEDCT/301226008", "prefLabel": "Finding of pleura"}, "distance": 1}],
     "annotations": [{"from": 7, "to": 22}, {"from": 7, "to": 22}, {"from": 40, "to": 50}]},
    {"annotatedClass": {}}
  ])");
  const auto hits = RemoteBackend::translate_response(body, q);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].class_id == "SNOMEDCT:60046008");
  CHECK(hits[0].ontology == "SNOMEDCT");
  CHECK(q.substr(hits[0].match_begin, hits[0].match_end - hits[0].match_begin) == "pleural effusion");
  REQUIRE(hits[0].ancestors.size() == 2);
  CHECK(hits[0].ancestors[0].label == "Finding of pleura");
  CHECK(hits[0].valid_for(q));
  CHECK_THROWS_AS(RemoteBackend::translate_response(Json::object(), q), Error);
}

TEST_CASE("remote annotator sends the api key and retries") {
  httplib::Server server;
  std::atomic<int> calls{0};
  std::string auth, ontologies;
  server.Get("/annotator", [&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    ontologies = req.get_param_value("ontologies");
    if (++calls == 1) {
      res.status = 502;
      return;
    }
    res.set_content("[]", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.api_key_env = "PAOSTRUCT_UNIT_ONTO_KEY";
  cfg.initial_backoff = std::chrono::milliseconds(1);
  RemoteBackend backend(cfg);
  ::unsetenv("PAOSTRUCT_UNIT_ONTO_KEY");
  CHECK_THROWS_WITH_AS(backend.annotate("x", kSupportedOntologies), doctest::Contains("ANNOTATOR_UNAVAILABLE"),
                       Error);
  ::setenv("PAOSTRUCT_UNIT_ONTO_KEY", "k1", 1);
  CHECK(backend.annotate("x", kSupportedOntologies).empty());
  ::unsetenv("PAOSTRUCT_UNIT_ONTO_KEY");
  CHECK(calls == 2);
  CHECK(auth == "apikey token=k1");
  CHECK(ontologies == "SNOMEDCT,RADLEX");
  CHECK_THROWS_AS(backend.ancestors("SNOMEDCT:1"), Error);
  server.stop();
  t.join();
}
