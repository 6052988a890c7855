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
#include "paostruct/config.hpp"
#include "paostruct/io.hpp"

using namespace paostruct;
using paostruct::config::RunConfig;

TEST_CASE("defaults validate and point at the bundled data") {
  const auto cfg = RunConfig::defaults();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.engine.stub);
  CHECK(std::filesystem::exists(cfg.engine.lexicon));
  CHECK(std::filesystem::is_directory(cfg.engine.templates));
  CHECK(cfg.ontology.mode == "fixture");
  CHECK(cfg.eval.thresholds == std::vector<double>{80.0, 90.0});
  CHECK(cfg.max_iterations == 12);
}

TEST_CASE("file values override defaults and resolve relative paths") {
  testing::TempDir dir;
  auto cfg = RunConfig::defaults();
  cfg.merge_json(Json::parse(R"({"cache": {"path": "c.jsonl", "enabled": true},
                                 "eval": {"thresholds": [70, 95]},
                                 "server": {"tools": {"check_cache": false}},
                                 "max_iterations": 5})"),
                 dir.path);
  CHECK(cfg.cache.path == dir.path / "c.jsonl");
  CHECK(cfg.cache.enabled);
  CHECK(cfg.eval.thresholds == std::vector<double>{70.0, 95.0});
  CHECK(cfg.server.tools.at("check_cache") == false);
  CHECK(cfg.max_iterations == 5);
  CHECK_NOTHROW(cfg.validate());

  io::write_file_atomic(dir.path / "cfg.json", R"({"protocol": "p.json"})");
  auto from_file = RunConfig::defaults();
  from_file.merge_file(dir.path / "cfg.json");
  CHECK(from_file.protocol == dir.path / "p.json");
}

TEST_CASE("environment overrides the file") {
  auto cfg = RunConfig::defaults();
  cfg.merge_json(Json::parse(R"({"max_iterations": 5, "cache": {"enabled": false}})"), ".");
  cfg.merge_env({{"PAOSTRUCT_MAX_ITERATIONS", "9"},
                 {"PAOSTRUCT_CACHE_ENABLED", "true"},
                 {"PAOSTRUCT_EVAL_THRESHOLDS", "85,100"},
                 {"PAOSTRUCT_SERVER_PORT", "7001"},
                 {"PAOSTRUCT_SOMETHING_ELSE", "ignored"}});
  CHECK(cfg.max_iterations == 9);
  CHECK(cfg.cache.enabled);
  CHECK(cfg.eval.thresholds == std::vector<double>{85.0, 100.0});
  CHECK(cfg.server.port == 7001);

  CHECK_THROWS_WITH_AS(cfg.merge_env({{"PAOSTRUCT_MAX_ITERATIONS", "lots"}}), doctest::Contains("CONFIG_ERROR"),
                       Error);
  CHECK_THROWS_AS(cfg.merge_env({{"PAOSTRUCT_CACHE_ENABLED", "perhaps"}}), Error);
  CHECK_THROWS_AS(cfg.merge_env({{"PAOSTRUCT_SERVER_PORT", "70000"}}), Error);
  CHECK_THROWS_AS(cfg.merge_env({{"PAOSTRUCT_ENGINE_MODE", "oracle"}}), Error);
}

TEST_CASE("strict keys and validation name the offending field") {
  auto cfg = RunConfig::defaults();
  CHECK_THROWS_WITH_AS(cfg.merge_json(Json::parse(R"({"engin": {}})"), "."), doctest::Contains("engin"), Error);
  CHECK_THROWS_WITH_AS(cfg.merge_json(Json::parse(R"({"cache": {"size": 3}})"), "."), doctest::Contains("size"),
                       Error);
  CHECK_THROWS_AS(cfg.merge_json(Json::parse(R"({"max_iterations": "x"})"), "."), Error);

  auto bad = RunConfig::defaults();
  bad.eval.thresholds = {0.0};
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("eval.thresholds"), Error);
  bad = RunConfig::defaults();
  bad.server.tools["teleport"] = true;
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("teleport"), Error);
  bad = RunConfig::defaults();
  bad.ontology.ontologies = {"MESH"};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = RunConfig::defaults();
  bad.engine.lexicon = "/nonexistent/lexicon.json";
  CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("engine.lexicon"), Error);
  CHECK_THROWS_AS(RunConfig::defaults().merge_file("/nonexistent/cfg.json"), Error);
}

TEST_CASE("runtime honours per-tool switches") {
  auto cfg = RunConfig::defaults();
  cfg.server.tools[tools::kCheckCache] = false;
  const auto rt = config::build_runtime(cfg, std::make_shared<agent::StepClock>());
  for (const auto& d : rt.client->list_tools()) CHECK(d.name != tools::kCheckCache);
  CHECK(rt.client->list_tools().size() == tools::tool_names().size() - 1);
  CHECK(rt.task_options().max_iterations == cfg.max_iterations);
}
