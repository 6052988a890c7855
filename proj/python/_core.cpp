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


// Python bindings. Structured values cross the boundary as JSON text and
// are decoded on the Python side.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "paostruct/config.hpp"
#include "paostruct/error.hpp"
#include "paostruct/eval.hpp"
#include "paostruct/protocol.hpp"
#include "paostruct/text.hpp"
#include "paostruct/tools.hpp"
#include "paostruct/version.hpp"

namespace py = pybind11;
using namespace paostruct;

namespace {

config::Runtime runtime_for(const std::optional<std::string>& config_path, std::optional<bool> cache,
                            const std::optional<std::string>& cache_path, bool step_clock) {
  std::optional<std::filesystem::path> file;
  if (config_path) file = *config_path;
  config::RunConfig cfg = config::resolve(file);
  if (cache) cfg.cache.enabled = *cache;
  if (cache_path) cfg.cache.path = *cache_path;
  cfg.validate();
  std::shared_ptr<agent::Clock> clock;
  if (step_clock) clock = std::make_shared<agent::StepClock>();
  return config::build_runtime(cfg, clock);
}

std::string structure(const std::string& task, const py::object& payload, const std::optional<std::string>& config_path,
                      std::optional<bool> cache, const std::optional<std::string>& cache_path, bool step_clock) {
  agent::TaskRequest req;
  req.kind = agent::task_kind_from_string(task);
  if (agent::consumes_report(req.kind)) {
    req.report_text = payload.cast<std::string>();
  } else {
    req.raw_concepts = payload.cast<std::vector<std::string>>();
  }
  py::gil_scoped_release release;
  config::Runtime rt = runtime_for(config_path, cache, cache_path, step_clock);
  req.options = rt.task_options();
  Json out;
  try {
    agent::TaskOutcome result = rt.agent->run_task(req);
    out = {{"status", "ok"}, {"output", result.output}, {"trace", result.trace.to_json()}};
    if (result.report) out["text"] = render_report_text(*result.report);
  } catch (const agent::TaskFailure& f) {
    out = {{"status", f.trace().status}, {"error", f.detail()}, {"trace", f.trace().to_json()}};
  }
  return dump_compact(out);
}

std::string evaluate(const std::string& gold_path, const std::vector<std::pair<std::string, std::string>>& models,
                     const std::vector<double>& thresholds, const std::string& granularity) {
  py::gil_scoped_release release;
  const auto cfg = config::RunConfig::defaults();
  const ProtocolSchema schema = ProtocolSchema::load(cfg.protocol);
  const auto gold = eval::load_gold(gold_path, schema);
  std::vector<eval::NamedPredictions> preds;
  for (const auto& [name, path] : models) preds.push_back({name, eval::load_predictions(path, schema)});
  const auto report = eval::evaluate(gold, preds, schema, thresholds.empty() ? cfg.eval.thresholds : thresholds,
                                     eval::granularity_from_string(granularity));
  return dump_compact(Json{{"metrics", report.to_json()}, {"text", report.render_text()}});
}

std::vector<std::string> validate_report(const std::string& document, const std::optional<std::string>& source_text) {
  const auto cfg = config::RunConfig::defaults();
  const ProtocolSchema schema = ProtocolSchema::load(cfg.protocol);
  const StructuredReport report = report_from_json(parse_json(document, "report"));
  std::vector<std::string> problems;
  for (const auto& v : validate_structured_report(report, schema).violations) problems.push_back(v.location + ": " + v.rule);
  if (source_text) {
    for (const auto& v : check_grounding(report, *source_text).violations) problems.push_back(v.location + ": " + v.rule);
  }
  return problems;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "paostruct native core";
  m.attr("__version__") = kVersion;

  static py::handle error_type = py::exception<Error>(m, "PaostructError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      exc.attr("detail") = e.detail();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("normalize_concept", [](const std::string& s) { return text::normalize_concept(s); });
  m.def("fuzzy_similarity", [](const std::string& a, const std::string& b) { return eval::fuzzy_similarity(a, b); });
  m.def(
      "align",
      [](const std::vector<std::string>& pred, const std::vector<std::string>& gold, double threshold) {
        std::vector<std::tuple<std::size_t, std::size_t, double>> out;
        for (const auto& p : eval::align_concepts(pred, gold, threshold).matched) {
          out.emplace_back(p.pred_index, p.gold_index, p.similarity);
        }
        return out;
      },
      py::arg("pred"), py::arg("gold"), py::arg("threshold"));
  m.def("mcnemar_p_value", &eval::mcnemar_p_value, py::arg("b"), py::arg("c"));
  m.def("tool_names", &tools::tool_names);
  m.def("structure_json", &structure, py::arg("task"), py::arg("payload"), py::arg("config_path") = py::none(),
        py::arg("cache") = py::none(), py::arg("cache_path") = py::none(), py::arg("step_clock") = false);
  m.def("evaluate_json", &evaluate, py::arg("gold_path"), py::arg("models"), py::arg("thresholds"),
        py::arg("granularity") = "concept");
  m.def("validate_report", &validate_report, py::arg("document"), py::arg("source_text") = py::none());
}
