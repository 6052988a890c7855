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

#include "paostruct/agent.hpp"

#include <algorithm>
#include <chrono>
#include <set>

#include "paostruct/text.hpp"

namespace paostruct::agent {

namespace {

constexpr std::pair<TaskKind, std::string_view> kKindNames[] = {
    {TaskKind::kReportToReport, "report_to_report"},
    {TaskKind::kReportToConcepts, "report_to_concepts"},
    {TaskKind::kConceptsToReport, "concepts_to_report"},
    {TaskKind::kConceptsToConcepts, "concepts_to_concepts"},
};

const mcp::ToolDescriptor* find_tool(const std::vector<mcp::ToolDescriptor>& catalog, const std::string& name) {
  for (const auto& d : catalog) {
    if (d.name == name) return &d;
  }
  return nullptr;
}

std::shared_ptr<const llm::Lexicon> default_cues() {
  static const auto lex = std::make_shared<const llm::Lexicon>(llm::Lexicon::from_json({
      {"cues",
       {{"negation_pre", {"no", "without", "absence of", "absent", "negative for", "no evidence of", "free of"}},
        {"uncertain_pre", {"possible", "probable", "likely", "suspected", "questionable", "suspicious for"}}}},
      {"terms", Json::array()},
  }));
  return lex;
}

Json plan_to_json(const TraceStep& s) {
  Json p = {{"action", s.plan.is_final ? "final" : "call"}};
  if (s.plan.is_final) {
    p["output"] = s.plan.output;
  } else {
    p["tool"] = s.plan.tool;
    p["params"] = s.plan.params;
  }
  p["rationale"] = s.plan.rationale;
  p["reasoning"] = s.plan_reasoning;
  p["duration_ms"] = s.plan_ms;
  return p;
}

}  // namespace

std::string_view to_string(TaskKind k) {
  for (const auto& [kind, name] : kKindNames) {
    if (kind == k) return name;
  }
  return "report_to_report";
}

TaskKind task_kind_from_string(std::string_view s) {
  std::string norm(s);
  std::replace(norm.begin(), norm.end(), '-', '_');
  for (const auto& [kind, name] : kKindNames) {
    if (name == norm) return kind;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown task '" + std::string(s) +
                  "' (expected report-to-report, report-to-concepts, concepts-to-report or concepts-to-concepts)");
}

bool consumes_report(TaskKind k) { return k == TaskKind::kReportToReport || k == TaskKind::kReportToConcepts; }
bool produces_report(TaskKind k) { return k == TaskKind::kReportToReport || k == TaskKind::kConceptsToReport; }

void TaskRequest::validate() const {
  if (options.max_iterations < 1) throw Error(ErrorCode::kInvalidArgument, "max_iterations must be >= 1");
  if (consumes_report(kind)) {
    if (!raw_concepts.empty()) throw Error(ErrorCode::kInvalidArgument, "report tasks take report text, not concepts");
    return;  // an empty report is a valid (degenerate) input
  }
  if (!report_text.empty()) throw Error(ErrorCode::kInvalidArgument, "concept tasks take a concept list, not text");
  const bool any = std::any_of(raw_concepts.begin(), raw_concepts.end(),
                               [](const std::string& c) { return !text::collapse_whitespace(c).empty(); });
  if (!any) throw Error(ErrorCode::kInvalidArgument, "concept list is empty");
}

std::int64_t SteadyClock::now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// ---------------------------------------------------------------------------
// Trace

std::vector<std::string> PipelineTrace::tools_invoked() const {
  std::vector<std::string> out;
  for (const auto& s : steps) {
    if (s.act) out.push_back(s.act->tool);
  }
  return out;
}

std::map<std::string, std::int64_t> PipelineTrace::tool_ms() const {
  std::map<std::string, std::int64_t> out;
  for (const auto& s : steps) {
    if (s.act) out[s.act->tool] += s.act_ms;
  }
  return out;
}

Json PipelineTrace::to_json() const {
  Json steps_json = Json::array();
  for (const auto& s : steps) {
    Json step = {{"step", s.index}, {"plan", plan_to_json(s)}};
    if (s.act) {
      Json act = {{"tool", s.act->tool}, {"arguments", s.act->arguments}, {"ok", s.act->result.ok}};
      if (s.act->result.ok) {
        act["result"] = s.act->result.payload;
      } else {
        act["error"] = {{"code", std::string(paostruct::to_string(s.act->result.error.code))},
                        {"message", s.act->result.error.message},
                        {"reason", s.act->result.error.reason}};
      }
      act["attempts"] = s.act->attempts;
      act["duration_ms"] = s.act_ms;
      step["act"] = std::move(act);
    } else {
      step["act"] = nullptr;
    }
    if (s.observe) {
      step["observe"] = {{"verdict", s.observe->terminate ? "terminate" : "continue"},
                         {"justification", s.observe->justification},
                         {"flagged", s.observe->flagged},
                         {"flag", s.observe->flag},
                         {"reasoning", s.observe_reasoning},
                         {"duration_ms", s.observe_ms}};
    } else {
      step["observe"] = nullptr;
    }
    step["terminal"] = s.terminal;
    steps_json.push_back(std::move(step));
  }
  Json j = {{"task", std::string(agent::to_string(kind))},
            {"options",
             {{"cache_enabled", options.cache_enabled},
              {"protocol", options.protocol_name},
              {"max_iterations", options.max_iterations}}},
            {"status", status}};
  if (!error.empty()) j["error"] = error;
  j["totals"] = {{"planning_ms", planning_ms},
                 {"acting_ms", acting_ms},
                 {"observing_ms", observing_ms},
                 {"total_ms", total_ms}};
  j["steps"] = std::move(steps_json);
  return j;
}

PipelineTrace PipelineTrace::from_json(const Json& j) {
  PipelineTrace t;
  t.kind = task_kind_from_string(require_string(j, "task", "trace"));
  const Json& opts = j.value("options", Json::object());
  t.options.cache_enabled = opts.value("cache_enabled", false);
  t.options.protocol_name = opts.value("protocol", "ABCDEF");
  t.options.max_iterations = opts.value("max_iterations", 12);
  t.status = j.value("status", "ok");
  t.error = j.value("error", "");
  const Json& totals = require_field(j, "totals", "trace");
  t.planning_ms = totals.value("planning_ms", std::int64_t{0});
  t.acting_ms = totals.value("acting_ms", std::int64_t{0});
  t.observing_ms = totals.value("observing_ms", std::int64_t{0});
  t.total_ms = totals.value("total_ms", std::int64_t{0});
  for (const auto& sj : require_array(j, "steps", "trace")) {
    TraceStep s;
    s.index = sj.value("step", 0);
    const Json& p = require_field(sj, "plan", "trace.steps");
    s.plan.is_final = p.value("action", "") == "final";
    s.plan.tool = p.value("tool", "");
    s.plan.params = p.value("params", Json::object());
    s.plan.output = p.value("output", Json());
    s.plan.rationale = p.value("rationale", "");
    s.plan_reasoning = p.value("reasoning", "");
    s.plan_ms = p.value("duration_ms", std::int64_t{0});
    if (auto a = sj.find("act"); a != sj.end() && a->is_object()) {
      ActRecord act;
      act.tool = a->value("tool", "");
      act.arguments = a->value("arguments", Json::object());
      act.attempts = a->value("attempts", 1);
      if (a->value("ok", false)) {
        act.result = mcp::ToolResult::success(0, a->value("result", Json()));
      } else {
        const Json& e = a->value("error", Json::object());
        act.result = mcp::ToolResult::failure(0, error_code_from_string(e.value("code", "TOOL_ERROR")),
                                              e.value("message", ""), e.value("reason", ""));
      }
      s.act = std::move(act);
      s.act_ms = a->value("duration_ms", std::int64_t{0});
    }
    if (auto o = sj.find("observe"); o != sj.end() && o->is_object()) {
      s.observe = ObserveDecision{o->value("verdict", "") == "terminate", o->value("justification", ""),
                                  o->value("flagged", false), o->value("flag", "")};
      s.observe_reasoning = o->value("reasoning", "");
      s.observe_ms = o->value("duration_ms", std::int64_t{0});
    }
    s.terminal = sj.value("terminal", false);
    t.steps.push_back(std::move(s));
  }
  return t;
}

// ---------------------------------------------------------------------------
// References

Json resolve_references(const Json& params, const std::map<std::string, Json>& results) {
  if (params.is_array()) {
    Json out = Json::array();
    for (const auto& v : params) out.push_back(resolve_references(v, results));
    return out;
  }
  if (!params.is_object()) return params;
  if (params.size() == 1 && params.contains("$ref") && params["$ref"].is_string()) {
    const std::string ref = params["$ref"].get<std::string>();
    const std::size_t hash = ref.find('#');
    const std::string step = ref.substr(0, hash);
    const std::string pointer = hash == std::string::npos ? "" : ref.substr(hash + 1);
    auto it = results.find(step);
    if (it == results.end()) throw Error(ErrorCode::kPlanFailed, "reference to unknown step '" + step + "'");
    try {
      return it->second.at(Json::json_pointer(pointer));
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::kPlanFailed, "reference '" + ref + "' does not resolve");
    }
  }
  if (params.size() == 1 && params.contains("$concat") && params["$concat"].is_array()) {
    Json out = Json::array();
    for (const auto& part : params["$concat"]) {
      const Json resolved = resolve_references(part, results);
      if (!resolved.is_array()) throw Error(ErrorCode::kPlanFailed, "$concat operand is not a list");
      for (const auto& v : resolved) out.push_back(v);
    }
    return out;
  }
  Json out = Json::object();
  for (const auto& [k, v] : params.items()) out[k] = resolve_references(v, results);
  return out;
}

Json summarize_payload(const Json& payload) {
  if (!payload.is_object()) return payload.is_array() ? Json(payload.size()) : Json("value");
  Json out = Json::object();
  for (const auto& [k, v] : payload.items()) {
    if (v.is_array()) {
      out[k] = v.size();
    } else if (v.is_object()) {
      out[k] = "object";
    } else {
      out[k] = v;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Engine

PaoEngine::PaoEngine(std::shared_ptr<llm::ChatEngine> engine, std::shared_ptr<const llm::PromptLibrary> prompts,
                     std::shared_ptr<mcp::ToolClient> client, std::shared_ptr<const ProtocolSchema> schema,
                     Options options)
    : engine_(std::move(engine)),
      prompts_(std::move(prompts)),
      client_(std::move(client)),
      schema_(std::move(schema)),
      options_(std::move(options)) {
  if (!engine_ || !prompts_ || !client_ || !schema_) {
    throw Error(ErrorCode::kConfigError, "agent requires an engine, prompts, a tool client and a schema");
  }
  if (!options_.clock) options_.clock = std::make_shared<SteadyClock>();
  if (!options_.cues) options_.cues = default_cues();
}

Json PaoEngine::task_input(const TaskRequest& request) const {
  if (consumes_report(request.kind)) return {{"report_text", request.report_text}};
  Json concepts = Json::array();
  std::set<std::string> seen;
  for (const auto& raw : request.raw_concepts) {
    const std::string source = text::collapse_whitespace(raw);
    if (source.empty()) continue;
    auto [term, polarity] = llm::split_leading_cue(*options_.cues, source);
    auto c = MedicalConcept::make(term, source, polarity_from_string(polarity));
    if (c.normalized.empty() || !seen.insert(c.normalized).second) continue;
    concepts.push_back(paostruct::to_json(c));
  }
  return {{"concepts", std::move(concepts)}};
}

Json PaoEngine::planning_input(const Json& history, const std::vector<mcp::ToolDescriptor>& catalog,
                               const TaskRequest& request) const {
  Json tools = Json::array();
  for (const auto& d : catalog) {
    tools.push_back({{"name", d.name}, {"description", d.description}, {"inputSchema", d.param_schema}});
  }
  Json fields = Json::array();
  fields.push_back(consumes_report(request.kind) ? "report_text" : "concepts");
  return {{"task", std::string(to_string(request.kind))},
          {"options", {{"cache_enabled", request.options.cache_enabled}, {"protocol", request.options.protocol_name}}},
          {"input_fields", std::move(fields)},
          {"tools", std::move(tools)},
          {"history", history}};
}

PlanDecision PaoEngine::plan_raw(const Json& history, const std::vector<mcp::ToolDescriptor>& catalog,
                                 const TaskRequest& request, std::string* reasoning) {
  llm::StructuredCompletion c;
  try {
    c = llm::ask(*engine_, *prompts_, llm::Role::kPlan, planning_input(history, catalog, request),
                 options_.completion);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMalformedOutput) throw Error(ErrorCode::kPlanFailed, e.detail());
    throw;
  }
  if (reasoning != nullptr) *reasoning = c.reasoning_text;
  const Json& v = c.value();
  PlanDecision d;
  d.is_final = v["action"] == "final";
  d.rationale = v.value("rationale", "");
  if (d.is_final) {
    d.output = v.value("output", Json());
  } else {
    d.tool = v.value("tool", "");
    d.params = v.value("params", Json::object());
  }
  return d;
}

PlanDecision PaoEngine::plan_next(const Json& history, const std::vector<mcp::ToolDescriptor>& catalog,
                                  const TaskRequest& request, std::string* reasoning) {
  PlanDecision d = plan_raw(history, catalog, request, reasoning);
  if (!d.is_final && find_tool(catalog, d.tool) == nullptr) {
    throw Error(ErrorCode::kPlanFailed, "plan names unknown tool '" + d.tool + "'");
  }
  return d;
}

ObserveDecision PaoEngine::observe(const Json& history, const std::vector<mcp::ToolDescriptor>& catalog,
                                   const TaskRequest& request, std::string* reasoning) {
  try {
    auto c = llm::ask(*engine_, *prompts_, llm::Role::kObserve, planning_input(history, catalog, request),
                      options_.completion);
    if (reasoning != nullptr) *reasoning = c.reasoning_text;
    return {c.value()["verdict"] == "terminate", c.value().value("justification", ""), false, ""};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kMalformedOutput) throw;
    return {false, "", true, "unusable observe output: " + e.detail()};
  }
}

bool PaoEngine::accept_output(const Json& output, const TaskRequest& request, TaskOutcome& outcome) const {
  try {
    if (produces_report(request.kind)) {
      StructuredReport report = report_from_json(output);
      if (!validate_structured_report(report, *schema_).ok()) return false;
      outcome.report = std::move(report);
    } else {
      if (!output.is_array()) return false;
      std::vector<CategorizedConcept> concepts;
      for (const auto& c : output) {
        concepts.push_back(categorized_from_json(c));
        if (!schema_->has_key(concepts.back().category_key)) return false;
      }
      outcome.concepts = std::move(concepts);
    }
  } catch (const Error&) {
    return false;
  }
  outcome.output = output;
  return true;
}

TaskOutcome PaoEngine::run_task(const TaskRequest& request) {
  request.validate();
  Clock& clock = *options_.clock;
  TaskOutcome outcome;
  PipelineTrace& trace = outcome.trace;
  trace.kind = request.kind;
  trace.options = request.options;
  const std::int64_t started = clock.now_ms();

  auto close_trace = [&] {
    trace.planning_ms = trace.acting_ms = trace.observing_ms = 0;
    for (const auto& s : trace.steps) {
      trace.planning_ms += s.plan_ms;
      trace.acting_ms += s.act_ms;
      trace.observing_ms += s.observe_ms;
    }
    trace.total_ms = clock.now_ms() - started;
  };
  auto fail = [&](ErrorCode code, const std::string& message) -> TaskFailure {
    trace.status = std::string(paostruct::to_string(code));
    trace.error = message;
    close_trace();
    return TaskFailure(code, message, trace);
  };

  std::vector<mcp::ToolDescriptor> catalog;
  try {
    catalog = client_->list_tools();
  } catch (const Error& e) {
    throw fail(e.code(), "tool discovery failed: " + e.detail());
  }
  std::map<std::string, Json> results = {{"input", task_input(request)}};
  Json history = Json::array();
  const std::string goal_field = produces_report(request.kind) ? "report" : "categorized";

  for (int index = 1; index <= request.options.max_iterations; ++index) {
    TraceStep step;
    step.index = index;

    std::int64_t t0 = clock.now_ms();
    try {
      step.plan = plan_raw(history, catalog, request, &step.plan_reasoning);
    } catch (const Error& e) {
      step.plan_ms = clock.now_ms() - t0;
      trace.steps.push_back(std::move(step));
      throw fail(e.code(), e.detail());
    }
    step.plan_ms = clock.now_ms() - t0;

    if (step.plan.is_final) {
      step.terminal = true;
      trace.steps.push_back(step);
      Json output;
      try {
        output = resolve_references(step.plan.output, results);
      } catch (const Error& e) {
        throw fail(ErrorCode::kPlanFailed, "final output: " + e.detail());
      }
      if (!accept_output(output, request, outcome)) {
        throw fail(ErrorCode::kPlanFailed, "final output does not match the task's output shape");
      }
      close_trace();
      return outcome;
    }

    const mcp::ToolDescriptor* tool = find_tool(catalog, step.plan.tool);
    if (tool == nullptr) {
      trace.steps.push_back(step);
      throw fail(ErrorCode::kPlanFailed, "plan names unknown tool '" + step.plan.tool + "'");
    }
    Json arguments;
    try {
      arguments = resolve_references(step.plan.params, results);
    } catch (const Error& e) {
      trace.steps.push_back(step);
      throw fail(ErrorCode::kPlanFailed, step.plan.tool + " params: " + e.detail());
    }
    Json param_schema = tool->param_schema;
    if (!param_schema.contains("type")) param_schema["type"] = "object";
    if (auto err = validate_against_schema(arguments, param_schema, "params")) {
      trace.steps.push_back(step);
      throw fail(ErrorCode::kPlanFailed, step.plan.tool + " " + *err);
    }

    ActRecord act{tool->name, arguments, {}, 0};
    t0 = clock.now_ms();
    for (;;) {
      act.result = client_->call_tool(act.tool, act.arguments);
      ++act.attempts;
      const ErrorCode code = act.result.error.code;
      const bool retryable = code != ErrorCode::kInvalidParams && code != ErrorCode::kToolNotFound;
      if (act.result.ok || !retryable || act.attempts >= 2) break;
    }
    step.act_ms = clock.now_ms() - t0;
    step.act = act;
    if (!act.result.ok) {
      trace.steps.push_back(step);
      std::string message = act.tool + ": " + act.result.error.message;
      if (!act.result.error.reason.empty()) message += " (" + act.result.error.reason + ")";
      throw fail(act.result.error.code, message);
    }
    const Json& payload = act.result.payload;
    results[std::to_string(index)] = payload;
    history.push_back({{"step", index}, {"tool", act.tool}, {"ok", true}, {"summary", summarize_payload(payload)}});

    t0 = clock.now_ms();
    ObserveDecision verdict;
    try {
      verdict = observe(history, catalog, request, &step.observe_reasoning);
    } catch (const Error& e) {
      step.observe_ms = clock.now_ms() - t0;
      trace.steps.push_back(step);
      throw fail(e.code(), "observe: " + e.detail());
    }
    step.observe_ms = clock.now_ms() - t0;
    if (verdict.terminate) {
      if (payload.is_object() && payload.contains(goal_field) && accept_output(payload[goal_field], request, outcome)) {
        step.observe = verdict;
        step.terminal = true;
        trace.steps.push_back(std::move(step));
        close_trace();
        return outcome;
      }
      // Stopping here would drop the requested output.
      verdict.terminate = false;
      verdict.flagged = true;
      verdict.flag = "terminate overridden: last result is not the requested output";
    }
    step.observe = verdict;
    trace.steps.push_back(std::move(step));
  }
  throw fail(ErrorCode::kBudgetExceeded,
             "no final output within " + std::to_string(request.options.max_iterations) + " iterations");
}

// ---------------------------------------------------------------------------
// Timing

TimingRow timing_row(const PipelineTrace& trace) {
  TimingRow row;
  row.kind = trace.kind;
  row.cache_enabled = trace.options.cache_enabled;
  const auto per_tool = trace.tool_ms();
  auto seconds = [&](const char* tool) -> std::optional<double> {
    auto it = per_tool.find(tool);
    if (it == per_tool.end()) return std::nullopt;
    return static_cast<double>(it->second) / 1000.0;
  };
  if (!trace.steps.empty()) row.planning = static_cast<double>(trace.planning_ms) / 1000.0;
  row.get_concept = seconds("get_concept");
  row.ontology_mapping = seconds("map_ontology");
  row.ontology_filtering = seconds("filter_ontology");
  row.categorization = seconds("categorize_concepts");
  row.generation = seconds("generate_report");
  row.overall = static_cast<double>(trace.total_ms) / 1000.0;
  return row;
}

Json TimingRow::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(); };
  return {{"task_kind", std::string(to_string(kind))},
          {"cache_enabled", cache_enabled},
          {"planning", opt(planning)},
          {"get_concept", opt(get_concept)},
          {"ontology_mapping", opt(ontology_mapping)},
          {"ontology_filtering", opt(ontology_filtering)},
          {"categorization", opt(categorization)},
          {"generation", opt(generation)},
          {"overall", overall}};
}

}  // namespace paostruct::agent
