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

// Plan-Act-Observe loop: the engine plans the next tool call, the client
// executes it, the engine judges the result, until a final output or the
// iteration budget.

#ifndef PAOSTRUCT_AGENT_HPP_
#define PAOSTRUCT_AGENT_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paostruct/error.hpp"
#include "paostruct/llm.hpp"
#include "paostruct/mcp.hpp"
#include "paostruct/protocol.hpp"

namespace paostruct::agent {

enum class TaskKind { kReportToReport, kReportToConcepts, kConceptsToReport, kConceptsToConcepts };

inline constexpr TaskKind kAllTaskKinds[] = {TaskKind::kReportToReport, TaskKind::kReportToConcepts,
                                             TaskKind::kConceptsToReport, TaskKind::kConceptsToConcepts};

std::string_view to_string(TaskKind k);  // "report_to_report"
// Accepts underscores or hyphens; throws Error(kInvalidArgument).
TaskKind task_kind_from_string(std::string_view s);
bool consumes_report(TaskKind k);
bool produces_report(TaskKind k);

struct TaskOptions {
  bool cache_enabled = false;
  std::string protocol_name = "ABCDEF";
  int max_iterations = 12;
};

struct TaskRequest {
  TaskKind kind = TaskKind::kReportToReport;
  std::string report_text;               // report inputs
  std::vector<std::string> raw_concepts;  // concept inputs
  TaskOptions options;

  // Throws Error(kInvalidArgument) for an empty or mis-shaped payload.
  void validate() const;
};

struct PlanDecision {
  bool is_final = false;
  std::string tool;
  Json params = Json::object();  // as proposed, references unresolved
  Json output;                   // final only
  std::string rationale;
};

struct ObserveDecision {
  bool terminate = false;
  std::string justification;
  bool flagged = false;  // engine output unusable or overridden
  std::string flag;
};

struct ActRecord {
  std::string tool;
  Json arguments;  // after reference resolution
  mcp::ToolResult result;
  int attempts = 0;
};

struct TraceStep {
  int index = 0;
  PlanDecision plan;
  std::string plan_reasoning;
  std::int64_t plan_ms = 0;
  std::optional<ActRecord> act;
  std::int64_t act_ms = 0;
  std::optional<ObserveDecision> observe;
  std::string observe_reasoning;
  std::int64_t observe_ms = 0;
  bool terminal = false;
};

struct PipelineTrace {
  TaskKind kind = TaskKind::kReportToReport;
  TaskOptions options;
  std::vector<TraceStep> steps;
  std::int64_t planning_ms = 0;
  std::int64_t acting_ms = 0;
  std::int64_t observing_ms = 0;
  std::int64_t total_ms = 0;
  std::string status = "ok";  // or the error code name
  std::string error;

  // Tools in call order, one entry per step that acted.
  std::vector<std::string> tools_invoked() const;
  // Summed act time per tool.
  std::map<std::string, std::int64_t> tool_ms() const;

  Json to_json() const;
  static PipelineTrace from_json(const Json& j);
};

// Error that carries the trace up to the failure.
class TaskFailure : public Error {
 public:
  TaskFailure(ErrorCode code, const std::string& message, PipelineTrace trace)
      : Error(code, message), trace_(std::move(trace)) {}
  const PipelineTrace& trace() const { return trace_; }

 private:
  PipelineTrace trace_;
};

struct TaskOutcome {
  Json output;  // report document or list of categorized concepts
  std::optional<StructuredReport> report;
  std::vector<CategorizedConcept> concepts;
  PipelineTrace trace;
};

class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::int64_t now_ms() = 0;
};

class SteadyClock : public Clock {
 public:
  std::int64_t now_ms() override;
};

// Advances by a fixed step on every reading; makes traces reproducible.
class StepClock : public Clock {
 public:
  explicit StepClock(std::int64_t step_ms = 1) : step_(step_ms) {}
  std::int64_t now_ms() override { return now_ += step_; }

 private:
  std::int64_t step_;
  std::int64_t now_ = 0;
};

// Substitutes {"$ref":"<step>#<json-pointer>"} (step "input" is the task
// input) and {"$concat":[...]} (array concatenation) inside `params`.
// Throws Error(kPlanFailed) for dangling references.
Json resolve_references(const Json& params, const std::map<std::string, Json>& results);

// Compact view of a tool payload for planning prompts: array fields become
// their lengths, scalars pass through, objects become "object".
Json summarize_payload(const Json& payload);

class PaoEngine {
 public:
  struct Options {
    llm::CompletionOptions completion;
    std::shared_ptr<Clock> clock;                // SteadyClock when null
    std::shared_ptr<const llm::Lexicon> cues;    // negation cues for concept inputs
  };

  PaoEngine(std::shared_ptr<llm::ChatEngine> engine, std::shared_ptr<const llm::PromptLibrary> prompts,
            std::shared_ptr<mcp::ToolClient> client, std::shared_ptr<const ProtocolSchema> schema, Options options);

  // Throws TaskFailure (BUDGET_EXCEEDED, PLAN_FAILED, the tool's error code,
  // ENGINE_UNAVAILABLE) carrying the partial trace.
  TaskOutcome run_task(const TaskRequest& request);

  // The task input document: {"report_text"} or {"concepts":[...]}.
  Json task_input(const TaskRequest& request) const;

  // One planning call. `history` is the list of step summaries the
  // engine sees. Throws Error(kPlanFailed).
  PlanDecision plan_next(const Json& history, const std::vector<mcp::ToolDescriptor>& catalog,
                         const TaskRequest& request, std::string* reasoning = nullptr);

  // Never throws for malformed engine output: that yields continue + flag.
  ObserveDecision observe(const Json& history, const std::vector<mcp::ToolDescriptor>& catalog,
                          const TaskRequest& request, std::string* reasoning = nullptr);

 private:
  Json planning_input(const Json& history, const std::vector<mcp::ToolDescriptor>& catalog,
                      const TaskRequest& request) const;
  // Goal-shaped output check; fills the outcome when it passes.
  bool accept_output(const Json& output, const TaskRequest& request, TaskOutcome& outcome) const;
  PlanDecision plan_raw(const Json& history, const std::vector<mcp::ToolDescriptor>& catalog,
                        const TaskRequest& request, std::string* reasoning);

  std::shared_ptr<llm::ChatEngine> engine_;
  std::shared_ptr<const llm::PromptLibrary> prompts_;
  std::shared_ptr<mcp::ToolClient> client_;
  std::shared_ptr<const ProtocolSchema> schema_;
  Options options_;
};

// Table-shaped timing row for one trace, in seconds. Tools the trace never
// invoked are absent (rendered as "-").
struct TimingRow {
  TaskKind kind = TaskKind::kReportToReport;
  bool cache_enabled = false;
  std::optional<double> planning;
  std::optional<double> get_concept;
  std::optional<double> ontology_mapping;
  std::optional<double> ontology_filtering;
  std::optional<double> categorization;
  std::optional<double> generation;
  double overall = 0.0;

  Json to_json() const;
};

TimingRow timing_row(const PipelineTrace& trace);

}  // namespace paostruct::agent

#endif  // PAOSTRUCT_AGENT_HPP_
