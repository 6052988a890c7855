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


// paostruct command line: structure, eval, cache, serve, version.
// Exit codes: 0 success, 1 pipeline or data failure, 2 configuration or usage.

#include <signal.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <iostream>

#include "paostruct/config.hpp"
#include "paostruct/eval.hpp"
#include "paostruct/io.hpp"
#include "paostruct/text.hpp"
#include "paostruct/version.hpp"

namespace fs = std::filesystem;
using namespace paostruct;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kNotFound:
      return kExitUsage;
    default:
      return kExitFailure;
  }
}

void log_error(const std::string& msg) { std::cerr << "paostruct: error: " << msg << "\n"; }
void log_info(const std::string& msg) { std::cerr << "paostruct: " << msg << "\n"; }

struct Common {
  std::string config_file;
  config::RunConfig resolved() const {
    std::optional<fs::path> file;
    if (!config_file.empty()) file = config_file;
    return config::resolve(file);
  }
};

// Concept inputs: a JSON list (strings or {"text": ...}), {"concepts": [...]},
// or plain text with one concept per line.
std::vector<std::string> read_concepts(const fs::path& path) {
  const std::string body = io::read_file(path);
  const std::size_t first = body.find_first_not_of(" \t\r\n");
  std::vector<std::string> out;
  if (first != std::string::npos && (body[first] == '[' || body[first] == '{')) {
    Json doc = parse_json(body, path.string());
    if (doc.is_object()) doc = require_field(doc, "concepts", path.string());
    if (!doc.is_array()) throw Error(ErrorCode::kInvalidArgument, path.string() + ": expected a list of concepts");
    for (const auto& c : doc) {
      if (c.is_string()) {
        out.push_back(c.get<std::string>());
      } else if (c.is_object() && c.contains("text") && c["text"].is_string()) {
        out.push_back(c["text"].get<std::string>());
      } else {
        throw Error(ErrorCode::kInvalidArgument, path.string() + ": concept entries must be strings");
      }
    }
    return out;
  }
  std::size_t pos = 0;
  while (pos < body.size()) {
    const std::size_t nl = std::min(body.find('\n', pos), body.size());
    const std::string line = text::collapse_whitespace(std::string_view(body).substr(pos, nl - pos));
    if (!line.empty()) out.push_back(line);
    pos = nl + 1;
  }
  return out;
}

void append_timing(const fs::path& log, const agent::PipelineTrace& trace, const std::string& input_name) {
  std::string existing;
  if (fs::exists(log)) existing = io::read_file(log);
  Json row = agent::timing_row(trace).to_json();
  row["input"] = input_name;
  row["status"] = trace.status;
  io::write_file_atomic(log, existing + dump_compact(row) + "\n");
}

// ---------------------------------------------------------------------------
// structure

struct StructureArgs {
  Common common;
  std::string task;
  std::vector<std::string> inputs;
  std::string out_dir;
  bool cache = false;
  std::string cache_path;
  bool step_clock = false;
  std::string timing_log;
  int max_iterations = 0;
};

int cmd_structure(const StructureArgs& a) {
  config::RunConfig cfg = a.common.resolved();
  if (a.cache) cfg.cache.enabled = true;
  if (!a.cache_path.empty()) cfg.cache.path = a.cache_path;
  if (a.max_iterations > 0) cfg.max_iterations = a.max_iterations;
  const agent::TaskKind kind = agent::task_kind_from_string(a.task);
  std::shared_ptr<agent::Clock> clock;
  if (a.step_clock) clock = std::make_shared<agent::StepClock>();
  config::Runtime rt = config::build_runtime(cfg, clock);

  const fs::path out(a.out_dir);
  fs::create_directories(out);
  const fs::path timing_log = a.timing_log.empty() ? out / "timing.jsonl" : fs::path(a.timing_log);

  int status = 0;
  for (const auto& input : a.inputs) {
    const fs::path in(input);
    if (!fs::exists(in)) throw Error(ErrorCode::kNotFound, "input " + input + " does not exist");
    agent::TaskRequest req;
    req.kind = kind;
    req.options = rt.task_options();
    if (agent::consumes_report(kind)) {
      req.report_text = io::read_file(in);
    } else {
      req.raw_concepts = read_concepts(in);
    }
    const std::string stem = in.stem().string();
    const fs::path trace_path = out / (stem + ".trace.json");
    try {
      agent::TaskOutcome result = rt.agent->run_task(req);
      if (result.report) {
        io::write_file_atomic(out / (stem + ".report.json"), serialize_report(*result.report));
        io::write_file_atomic(out / (stem + ".report.txt"), render_report_text(*result.report));
      } else {
        Json list = Json::array();
        for (const auto& c : result.concepts) list.push_back(to_json(c));
        io::write_file_atomic(out / (stem + ".concepts.json"), dump_pretty(list));
      }
      io::write_file_atomic(trace_path, dump_pretty(result.trace.to_json()));
      append_timing(timing_log, result.trace, input);
      log_info(input + ": ok (" + std::to_string(result.trace.steps.size()) + " steps)");
    } catch (const agent::TaskFailure& f) {
      io::write_file_atomic(trace_path, dump_pretty(f.trace().to_json()));
      append_timing(timing_log, f.trace(), input);
      log_error(input + ": " + f.what() + " (partial trace in " + trace_path.string() + ")");
      status = kExitFailure;
    }
  }
  if (rt.cache) rt.cache->flush();
  return status;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  Common common;
  std::string gold;
  std::string pred;
  std::string name = "Our Model";
  std::vector<std::string> compare;
  std::vector<double> thresholds;
  std::string granularity;
  std::string json_out;
  std::string format = "text";
  std::string rubric;
  std::vector<std::string> traces;
};

int cmd_eval(const EvalArgs& a) {
  config::RunConfig cfg = a.common.resolved();
  if (!a.thresholds.empty()) cfg.eval.thresholds = a.thresholds;
  if (!a.granularity.empty()) cfg.eval.granularity = eval::granularity_from_string(a.granularity);
  cfg.validate();
  const ProtocolSchema schema = ProtocolSchema::load(cfg.protocol);

  if (a.gold.empty() != a.pred.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "--gold and --pred must be given together");
  }
  if (a.gold.empty() && a.rubric.empty() && a.traces.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "eval needs --gold with --pred, --rubric, or --traces");
  }
  Json machine = Json::object();
  std::string text_out;

  if (!a.gold.empty()) {
    const auto gold = eval::load_gold(a.gold, schema);
    std::vector<eval::NamedPredictions> models = {{a.name, eval::load_predictions(a.pred, schema)}};
    for (const auto& c : a.compare) {
      // "name=path" or a bare path named after its file stem.
      const std::size_t eq = c.find('=');
      const std::string name = eq == std::string::npos ? fs::path(c).stem().string() : c.substr(0, eq);
      const std::string path = eq == std::string::npos ? c : c.substr(eq + 1);
      models.push_back({name, eval::load_predictions(path, schema)});
    }
    const auto report = eval::evaluate(gold, models, schema, cfg.eval.thresholds, cfg.eval.granularity);
    machine["metrics"] = report.to_json();
    text_out += report.render_text();
  }
  if (!a.rubric.empty()) {
    const auto summary = eval::rubric_aggregate(eval::load_rubric(a.rubric));
    machine["rubric"] = summary.to_json();
    text_out += "Report quality (mean rubric scores)\n\n" + summary.render_text() + "\n";
  }
  if (!a.traces.empty()) {
    // Rows grouped by (task kind, cache flag) in first-seen order.
    std::vector<std::pair<std::pair<agent::TaskKind, bool>, std::vector<agent::PipelineTrace>>> groups;
    for (const auto& p : a.traces) {
      auto t = agent::PipelineTrace::from_json(parse_json(io::read_file(p), p));
      const auto key = std::make_pair(t.kind, t.options.cache_enabled);
      auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == key; });
      if (it == groups.end()) {
        groups.push_back({key, {}});
        it = std::prev(groups.end());
      }
      it->second.push_back(std::move(t));
    }
    std::vector<eval::TimingSummary> rows;
    Json timing = Json::array();
    for (const auto& [key, traces] : groups) {
      rows.push_back(eval::timing_table(traces, key.first));
      timing.push_back(rows.back().to_json());
    }
    machine["timing"] = timing;
    text_out += "Inference time per tool (seconds)\n\n" + eval::render_timing_table(rows) + "\n";
  }

  if (!a.json_out.empty()) io::write_file_atomic(a.json_out, dump_pretty(machine));
  if (a.format == "json") {
    std::cout << dump_pretty(machine);
  } else {
    std::cout << text_out;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// cache

struct CacheArgs {
  Common common;
  std::string cache_path;
  std::string warm_file;
};

std::unique_ptr<cache::ConceptCache> open_cache(const CacheArgs& a) {
  config::RunConfig cfg = a.common.resolved();
  if (!a.cache_path.empty()) cfg.cache.path = a.cache_path;
  if (cfg.cache.path.empty()) {
    throw Error(ErrorCode::kConfigError, "no cache path configured (use --cache-path or cache.path)");
  }
  return std::make_unique<cache::ConceptCache>(cfg.cache.path);
}

int cmd_cache_stats(const CacheArgs& a) {
  auto c = open_cache(a);
  const auto s = c->stats();
  Json entries = Json::array();
  for (const auto& e : c->entries()) entries.push_back(e.to_json());
  std::cout << dump_pretty({{"path", c->path()->string()},
                            {"entries", s.entries},
                            {"total_hits", s.total_hits},
                            {"records", std::move(entries)}});
  return 0;
}

// One JSON object per line: {"concept", "category", "label"?, "id"?}. Every
// row is checked before anything is written.
int cmd_cache_warm(const CacheArgs& a) {
  config::RunConfig cfg = a.common.resolved();
  const ProtocolSchema schema = ProtocolSchema::load(cfg.protocol);
  const std::string body = io::read_file(a.warm_file);
  struct Row {
    std::string concept_text, category, label;
    std::optional<std::string> id;
  };
  std::vector<Row> rows;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < body.size()) {
    const std::size_t nl = std::min(body.find('\n', pos), body.size());
    const std::string_view line = std::string_view(body).substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string where = a.warm_file + " row " + std::to_string(line_no);
    const Json j = parse_json(line, where);
    Row r;
    r.concept_text = require_string(j, "concept", where);
    r.category = require_string(j, "category", where);
    r.label = optional_string(j, "label", where).value_or("");
    r.id = optional_string(j, "id", where);
    if (text::collapse_whitespace(r.concept_text).empty()) throw Error(ErrorCode::kParseError, where + ": empty concept");
    if (!schema.has_key(r.category)) {
      throw Error(ErrorCode::kInvalidCategory,
                  where + ": category '" + r.category + "' is not one of the " + schema.name() + " keys");
    }
    rows.push_back(std::move(r));
  }
  auto c = open_cache(a);
  for (const auto& r : rows) c->put(r.concept_text, r.category, r.label, r.id);
  c->flush();
  log_info("warmed " + std::to_string(rows.size()) + " entries into " + c->path()->string());
  return 0;
}

int cmd_cache_clear(const CacheArgs& a) {
  auto c = open_cache(a);
  c->clear();
  log_info("cleared " + c->path()->string());
  return 0;
}

// ---------------------------------------------------------------------------
// serve

struct ServeArgs {
  Common common;
  std::string transport;
  std::string host;
  int port = -1;
};

int cmd_serve(const ServeArgs& a) {
  config::RunConfig cfg = a.common.resolved();
  if (!a.transport.empty()) cfg.server.transport = a.transport;
  if (!a.host.empty()) cfg.server.host = a.host;
  if (a.port >= 0) cfg.server.port = static_cast<std::uint16_t>(a.port);
  if (cfg.server.transport == "inprocess") cfg.server.transport = "stdio";
  config::Runtime rt = config::build_runtime(cfg, nullptr, /*for_serving=*/true);

  if (cfg.server.transport == "stdio") {
    log_info("serving " + std::to_string(rt.server->list_tools().size()) + " tools on stdio");
    mcp::serve_fds(*rt.server, STDIN_FILENO, STDOUT_FILENO, mcp::Framing::kNewline);
  } else {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);  // before any thread starts
    mcp::TcpServer server(*rt.server, cfg.server.port, cfg.server.host);
    server.start();
    log_info("listening on " + cfg.server.host + ":" + std::to_string(server.port()));
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  }
  if (rt.cache) rt.cache->flush();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"paostruct: chest radiograph report structuring with a tool-calling agent"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("paostruct ") + kVersion);

  StructureArgs sa;
  auto* structure = app.add_subcommand("structure", "Run a transformation task over input files");
  structure->add_option("--config", sa.common.config_file, "JSON config file")->check(CLI::ExistingFile);
  structure->add_option("--task", sa.task, "report-to-report | report-to-concepts | concepts-to-report | concepts-to-concepts")
      ->required();
  structure->add_option("--in", sa.inputs, "Input file(s): report text, or a concept list")->required();
  structure->add_option("--out", sa.out_dir, "Output directory")->required();
  structure->add_flag("--cache", sa.cache, "Enable the concept cache fast path");
  structure->add_option("--cache-path", sa.cache_path, "Concept cache file");
  structure->add_flag("--step-clock", sa.step_clock, "Deterministic synthetic clock for traces");
  structure->add_option("--timing-log", sa.timing_log, "Timing rows log (default <out>/timing.jsonl)");
  structure->add_option("--max-iterations", sa.max_iterations, "Plan-act-observe budget");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Score predictions, rubric ratings or traces");
  ev->add_option("--config", ea.common.config_file, "JSON config file")->check(CLI::ExistingFile);
  ev->add_option("--gold", ea.gold, "Gold annotation file")->check(CLI::ExistingFile);
  ev->add_option("--pred", ea.pred, "Prediction file of the reference model")->check(CLI::ExistingFile);
  ev->add_option("--name", ea.name, "Display name of the reference model");
  ev->add_option("--compare", ea.compare, "Other prediction file(s), optionally name=path");
  ev->add_option("--thresholds", ea.thresholds, "Fuzzy thresholds")->delimiter(',');
  ev->add_option("--granularity", ea.granularity, "McNemar items: concept | report");
  ev->add_option("--json", ea.json_out, "Also write machine-readable results here");
  ev->add_option("--format", ea.format, "stdout format")->check(CLI::IsMember({"text", "json"}));
  ev->add_option("--rubric", ea.rubric, "Rubric CSV (sample_id,rater_id,group,accuracy,structure)")
      ->check(CLI::ExistingFile);
  ev->add_option("--traces", ea.traces, "Trace files for the timing table")->check(CLI::ExistingFile);

  CacheArgs ca;
  auto* cache_cmd = app.add_subcommand("cache", "Inspect or manage the concept cache");
  cache_cmd->require_subcommand(1);
  cache_cmd->add_option("--config", ca.common.config_file, "JSON config file")->check(CLI::ExistingFile);
  cache_cmd->add_option("--cache-path", ca.cache_path, "Concept cache file");
  auto* stats = cache_cmd->add_subcommand("stats", "Entry and hit counts");
  auto* warm = cache_cmd->add_subcommand("warm", "Load concept/category rows (JSON lines)");
  warm->add_option("file", ca.warm_file, "Rows file")->required()->check(CLI::ExistingFile);
  auto* clear = cache_cmd->add_subcommand("clear", "Remove every entry");

  ServeArgs va;
  auto* serve = app.add_subcommand("serve", "Expose the tools over stdio or tcp");
  serve->add_option("--config", va.common.config_file, "JSON config file")->check(CLI::ExistingFile);
  serve->add_option("--transport", va.transport, "stdio | tcp")->check(CLI::IsMember({"stdio", "tcp"}));
  serve->add_option("--host", va.host, "tcp listen address");
  serve->add_option("--port", va.port, "tcp port (0 picks one)")->check(CLI::Range(0, 65535));

  auto* version = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (structure->parsed()) return cmd_structure(sa);
    if (ev->parsed()) return cmd_eval(ea);
    if (stats->parsed()) return cmd_cache_stats(ca);
    if (warm->parsed()) return cmd_cache_warm(ca);
    if (clear->parsed()) return cmd_cache_clear(ca);
    if (serve->parsed()) return cmd_serve(va);
    if (version->parsed()) {
      std::cout << "paostruct " << kVersion << "\n";
      return 0;
    }
  } catch (const Error& e) {
    log_error(e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    log_error(e.what());
    return kExitFailure;
  }
  return 0;
}
