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

#include <algorithm>
#include <thread>

#include "paostruct/error.hpp"
#include "paostruct/io.hpp"
#include "paostruct/llm.hpp"

namespace paostruct::llm {

namespace {

constexpr std::string_view kRoleTagOpen = "[[role:";
constexpr std::string_view kInputOpen = "<task_input>";
constexpr std::string_view kInputClose = "</task_input>";

constexpr std::pair<Role, std::string_view> kRoleNames[] = {
    {Role::kPlan, "plan"},         {Role::kObserve, "observe"},
    {Role::kExtract, "extract"},   {Role::kFilter, "filter"},
    {Role::kCategorize, "categorize"}, {Role::kGenerate, "generate"},
};

// End (exclusive) of the balanced JSON value starting at `begin`, or npos.
std::size_t match_brackets(std::string_view s, std::size_t begin) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = begin; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
      if (depth < 0) return std::string_view::npos;
    }
  }
  return std::string_view::npos;
}

std::string render_exemplars(const std::vector<Exemplar>& exemplars) {
  std::string out;
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    if (i > 0) out += "\n";
    out += "Example " + std::to_string(i + 1) + "\nInput:\n" + exemplars[i].input +
           "\nOutput:\n" + exemplars[i].output + "\n";
  }
  return out;
}

}  // namespace

std::string_view to_string(Role r) {
  for (const auto& [role, name] : kRoleNames) {
    if (role == r) return name;
  }
  return "plan";
}

Role role_from_string(std::string_view s) {
  for (const auto& [role, name] : kRoleNames) {
    if (name == s) return role;
  }
  throw Error(ErrorCode::kStubUnsupported, "unknown role tag '" + std::string(s) + "'");
}

void EngineConfig::validate() const {
  if (temperature < 0.0) throw Error(ErrorCode::kConfigError, "engine temperature must be >= 0");
  if (retry.max_attempts < 1) throw Error(ErrorCode::kConfigError, "retry max_attempts must be >= 1");
  if (repair_rounds < 0) throw Error(ErrorCode::kConfigError, "repair_rounds must be >= 0");
  if (max_output_tokens < 1) throw Error(ErrorCode::kConfigError, "max_output_tokens must be >= 1");
  if (reasoning.open.empty() || reasoning.close.empty()) {
    throw Error(ErrorCode::kConfigError, "reasoning delimiters must be non-empty");
  }
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
  std::string out = std::string(kRoleTagOpen) + std::string(to_string(role)) + "]]\n";
  std::size_t i = 0;
  while (i < body.size()) {
    const std::size_t open = body.find("{{", i);
    if (open == std::string::npos) {
      out.append(body, i, std::string::npos);
      break;
    }
    out.append(body, i, open - i);
    const std::size_t close = body.find("}}", open + 2);
    if (close == std::string::npos) {
      throw Error(ErrorCode::kConfigError, "template '" + name + "': unterminated placeholder");
    }
    const std::string key = body.substr(open + 2, close - open - 2);
    if (auto it = values.find(key); it != values.end()) {
      out += it->second;
    } else if (key == "exemplars") {
      out += render_exemplars(exemplars);
    } else {
      throw Error(ErrorCode::kConfigError,
                  "template '" + name + "': unresolved placeholder {{" + key + "}}");
    }
    i = close + 2;
  }
  return out;
}

PromptTemplate PromptTemplate::from_json(const Json& j) {
  PromptTemplate t;
  t.name = require_string(j, "name", "template");
  t.role = role_from_string(require_string(j, "role", "template"));
  t.version = optional_string(j, "version", "template").value_or("1");
  const Json& body = require_field(j, "body", "template");
  if (body.is_array()) {
    // Bodies may be stored as line arrays for readable diffs.
    for (const auto& line : body) t.body += line.get<std::string>() + "\n";
  } else {
    t.body = body.get<std::string>();
  }
  if (auto ex = j.find("exemplars"); ex != j.end()) {
    for (const auto& e : *ex) {
      auto field = [&](const char* k) {
        const Json& v = require_field(e, k, "template.exemplars");
        return v.is_string() ? v.get<std::string>() : dump_compact(v);
      };
      t.exemplars.push_back({field("input"), field("output")});
    }
  }
  return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  return from_json(parse_json(io::read_file(path), path.string()));
}

PromptLibrary PromptLibrary::load_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kConfigError, "template directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  PromptLibrary lib;
  for (const auto& f : files) lib.add(PromptTemplate::load(f));
  for (const auto& [role, name] : kRoleNames) {
    if (lib.templates_.count(role) == 0) {
      throw Error(ErrorCode::kConfigError,
                  "template directory " + dir.string() + " lacks a '" + std::string(name) + "' template");
    }
  }
  return lib;
}

void PromptLibrary::add(PromptTemplate t) {
  const Role r = t.role;
  templates_.insert_or_assign(r, std::move(t));
}

const PromptTemplate& PromptLibrary::get(Role role) const {
  auto it = templates_.find(role);
  if (it == templates_.end()) {
    throw Error(ErrorCode::kConfigError, "no template for role " + std::string(to_string(role)));
  }
  return it->second;
}

std::optional<Role> prompt_role(std::string_view prompt) {
  const std::size_t at = prompt.find(kRoleTagOpen);
  if (at == std::string_view::npos) return std::nullopt;
  const std::size_t start = at + kRoleTagOpen.size();
  const std::size_t end = prompt.find("]]", start);
  if (end == std::string_view::npos) return std::nullopt;
  return role_from_string(prompt.substr(start, end - start));
}

std::optional<Json> prompt_input(std::string_view prompt) {
  const std::size_t open = prompt.rfind(kInputOpen);
  if (open == std::string_view::npos) return std::nullopt;
  const std::size_t start = open + kInputOpen.size();
  const std::size_t close = prompt.find(kInputClose, start);
  if (close == std::string_view::npos) return std::nullopt;
  const std::string_view body = prompt.substr(start, close - start);
  try {
    return Json::parse(body.begin(), body.end());
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

std::pair<std::string, std::string> strip_reasoning(std::string_view text,
                                                    const ReasoningDelimiters& d) {
  std::string visible;
  std::string reasoning;
  auto add_reasoning = [&](std::string_view r) {
    if (!reasoning.empty()) reasoning += "\n";
    reasoning += std::string(r);
  };

  std::size_t pos = 0;
  // Reasoning models often omit the opening tag; a close tag that appears
  // before any open tag ends a leading reasoning block.
  const std::size_t first_open = text.find(d.open);
  const std::size_t first_close = text.find(d.close);
  if (first_close != std::string_view::npos &&
      (first_open == std::string_view::npos || first_close < first_open)) {
    add_reasoning(text.substr(0, first_close));
    pos = first_close + d.close.size();
  }

  while (pos < text.size()) {
    const std::size_t open = text.find(d.open, pos);
    if (open == std::string_view::npos) {
      visible.append(text.substr(pos));
      break;
    }
    visible.append(text.substr(pos, open - pos));
    const std::size_t inner = open + d.open.size();
    const std::size_t close = text.find(d.close, inner);
    if (close == std::string_view::npos) {
      add_reasoning(text.substr(inner));
      break;
    }
    add_reasoning(text.substr(inner, close - inner));
    pos = close + d.close.size();
  }
  return {visible, reasoning};
}

ParseOutcome parse_structured_output(std::string_view text, const Json& schema,
                                     const ReasoningDelimiters& delims) {
  ParseOutcome out;
  std::tie(out.visible_text, out.reasoning_text) = strip_reasoning(text, delims);
  const std::string_view s = out.visible_text;

  const bool want_array = schema.is_object() && schema.value("type", "") == "array";
  const char opener = want_array ? '[' : '{';

  std::optional<ParseFailure> first_schema_failure;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != opener) {
      ++i;
      continue;
    }
    const std::size_t end = match_brackets(s, i);
    if (end == std::string_view::npos) {
      ++i;
      continue;
    }
    const std::string_view candidate = s.substr(i, end - i);
    Json value;
    try {
      value = Json::parse(candidate.begin(), candidate.end());
    } catch (const nlohmann::json::exception&) {
      ++i;
      continue;
    }
    if (auto err = validate_against_schema(value, schema)) {
      if (!first_schema_failure) first_schema_failure = ParseFailure{ParseFailure::Kind::kSchema, *err};
      i = end;
      continue;
    }
    out.value = std::move(value);
    return out;
  }
  out.failure = first_schema_failure.value_or(
      ParseFailure{ParseFailure::Kind::kNoObject, "no structured object found in output"});
  return out;
}

const Json& StructuredCompletion::value() const {
  if (parsed_value) return *parsed_value;
  std::string excerpt = raw_text.substr(0, 200);
  const std::string kind =
      failure && failure->kind == ParseFailure::Kind::kSchema ? "schema" : "no_object";
  throw Error(ErrorCode::kMalformedOutput,
              kind + " after " + std::to_string(attempts) + " attempt(s): " +
                  (failure ? failure->detail : std::string("unknown")) + "; raw: " + excerpt);
}

std::string repair_message(const ParseFailure& failure, const Json& schema) {
  std::string reason = failure.kind == ParseFailure::Kind::kNoObject
                           ? "it contained no JSON value"
                           : "it did not match the required schema (" + failure.detail + ")";
  return "Your previous reply could not be used because " + reason +
         ". Reply again with exactly one JSON value satisfying this schema, and nothing "
         "else outside your reasoning:\n" +
         dump_compact(schema);
}

StructuredCompletion complete_conversation(ChatEngine& engine, std::vector<ChatMessage> conversation,
                                           const Json& schema, const CompletionOptions& options) {
  StructuredCompletion result;
  for (int attempt = 0; attempt <= options.repair_rounds; ++attempt) {
    result.raw_text = engine.generate(conversation);
    ++result.attempts;
    ParseOutcome parsed = parse_structured_output(result.raw_text, schema, options.reasoning);
    if (!parsed.reasoning_text.empty()) {
      if (!result.reasoning_text.empty()) result.reasoning_text += "\n";
      result.reasoning_text += parsed.reasoning_text;
    }
    if (parsed.ok()) {
      result.parsed_value = std::move(parsed.value);
      result.failure.reset();
      conversation.push_back({"assistant", result.raw_text});
      result.conversation = std::move(conversation);
      return result;
    }
    result.failure = parsed.failure;
    conversation.push_back({"assistant", result.raw_text});
    if (attempt < options.repair_rounds) {
      conversation.push_back({"user", repair_message(*parsed.failure, schema)});
    }
  }
  result.conversation = std::move(conversation);
  return result;
}

StructuredCompletion complete(ChatEngine& engine, const std::string& prompt, const Json& schema,
                              const CompletionOptions& options) {
  return complete_conversation(engine, {{"user", prompt}}, schema, options);
}

const Json& output_schema(Role role) {
  static const std::map<Role, Json> schemas = [] {
    const Json str = {{"type", "string"}};
    const Json str_list = {{"type", "array"}, {"items", str}};
    std::map<Role, Json> m;
    m[Role::kExtract] = {
        {"type", "object"},
        {"required", {"concepts"}},
        {"properties",
         {{"concepts",
           {{"type", "array"},
            {"items",
             {{"type", "object"},
              {"required", {"text", "source_sentence"}},
              {"properties",
               {{"text", {{"type", "string"}, {"minLength", 1}}},
                {"source_sentence", str},
                {"polarity", {{"enum", {"present", "absent", "uncertain"}}}}}}}}}}}}};
    m[Role::kFilter] = {
        {"type", "object"},
        {"required", {"items"}},
        {"properties",
         {{"items",
           {{"type", "array"},
            {"items",
             {{"type", "object"},
              {"required", {"primary", "secondary"}},
              {"properties",
               {{"index", {{"type", "integer"}}},
                {"primary", {{"type", {"string", "null"}}}},
                {"secondary", str_list},
                {"rationale", str}}}}}}}}}};
    m[Role::kCategorize] = {
        {"type", "object"},
        {"required", {"categorized"}},
        {"properties",
         {{"categorized",
           {{"type", "array"},
            {"items",
             {{"type", "object"},
              {"required", {"index", "category"}},
              {"properties", {{"index", {{"type", "integer"}}}, {"category", str}, {"rationale", str}}}}}}}}}};
    m[Role::kGenerate] = {
        {"type", "object"},
        {"required", {"sections"}},
        {"properties",
         {{"sections",
           {{"type", "array"},
            {"items",
             {{"type", "object"},
              {"required", {"key", "findings"}},
              {"properties",
               {{"key", str},
                {"findings",
                 {{"type", "array"},
                  {"items",
                   {{"type", "object"},
                    {"required", {"text", "source_sentences"}},
                    {"properties",
                     {{"text", {{"type", "string"}, {"minLength", 1}}},
                      {"concepts", str_list},
                      {"source_sentences", str_list}}}}}}}}}}}}}}}};
    m[Role::kPlan] = {{"type", "object"},
                      {"required", {"action"}},
                      {"properties",
                       {{"action", {{"enum", {"call", "final"}}}},
                        {"tool", str},
                        {"params", {{"type", "object"}}},
                        {"rationale", str}}}};
    m[Role::kObserve] = {{"type", "object"},
                         {"required", {"verdict"}},
                         {"properties", {{"verdict", {{"enum", {"continue", "terminate"}}}}, {"justification", str}}}};
    return m;
  }();
  return schemas.at(role);
}

StructuredCompletion ask(ChatEngine& engine, const PromptLibrary& prompts, Role role, const Json& input,
                         const CompletionOptions& options) {
  const Json& schema = output_schema(role);
  const std::string prompt =
      prompts.get(role).render({{"input", dump_compact(input)}, {"schema", dump_compact(schema)}});
  StructuredCompletion c = complete(engine, prompt, schema, options);
  c.value();  // throws on failure
  return c;
}

TokenBucket::TokenBucket(double rate_per_sec, int burst)
    : rate_(rate_per_sec),
      capacity_(std::max(1, burst)),
      tokens_(std::max(1, burst)),
      last_(std::chrono::steady_clock::now()) {}

void TokenBucket::acquire() {
  if (rate_ <= 0.0) return;
  std::unique_lock lock(mu_);
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait = (1.0 - tokens_) / rate_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    lock.lock();
  }
}

}  // namespace paostruct::llm
