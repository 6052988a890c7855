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

#ifndef PAOSTRUCT_LLM_HPP_
#define PAOSTRUCT_LLM_HPP_

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paostruct/json.hpp"

namespace paostruct::llm {

// What a prompt asks the engine to do. Rendered prompts carry the tag on
// their first line as "[[role:<name>]]".
enum class Role { kPlan, kObserve, kExtract, kFilter, kCategorize, kGenerate };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double backoff_multiplier = 2.0;
};

struct ReasoningDelimiters {
  std::string open = "<think>";
  std::string close = "</think>";
};

struct EngineConfig {
  std::string endpoint_url = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model_id = "deepseek-r1-distill-llama-70b";
  std::string api_key_env = "PAOSTRUCT_API_KEY";  // variable name, never the key
  double temperature = 0.0;
  int max_output_tokens = 4096;
  std::chrono::milliseconds request_timeout{300'000};
  RetryPolicy retry;
  int repair_rounds = 2;
  ReasoningDelimiters reasoning;
  double requests_per_second = 0.0;  // 0 disables client-side rate limiting
  int burst = 1;
  std::map<std::string, std::string> headers;

  // Throws Error(kConfigError).
  void validate() const;
};

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

class ChatEngine {
 public:
  virtual ~ChatEngine() = default;
  // Raw completion text for a conversation. Transport failures throw
  // Error(kEngineUnavailable).
  virtual std::string generate(const std::vector<ChatMessage>& conversation) = 0;
  virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Templates

struct Exemplar {
  std::string input;
  std::string output;
};

struct PromptTemplate {
  std::string name;
  Role role = Role::kPlan;
  std::string version;
  std::string body;  // {{placeholder}} syntax; {{exemplars}} expands the few-shot block
  std::vector<Exemplar> exemplars;

  // Throws Error(kConfigError) naming the first placeholder left unresolved.
  std::string render(const std::map<std::string, std::string>& values) const;

  static PromptTemplate from_json(const Json& j);
  static PromptTemplate load(const std::filesystem::path& path);
};

class PromptLibrary {
 public:
  // Loads every *.json template in `dir`; one template per role is required.
  static PromptLibrary load_dir(const std::filesystem::path& dir);

  void add(PromptTemplate t);
  const PromptTemplate& get(Role role) const;

 private:
  std::map<Role, PromptTemplate> templates_;
};

// Role tag and task input block extracted from a rendered prompt.
std::optional<Role> prompt_role(std::string_view prompt);
std::optional<Json> prompt_input(std::string_view prompt);

// ---------------------------------------------------------------------------
// Structured output

struct ParseFailure {
  enum class Kind { kNoObject, kSchema };
  Kind kind = Kind::kNoObject;
  std::string detail;  // for kSchema: "path: reason" of the best candidate
};

struct ParseOutcome {
  std::optional<Json> value;
  std::optional<ParseFailure> failure;
  std::string visible_text;    // text after reasoning blocks were removed
  std::string reasoning_text;  // removed reasoning, blocks joined by "\n"
  bool ok() const { return value.has_value(); }
};

// Removes reasoning blocks. An unmatched close delimiter means everything
// before it was reasoning; an unmatched open delimiter runs to end of text.
std::pair<std::string, std::string> strip_reasoning(std::string_view text,
                                                    const ReasoningDelimiters& delims);

// Scans for the first balanced JSON object (or array, when the schema's
// type is "array") that parses and validates; invalid candidates are
// skipped and the scan continues after them.
ParseOutcome parse_structured_output(std::string_view text, const Json& schema,
                                     const ReasoningDelimiters& delims = {});

struct StructuredCompletion {
  std::string raw_text;  // last raw response
  std::optional<Json> parsed_value;
  std::string reasoning_text;
  std::optional<ParseFailure> failure;
  int attempts = 0;
  std::vector<ChatMessage> conversation;  // including repair turns

  bool ok() const { return parsed_value.has_value(); }
  // Throws Error(kMalformedOutput) carrying the failure and raw text.
  const Json& value() const;
};

struct CompletionOptions {
  int repair_rounds = 2;
  ReasoningDelimiters reasoning;
};

// Sends `prompt`, parses against `schema`, and on failure appends the raw
// answer plus a repair request to the conversation, up to repair_rounds
// extra attempts.
StructuredCompletion complete(ChatEngine& engine, const std::string& prompt, const Json& schema,
                              const CompletionOptions& options = {});

// Same loop starting from an existing conversation (used by callers that
// add a semantic correction turn of their own).
StructuredCompletion complete_conversation(ChatEngine& engine, std::vector<ChatMessage> conversation,
                                           const Json& schema, const CompletionOptions& options);

std::string repair_message(const ParseFailure& failure, const Json& schema);

// Shape every engine answer for `role` must satisfy.
const Json& output_schema(Role role);

// Renders the role's template with the task input block and output schema
// and runs complete(); throws Error(kMalformedOutput) when no valid answer
// arrives.
StructuredCompletion ask(ChatEngine& engine, const PromptLibrary& prompts, Role role, const Json& input,
                         const CompletionOptions& options = {});

// ---------------------------------------------------------------------------
// Engines

// Blocking token bucket; rate <= 0 never blocks.
class TokenBucket {
 public:
  TokenBucket(double rate_per_sec, int burst);
  void acquire();

 private:
  double rate_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

// OpenAI-compatible chat-completions endpoint.
class RemoteEngine : public ChatEngine {
 public:
  explicit RemoteEngine(EngineConfig config);
  std::string generate(const std::vector<ChatMessage>& conversation) override;
  std::string name() const override { return "remote:" + config_.model_id; }

  static Json build_request(const EngineConfig& config, const std::vector<ChatMessage>& conversation);
  // Extracts the assistant text; a separate reasoning field, when the
  // server returns one, is re-wrapped in the configured delimiters.
  static std::string parse_response(const Json& body, const ReasoningDelimiters& delims);

 private:
  EngineConfig config_;
  TokenBucket bucket_;
};

struct LexiconEntry {
  std::string term;
  std::string normalized;
  std::string category_key;
  std::string primary_ontology_label;
  std::vector<std::string> polarity_cues;  // extra negation cues for this term
  std::vector<std::string> aliases;        // other surface forms, reported as `term`
};

// Stub vocabulary: terms with their protocol category and preferred
// ontology label, plus the cue lists used for polarity.
class Lexicon {
 public:
  static Lexicon from_json(const Json& j);
  static Lexicon load(const std::filesystem::path& path);
  Json to_json() const;

  const std::vector<LexiconEntry>& entries() const { return entries_; }
  const LexiconEntry* find_normalized(std::string_view normalized) const;
  // Exact normalized match on term or alias, else the longest entry whose
  // token sequence occurs inside `normalized`.
  const LexiconEntry* match(std::string_view normalized) const;
  const LexiconEntry* find_by_label(std::string_view label) const;

  // Normalized token sequences for every term and alias, longest first.
  struct Pattern {
    std::vector<std::string> tokens;
    std::size_t entry = 0;
  };
  const std::vector<Pattern>& patterns() const { return patterns_; }

  const std::vector<std::string>& finding_roots() const { return finding_roots_; }
  const std::vector<std::string>& negation_cues() const { return negation_pre_; }
  const std::vector<std::string>& negation_post_cues() const { return negation_post_; }
  const std::vector<std::string>& uncertainty_cues() const { return uncertain_pre_; }
  const std::vector<std::string>& uncertainty_post_cues() const { return uncertain_post_; }
  const std::vector<std::string>& pseudo_negations() const { return pseudo_; }
  const std::vector<std::string>& scope_terminators() const { return terminators_; }

  void add(LexiconEntry e);

 private:
  std::vector<LexiconEntry> entries_;
  std::vector<Pattern> patterns_;
  std::map<std::string, std::size_t, std::less<>> by_normalized_;
  std::vector<std::string> finding_roots_;
  std::vector<std::string> negation_pre_;
  std::vector<std::string> negation_post_;
  std::vector<std::string> uncertain_pre_;
  std::vector<std::string> uncertain_post_;
  std::vector<std::string> pseudo_;
  std::vector<std::string> terminators_;
};

// Polarity of the mention at [begin, end) inside `sentence`, judged from
// cue phrases within the same clause.
std::string detect_polarity(const Lexicon& lexicon, std::string_view sentence, std::size_t begin,
                            std::size_t end, const LexiconEntry* entry = nullptr);

// Leading cue removal for raw concept strings: "no pleural effusion" ->
// ("pleural effusion", "absent").
std::pair<std::string, std::string> split_leading_cue(const Lexicon& lexicon, std::string_view raw);

// Deterministic rule engine keyed on the prompt's role tag. Identical
// conversations give identical output.
class StubEngine : public ChatEngine {
 public:
  explicit StubEngine(std::shared_ptr<const Lexicon> lexicon);
  std::string generate(const std::vector<ChatMessage>& conversation) override;
  std::string name() const override { return "stub"; }

  // Role handlers, exposed for tests. Each takes the prompt's input block.
  Json extract(const Json& input) const;
  Json categorize(const Json& input) const;
  Json filter(const Json& input) const;
  Json plan(const Json& input) const;
  Json observe(const Json& input) const;
  Json generate_report(const Json& input) const;

  const Lexicon& lexicon() const { return *lexicon_; }

 private:
  std::shared_ptr<const Lexicon> lexicon_;
};

}  // namespace paostruct::llm

#endif  // PAOSTRUCT_LLM_HPP_
