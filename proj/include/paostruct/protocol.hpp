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

// Protocol schema, concept and report value types, report validation and
// the canonical report document format.

#ifndef PAOSTRUCT_PROTOCOL_HPP_
#define PAOSTRUCT_PROTOCOL_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paostruct/json.hpp"

namespace paostruct {

struct ProtocolCategory {
  std::string key;  // single uppercase letter
  std::string title;
  std::string scope_description;

  bool operator==(const ProtocolCategory&) const = default;
};

// Ordered set of categories. Category order defines report section order.
class ProtocolSchema {
 public:
  // Throws Error(kConfigError) when any invariant is broken.
  ProtocolSchema(std::string name, std::string version,
                 std::vector<ProtocolCategory> categories);

  // The shipped chest radiograph checklist, keys A..F.
  static ProtocolSchema abcdef();

  static ProtocolSchema from_json(const Json& doc);
  static ProtocolSchema load(const std::filesystem::path& path);
  Json to_json() const;

  const std::string& name() const { return name_; }
  const std::string& version() const { return version_; }
  const std::vector<ProtocolCategory>& categories() const { return categories_; }

  bool has_key(std::string_view key) const { return find(key) != nullptr; }
  const ProtocolCategory* find(std::string_view key) const;
  std::vector<std::string> keys() const;

  bool operator==(const ProtocolSchema&) const = default;

 private:
  std::string name_;
  std::string version_;
  std::vector<ProtocolCategory> categories_;
};

enum class Polarity { kPresent, kAbsent, kUncertain };

std::string_view to_string(Polarity p);
Polarity polarity_from_string(std::string_view s);

struct MedicalConcept {
  std::string text;
  std::string normalized;
  std::string source_sentence;  // empty when no sentence is known
  Polarity polarity = Polarity::kPresent;

  // Builds a concept with normalized = normalize_concept(text).
  static MedicalConcept make(std::string text, std::string source_sentence = {},
                             Polarity polarity = Polarity::kPresent);

  bool operator==(const MedicalConcept&) const = default;
};

struct CategorizedConcept {
  MedicalConcept term;
  std::string category_key;
  std::string rationale;
  std::optional<std::string> primary_ontology_id;

  bool operator==(const CategorizedConcept&) const = default;
};

struct Finding {
  std::string text;
  std::vector<std::string> concept_refs;
  std::vector<std::string> source_sentences;

  bool operator==(const Finding&) const = default;
};

struct ReportSection {
  std::string key;
  std::string title;
  std::vector<Finding> findings;  // empty means "no relevant findings"

  bool operator==(const ReportSection&) const = default;
};

inline constexpr std::string_view kNoFindingsMarker = "No relevant findings identified.";

struct StructuredReport {
  std::string protocol_name;
  std::vector<ReportSection> sections;

  // One empty section per schema category, in schema order.
  static StructuredReport empty_for(const ProtocolSchema& schema);

  const ReportSection* section(std::string_view key) const;
  std::size_t finding_count() const;

  bool operator==(const StructuredReport&) const = default;
};

struct Violation {
  std::string location;  // e.g. "section D" or "section B finding 2"
  std::string rule;      // short rule id, e.g. "missing section D"
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

// Structural invariants of a report against a schema: one section per
// category in schema order, non-empty titles, every finding grounded.
ValidationResult validate_structured_report(const StructuredReport& report,
                                            const ProtocolSchema& schema);

// Every cited source sentence must occur in the originating text (after
// whitespace normalization).
ValidationResult check_grounding(const StructuredReport& report, std::string_view source_text);

// JSON conversions. from_json throws Error(kParseError) naming the field path.
Json to_json(const MedicalConcept& c);
Json to_json(const CategorizedConcept& c);
Json to_json(const StructuredReport& r);
MedicalConcept concept_from_json(const Json& j, const std::string& path = "concept");
CategorizedConcept categorized_from_json(const Json& j, const std::string& path = "categorized");
StructuredReport report_from_json(const Json& j);

// Canonical document: fixed field order, two-space indentation, UTF-8
// passed through unescaped, trailing newline.
std::string serialize_report(const StructuredReport& report);
StructuredReport deserialize_report(std::string_view document);

// Plain-text rendering with explicit empty-section markers.
std::string render_report_text(const StructuredReport& report);

}  // namespace paostruct

#endif  // PAOSTRUCT_PROTOCOL_HPP_
