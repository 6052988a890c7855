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

#include "paostruct/protocol.hpp"

#include <map>
#include <set>
#include <sstream>

#include "paostruct/error.hpp"
#include "paostruct/io.hpp"
#include "paostruct/text.hpp"

namespace paostruct {

ProtocolSchema::ProtocolSchema(std::string name, std::string version,
                               std::vector<ProtocolCategory> categories)
    : name_(std::move(name)), version_(std::move(version)), categories_(std::move(categories)) {
  if (name_.empty()) throw Error(ErrorCode::kConfigError, "protocol schema name is empty");
  if (categories_.empty()) {
    throw Error(ErrorCode::kConfigError, "protocol schema '" + name_ + "' has no categories");
  }
  std::set<std::string> seen;
  for (const auto& c : categories_) {
    if (c.key.size() != 1 || c.key[0] < 'A' || c.key[0] > 'Z') {
      throw Error(ErrorCode::kConfigError,
                  "category key '" + c.key + "' is not a single uppercase letter");
    }
    if (!seen.insert(c.key).second) {
      throw Error(ErrorCode::kConfigError, "duplicate category key '" + c.key + "'");
    }
    if (c.title.empty()) {
      throw Error(ErrorCode::kConfigError, "category " + c.key + " has an empty title");
    }
    if (c.scope_description.empty()) {
      throw Error(ErrorCode::kConfigError,
                  "category " + c.key + " has an empty scope description");
    }
  }
}

ProtocolSchema ProtocolSchema::abcdef() {
  return ProtocolSchema(
      "ABCDEF", "1.0",
      {
          {"A", "Airways", "Airways"},
          {"B", "Lungs and Pleura", "Lung fields and pleura"},
          {"C", "Cardiomediastinum", "Cardiomediastinal contours and great vessels"},
          {"D", "Diaphragm", "Diaphragm and subdiaphragmatic structures"},
          {"E", "External Anatomy", "External anatomy including bones and soft tissues"},
          {"F", "Foreign Bodies and Devices", "Foreign bodies and medical devices"},
      });
}

ProtocolSchema ProtocolSchema::from_json(const Json& doc) {
  std::vector<ProtocolCategory> categories;
  const Json& arr = require_array(doc, "categories", "schema");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "schema.categories[" + std::to_string(i) + "]";
    categories.push_back({require_string(arr[i], "key", path), require_string(arr[i], "title", path),
                          require_string(arr[i], "scope_description", path)});
  }
  return ProtocolSchema(require_string(doc, "name", "schema"),
                        optional_string(doc, "version", "schema").value_or("1.0"),
                        std::move(categories));
}

ProtocolSchema ProtocolSchema::load(const std::filesystem::path& path) {
  return from_json(parse_json(io::read_file(path), path.string()));
}

Json ProtocolSchema::to_json() const {
  Json cats = Json::array();
  for (const auto& c : categories_) {
    cats.push_back({{"key", c.key}, {"title", c.title}, {"scope_description", c.scope_description}});
  }
  return {{"name", name_}, {"version", version_}, {"categories", std::move(cats)}};
}

const ProtocolCategory* ProtocolSchema::find(std::string_view key) const {
  for (const auto& c : categories_) {
    if (c.key == key) return &c;
  }
  return nullptr;
}

std::vector<std::string> ProtocolSchema::keys() const {
  std::vector<std::string> out;
  for (const auto& c : categories_) out.push_back(c.key);
  return out;
}

std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::kPresent:
      return "present";
    case Polarity::kAbsent:
      return "absent";
    case Polarity::kUncertain:
      return "uncertain";
  }
  return "present";
}

Polarity polarity_from_string(std::string_view s) {
  if (s == "present") return Polarity::kPresent;
  if (s == "absent") return Polarity::kAbsent;
  if (s == "uncertain") return Polarity::kUncertain;
  throw Error(ErrorCode::kParseError, "unknown polarity '" + std::string(s) + "'");
}

MedicalConcept MedicalConcept::make(std::string text, std::string source_sentence,
                                    Polarity polarity) {
  MedicalConcept c;
  c.normalized = text::normalize_concept(text);
  c.text = std::move(text);
  c.source_sentence = std::move(source_sentence);
  c.polarity = polarity;
  return c;
}

StructuredReport StructuredReport::empty_for(const ProtocolSchema& schema) {
  StructuredReport r;
  r.protocol_name = schema.name();
  for (const auto& c : schema.categories()) r.sections.push_back({c.key, c.title, {}});
  return r;
}

const ReportSection* StructuredReport::section(std::string_view key) const {
  for (const auto& s : sections) {
    if (s.key == key) return &s;
  }
  return nullptr;
}

std::size_t StructuredReport::finding_count() const {
  std::size_t n = 0;
  for (const auto& s : sections) n += s.findings.size();
  return n;
}

std::string ValidationResult::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.rule;
    if (!v.location.empty() && v.rule.find(v.location) == std::string::npos) {
      out += " (" + v.location + ")";
    }
  }
  return out;
}

ValidationResult validate_structured_report(const StructuredReport& report,
                                            const ProtocolSchema& schema) {
  ValidationResult result;
  auto add = [&](std::string location, std::string rule) {
    result.violations.push_back({std::move(location), std::move(rule)});
  };

  if (report.protocol_name != schema.name()) {
    add("report", "protocol mismatch: expected " + schema.name() + ", got " + report.protocol_name);
  }

  std::map<std::string, int> counts;
  for (const auto& s : report.sections) ++counts[s.key];
  for (const auto& c : schema.categories()) {
    if (counts[c.key] == 0) add("section " + c.key, "missing section " + c.key);
    if (counts[c.key] > 1) add("section " + c.key, "duplicate section " + c.key);
  }
  for (const auto& s : report.sections) {
    if (!schema.has_key(s.key)) add("section " + s.key, "unexpected section " + s.key);
  }

  // Order is only meaningful once the key multiset matches the schema.
  if (result.ok() && report.sections.size() == schema.categories().size()) {
    for (std::size_t i = 0; i < report.sections.size(); ++i) {
      const auto& expected = schema.categories()[i].key;
      if (report.sections[i].key != expected) {
        add("section " + report.sections[i].key,
            "section order: expected " + expected + " at position " + std::to_string(i + 1));
        break;
      }
    }
  }

  for (const auto& s : report.sections) {
    if (s.title.empty()) add("section " + s.key, "missing title");
    for (std::size_t i = 0; i < s.findings.size(); ++i) {
      const Finding& f = s.findings[i];
      const std::string where = "section " + s.key + " finding " + std::to_string(i + 1);
      if (f.text.empty()) add(where, "empty finding text");
      bool grounded = !f.source_sentences.empty();
      for (const auto& sent : f.source_sentences) grounded = grounded && !sent.empty();
      if (!grounded) add(where, "ungrounded finding");
    }
  }
  return result;
}

ValidationResult check_grounding(const StructuredReport& report, std::string_view source_text) {
  ValidationResult result;
  for (const auto& s : report.sections) {
    for (std::size_t i = 0; i < s.findings.size(); ++i) {
      for (const auto& sent : s.findings[i].source_sentences) {
        if (!text::contains_normalized(source_text, sent)) {
          result.violations.push_back({"section " + s.key + " finding " + std::to_string(i + 1),
                                       "source sentence not in report: \"" + sent + "\""});
        }
      }
    }
  }
  return result;
}

Json to_json(const MedicalConcept& c) {
  return {{"text", c.text},
          {"normalized", c.normalized},
          {"source_sentence", c.source_sentence},
          {"polarity", std::string(to_string(c.polarity))}};
}

Json to_json(const CategorizedConcept& c) {
  Json j = {{"concept", to_json(c.term)}, {"category", c.category_key}, {"rationale", c.rationale}};
  j["primary_ontology_id"] = c.primary_ontology_id ? Json(*c.primary_ontology_id) : Json(nullptr);
  return j;
}

Json to_json(const StructuredReport& r) {
  Json sections = Json::array();
  for (const auto& s : r.sections) {
    Json findings = Json::array();
    for (const auto& f : s.findings) {
      findings.push_back(
          {{"text", f.text}, {"concepts", f.concept_refs}, {"source_sentences", f.source_sentences}});
    }
    sections.push_back({{"key", s.key}, {"title", s.title}, {"findings", std::move(findings)}});
  }
  return {{"protocol_name", r.protocol_name}, {"sections", std::move(sections)}};
}

MedicalConcept concept_from_json(const Json& j, const std::string& path) {
  if (j.is_string()) return MedicalConcept::make(j.get<std::string>());
  MedicalConcept c;
  c.text = require_string(j, "text", path);
  if (c.text.empty()) throw Error(ErrorCode::kParseError, path + ".text: empty concept text");
  c.normalized = text::normalize_concept(c.text);
  c.source_sentence = optional_string(j, "source_sentence", path).value_or("");
  if (auto p = optional_string(j, "polarity", path)) c.polarity = polarity_from_string(*p);
  return c;
}

CategorizedConcept categorized_from_json(const Json& j, const std::string& path) {
  CategorizedConcept c;
  c.term = concept_from_json(require_field(j, "concept", path), path + ".concept");
  c.category_key = require_string(j, "category", path);
  c.rationale = optional_string(j, "rationale", path).value_or("");
  c.primary_ontology_id = optional_string(j, "primary_ontology_id", path);
  return c;
}

namespace {

std::vector<std::string> string_list(const Json& obj, std::string_view key, const std::string& path) {
  const Json& arr = require_array(obj, key, path);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      throw Error(ErrorCode::kParseError,
                  path + "." + std::string(key) + "[" + std::to_string(i) + "]: expected string");
    }
    out.push_back(arr[i].get<std::string>());
  }
  return out;
}

}  // namespace

StructuredReport report_from_json(const Json& j) {
  StructuredReport r;
  r.protocol_name = require_string(j, "protocol_name", "report");
  const Json& sections = require_array(j, "sections", "report");
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const std::string spath = "report.sections[" + std::to_string(i) + "]";
    ReportSection s;
    s.key = require_string(sections[i], "key", spath);
    s.title = require_string(sections[i], "title", spath);
    const Json& findings = require_array(sections[i], "findings", spath);
    for (std::size_t k = 0; k < findings.size(); ++k) {
      const std::string fpath = spath + ".findings[" + std::to_string(k) + "]";
      Finding f;
      f.text = require_string(findings[k], "text", fpath);
      f.concept_refs = string_list(findings[k], "concepts", fpath);
      f.source_sentences = string_list(findings[k], "source_sentences", fpath);
      s.findings.push_back(std::move(f));
    }
    r.sections.push_back(std::move(s));
  }
  return r;
}

std::string serialize_report(const StructuredReport& report) {
  return dump_pretty(to_json(report));
}

StructuredReport deserialize_report(std::string_view document) {
  return report_from_json(parse_json(document, "report document"));
}

std::string render_report_text(const StructuredReport& report) {
  std::ostringstream out;
  out << report.protocol_name << " structured report\n";
  for (const auto& s : report.sections) {
    out << "\n" << s.key << ". " << s.title << "\n";
    if (s.findings.empty()) {
      out << "  - " << kNoFindingsMarker << "\n";
      continue;
    }
    for (const auto& f : s.findings) out << "  - " << f.text << "\n";
  }
  return out.str();
}

}  // namespace paostruct
