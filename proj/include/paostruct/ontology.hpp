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

// Ontology annotator access: a fixture backend for offline runs, a remote
// BioPortal-style backend, and a caching client in front of either.

#ifndef PAOSTRUCT_ONTOLOGY_HPP_
#define PAOSTRUCT_ONTOLOGY_HPP_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "paostruct/json.hpp"

namespace paostruct::ontology {

inline const std::vector<std::string> kSupportedOntologies = {"SNOMEDCT", "RADLEX"};

struct AncestorRef {
  std::string class_id;
  std::string label;

  bool operator==(const AncestorRef&) const = default;
};

struct AnnotatorHit {
  std::string ontology;
  std::string class_id;
  std::string preferred_label;
  std::size_t match_begin = 0;  // byte span into the query text
  std::size_t match_end = 0;
  std::vector<AncestorRef> ancestors;  // direct parent first, root last

  Json to_json() const;
  static AnnotatorHit from_json(const Json& j, const std::string& path = "hit");
  // Span within the query and no repeated class id along the chain.
  bool valid_for(std::string_view query) const;

  bool operator==(const AnnotatorHit&) const = default;
};

class AnnotatorBackend {
 public:
  virtual ~AnnotatorBackend() = default;
  // Hits for an already normalized query, restricted to `ontologies`.
  virtual std::vector<AnnotatorHit> annotate(const std::string& query,
                                             const std::vector<std::string>& ontologies) = 0;
  // Parent-to-root chain; throws Error(kNotFound) for unknown ids.
  virtual std::vector<AncestorRef> ancestors(const std::string& class_id) = 0;
  virtual std::string name() const = 0;
};

// Checked-in snapshot: class table (id -> label, ontology, parent) plus a
// term table (normalized term -> classes). A query is matched the way a
// dictionary annotator works: every fixture term that occurs in it at word
// boundaries yields hits spanning that occurrence.
class FixtureBackend : public AnnotatorBackend {
 public:
  // Throws Error(kConfigError) for a missing file, a dangling parent, or a
  // parent cycle.
  static std::shared_ptr<FixtureBackend> load(const std::filesystem::path& path);
  static std::shared_ptr<FixtureBackend> from_json(const Json& doc);

  std::vector<AnnotatorHit> annotate(const std::string& query,
                                     const std::vector<std::string>& ontologies) override;
  std::vector<AncestorRef> ancestors(const std::string& class_id) override;
  std::string name() const override { return "fixture"; }

  std::vector<std::string> terms() const;

 private:
  struct ClassInfo {
    std::string label;
    std::string ontology;
    std::string parent;
  };
  std::map<std::string, ClassInfo> classes_;
  std::map<std::string, std::vector<std::string>> terms_;  // normalized term -> class ids
};

struct RemoteConfig {
  std::string base_url = "https://data.bioontology.org";
  std::string api_key_env = "BIOPORTAL_API_KEY";
  std::chrono::milliseconds timeout{30'000};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  int hierarchy_depth = 10;
};

class RemoteBackend : public AnnotatorBackend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  std::vector<AnnotatorHit> annotate(const std::string& query,
                                     const std::vector<std::string>& ontologies) override;
  // Chains are known only for classes seen in earlier annotate() results.
  std::vector<AncestorRef> ancestors(const std::string& class_id) override;
  std::string name() const override { return "remote"; }

  // The single place that knows the annotator's response layout.
  static std::vector<AnnotatorHit> translate_response(const Json& body, const std::string& query);

 private:
  RemoteConfig config_;
  std::mutex mu_;
  std::map<std::string, std::vector<AncestorRef>> seen_;
};

struct ClientStats {
  std::int64_t backend_calls = 0;
  std::int64_t cache_hits = 0;
};

// Caches annotate() results by (normalized text, ontology set). Concurrent
// misses on one key share a single backend call. With a cache path the
// cache is loaded at construction and rewritten atomically on each miss.
class OntologyClient {
 public:
  OntologyClient(std::shared_ptr<AnnotatorBackend> backend,
                 std::vector<std::string> ontologies = kSupportedOntologies,
                 std::optional<std::filesystem::path> cache_path = std::nullopt);

  // `text` is normalized here; throws Error(kInvalidArgument) for an
  // ontology outside the configured set.
  std::vector<AnnotatorHit> annotate(const std::string& text);
  std::vector<AnnotatorHit> annotate(const std::string& text, std::vector<std::string> ontologies);
  std::vector<AncestorRef> ancestors(const std::string& class_id);

  ClientStats stats() const { return {backend_calls_.load(), cache_hits_.load()}; }
  const std::vector<std::string>& ontologies() const { return ontologies_; }

 private:
  void persist_locked();

  std::shared_ptr<AnnotatorBackend> backend_;
  std::vector<std::string> ontologies_;
  std::optional<std::filesystem::path> cache_path_;
  std::mutex mu_;
  std::map<std::string, std::vector<AnnotatorHit>> cache_;
  std::map<std::string, std::shared_future<std::vector<AnnotatorHit>>> inflight_;
  std::atomic<std::int64_t> backend_calls_{0};
  std::atomic<std::int64_t> cache_hits_{0};
};

}  // namespace paostruct::ontology

#endif  // PAOSTRUCT_ONTOLOGY_HPP_
