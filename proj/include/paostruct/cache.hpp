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

// Persistent concept -> category cache backed by an append-only record log.
//
// File layout: a header line {"format":"paostruct-concept-cache","version":1}
// followed by one JSON record per line:
//   {"op":"put","key":..,"text":..,"category":..,"label":..,"id":..,"created_at":..,"hits":..}
//   {"op":"hits","key":..,"add":N}
//   {"op":"clear"}
// The log is replayed and compacted (temp file + rename) on open.

#ifndef PAOSTRUCT_CACHE_HPP_
#define PAOSTRUCT_CACHE_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paostruct/json.hpp"

namespace paostruct::cache {

inline constexpr std::string_view kFormatName = "paostruct-concept-cache";
inline constexpr int kFormatVersion = 1;

struct CacheEntry {
  std::string key;  // normalize_concept(original)
  std::string original;
  std::string category_key;
  std::string primary_ontology_label;
  std::optional<std::string> primary_ontology_id;
  std::int64_t created_at = 0;  // unix seconds
  std::int64_t hit_count = 0;

  Json to_json() const;
  bool operator==(const CacheEntry&) const = default;
};

struct CacheStats {
  std::size_t entries = 0;
  std::int64_t total_hits = 0;
};

class ConceptCache {
 public:
  // In-memory only.
  ConceptCache();
  // Opens (creating if absent) and compacts the log at `path`. A damaged
  // log throws Error(kCacheCorrupt) naming the line; nothing is read
  // partially.
  explicit ConceptCache(std::filesystem::path path);
  ~ConceptCache();
  ConceptCache(const ConceptCache&) = delete;
  ConceptCache& operator=(const ConceptCache&) = delete;

  // Lookup under key normalization; a hit bumps the entry's hit count.
  std::optional<CacheEntry> check(std::string_view concept_text);
  // Lookup without touching hit counts.
  std::optional<CacheEntry> peek(std::string_view concept_text) const;
  // Last write wins.
  void put(std::string_view concept_text, const std::string& category_key,
           const std::string& primary_ontology_label,
           const std::optional<std::string>& primary_ontology_id = std::nullopt);
  void clear();

  // Appends pending hit-count deltas and fsyncs the log.
  void flush();

  CacheStats stats() const;
  std::vector<CacheEntry> entries() const;  // sorted by key
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  using Map = std::map<std::string, CacheEntry, std::less<>>;

  std::shared_ptr<const Map> snapshot() const;
  void publish(std::shared_ptr<const Map> next);
  void append_locked(const Json& record);
  void rewrite_locked(const Map& map);
  void flush_locked();

  std::optional<std::filesystem::path> path_;
  int fd_ = -1;
  mutable std::mutex write_mu_;
  std::shared_ptr<const Map> map_;  // replaced wholesale; read with atomic_load
  mutable std::mutex hits_mu_;
  std::map<std::string, std::int64_t> pending_hits_;
  std::map<std::string, std::int64_t> hit_counts_;
};

}  // namespace paostruct::cache

#endif  // PAOSTRUCT_CACHE_HPP_
