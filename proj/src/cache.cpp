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

#include "paostruct/cache.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <ctime>

#include "paostruct/error.hpp"
#include "paostruct/io.hpp"
#include "paostruct/text.hpp"

namespace paostruct::cache {

namespace {

Json header() { return {{"format", kFormatName}, {"version", kFormatVersion}}; }

Error corrupt(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  return Error(ErrorCode::kCacheCorrupt,
               path.string() + " line " + std::to_string(line) + ": " + what +
                   "; move the file aside or run `cache clear` to start fresh");
}

}  // namespace

Json CacheEntry::to_json() const {
  return {{"key", key},
          {"text", original},
          {"category", category_key},
          {"label", primary_ontology_label},
          {"id", primary_ontology_id ? Json(*primary_ontology_id) : Json()},
          {"created_at", created_at},
          {"hits", hit_count}};
}

ConceptCache::ConceptCache() : map_(std::make_shared<const Map>()) {}

ConceptCache::ConceptCache(std::filesystem::path path) : path_(std::move(path)) {
  Map map;
  std::string body;
  if (std::filesystem::exists(*path_)) body = io::read_file(*path_);
  if (!body.empty()) {
    if (body.back() != '\n') {
      const std::size_t lines = static_cast<std::size_t>(std::count(body.begin(), body.end(), '\n')) + 1;
      throw corrupt(*path_, lines, "truncated final record");
    }
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < body.size()) {
      const std::size_t nl = body.find('\n', pos);
      const std::string_view line = std::string_view(body).substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      Json rec;
      try {
        rec = Json::parse(line.begin(), line.end());
      } catch (const nlohmann::json::exception&) {
        throw corrupt(*path_, line_no, "not a JSON record");
      }
      if (!rec.is_object()) throw corrupt(*path_, line_no, "not a JSON object");
      if (line_no == 1) {
        if (rec.value("format", "") != kFormatName) throw corrupt(*path_, 1, "missing cache header");
        if (rec.value("version", 0) != kFormatVersion) {
          throw corrupt(*path_, 1, "unsupported record version " + rec.value("version", Json()).dump());
        }
        continue;
      }
      try {
        const std::string op = rec.at("op").get<std::string>();
        if (op == "put") {
          CacheEntry e;
          e.key = rec.at("key").get<std::string>();
          e.original = rec.value("text", e.key);
          e.category_key = rec.at("category").get<std::string>();
          e.primary_ontology_label = rec.value("label", "");
          if (rec.contains("id") && rec["id"].is_string()) e.primary_ontology_id = rec["id"].get<std::string>();
          e.created_at = rec.value("created_at", std::int64_t{0});
          if (e.key.empty() || e.category_key.empty()) throw corrupt(*path_, line_no, "empty key or category");
          if (rec.contains("hits")) hit_counts_[e.key] = rec["hits"].get<std::int64_t>();
          map.insert_or_assign(e.key, std::move(e));
        } else if (op == "hits") {
          hit_counts_[rec.at("key").get<std::string>()] += rec.at("add").get<std::int64_t>();
        } else if (op == "clear") {
          map.clear();
          hit_counts_.clear();
        } else {
          throw corrupt(*path_, line_no, "unknown op '" + op + "'");
        }
      } catch (const nlohmann::json::exception&) {
        throw corrupt(*path_, line_no, "record is missing fields");
      }
    }
  }
  // Hit records for keys that no longer exist carry no information.
  for (auto it = hit_counts_.begin(); it != hit_counts_.end();) {
    it = map.count(it->first) ? std::next(it) : hit_counts_.erase(it);
  }
  std::lock_guard lock(write_mu_);
  rewrite_locked(map);
  map_ = std::make_shared<const Map>(std::move(map));
}

ConceptCache::~ConceptCache() {
  try {
    flush();
  } catch (const Error&) {
    // best effort at shutdown
  }
  if (fd_ >= 0) ::close(fd_);
}

std::shared_ptr<const ConceptCache::Map> ConceptCache::snapshot() const { return std::atomic_load(&map_); }

void ConceptCache::publish(std::shared_ptr<const Map> next) { std::atomic_store(&map_, std::move(next)); }

std::optional<CacheEntry> ConceptCache::peek(std::string_view concept_text) const {
  const auto map = snapshot();
  auto it = map->find(text::normalize_concept(concept_text));
  if (it == map->end()) return std::nullopt;
  CacheEntry e = it->second;
  std::lock_guard lock(hits_mu_);
  if (auto h = hit_counts_.find(e.key); h != hit_counts_.end()) e.hit_count = h->second;
  return e;
}

std::optional<CacheEntry> ConceptCache::check(std::string_view concept_text) {
  const auto map = snapshot();
  auto it = map->find(text::normalize_concept(concept_text));
  if (it == map->end()) return std::nullopt;
  CacheEntry e = it->second;
  std::lock_guard lock(hits_mu_);
  e.hit_count = ++hit_counts_[e.key];
  ++pending_hits_[e.key];
  return e;
}

void ConceptCache::put(std::string_view concept_text, const std::string& category_key,
                       const std::string& primary_ontology_label,
                       const std::optional<std::string>& primary_ontology_id) {
  CacheEntry e;
  e.key = text::normalize_concept(concept_text);
  if (e.key.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot cache an empty concept");
  if (category_key.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot cache an empty category");
  e.original = text::collapse_whitespace(concept_text);
  e.category_key = category_key;
  e.primary_ontology_label = primary_ontology_label;
  e.primary_ontology_id = primary_ontology_id;
  e.created_at = static_cast<std::int64_t>(std::time(nullptr));

  std::lock_guard lock(write_mu_);
  Json rec = {{"op", "put"}, {"key", e.key},     {"text", e.original}, {"category", e.category_key},
              {"label", e.primary_ontology_label}, {"id", e.primary_ontology_id ? Json(*e.primary_ontology_id) : Json()},
              {"created_at", e.created_at}};
  append_locked(rec);
  auto next = std::make_shared<Map>(*snapshot());
  next->insert_or_assign(e.key, std::move(e));
  publish(std::move(next));
}

void ConceptCache::clear() {
  std::lock_guard lock(write_mu_);
  {
    std::lock_guard hl(hits_mu_);
    pending_hits_.clear();
    hit_counts_.clear();
  }
  rewrite_locked(Map{});
  publish(std::make_shared<const Map>());
}

void ConceptCache::flush() {
  std::lock_guard lock(write_mu_);
  flush_locked();
}

void ConceptCache::flush_locked() {
  std::map<std::string, std::int64_t> pending;
  {
    std::lock_guard hl(hits_mu_);
    pending.swap(pending_hits_);
  }
  for (const auto& [key, n] : pending) append_locked({{"op", "hits"}, {"key", key}, {"add", n}});
  if (fd_ >= 0 && ::fsync(fd_) != 0) {
    throw Error(ErrorCode::kCacheCorrupt, std::string("fsync cache log: ") + std::strerror(errno));
  }
}

CacheStats ConceptCache::stats() const {
  CacheStats s;
  s.entries = snapshot()->size();
  std::lock_guard lock(hits_mu_);
  for (const auto& [k, n] : hit_counts_) s.total_hits += n;
  return s;
}

std::vector<CacheEntry> ConceptCache::entries() const {
  const auto map = snapshot();
  std::vector<CacheEntry> out;
  std::lock_guard lock(hits_mu_);
  for (const auto& [k, e] : *map) {
    out.push_back(e);
    if (auto h = hit_counts_.find(k); h != hit_counts_.end()) out.back().hit_count = h->second;
  }
  return out;
}

void ConceptCache::append_locked(const Json& record) {
  if (!path_) return;
  const std::string line = dump_compact(record) + "\n";
  std::size_t off = 0;
  while (off < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::kCacheCorrupt, std::string("append to cache log: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

void ConceptCache::rewrite_locked(const Map& map) {
  if (!path_) return;
  std::string body = dump_compact(header()) + "\n";
  std::lock_guard hl(hits_mu_);
  for (const auto& [key, e] : map) {
    Json rec = {{"op", "put"}, {"key", e.key}, {"text", e.original}, {"category", e.category_key},
                {"label", e.primary_ontology_label},
                {"id", e.primary_ontology_id ? Json(*e.primary_ontology_id) : Json()},
                {"created_at", e.created_at}};
    auto h = hit_counts_.find(key);
    rec["hits"] = h == hit_counts_.end() ? 0 : h->second;
    body += dump_compact(rec) + "\n";
  }
  pending_hits_.clear();
  if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
  io::write_file_atomic(*path_, body);
  if (fd_ >= 0) ::close(fd_);
  fd_ = ::open(path_->c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (fd_ < 0) {
    throw Error(ErrorCode::kConfigError, "open cache log " + path_->string() + ": " + std::strerror(errno));
  }
}

}  // namespace paostruct::cache
