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

#include "paostruct/ontology.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <thread>

#include "http_util.hpp"
#include "paostruct/error.hpp"
#include "paostruct/io.hpp"
#include "paostruct/text.hpp"

namespace paostruct::ontology {

namespace {

std::string last_segment(const std::string& uri) {
  const std::size_t at = uri.find_last_of("/#");
  return at == std::string::npos ? uri : uri.substr(at + 1);
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string cache_key(const std::string& normalized, std::vector<std::string> ontologies) {
  std::sort(ontologies.begin(), ontologies.end());
  std::string key = normalized + "|";
  for (std::size_t i = 0; i < ontologies.size(); ++i) key += (i ? "," : "") + ontologies[i];
  return key;
}

}  // namespace

Json AnnotatorHit::to_json() const {
  Json chain = Json::array();
  for (const auto& a : ancestors) chain.push_back({{"class_id", a.class_id}, {"label", a.label}});
  return {{"ontology", ontology},
          {"class_id", class_id},
          {"preferred_label", preferred_label},
          {"match", {match_begin, match_end}},
          {"ancestors", std::move(chain)}};
}

AnnotatorHit AnnotatorHit::from_json(const Json& j, const std::string& path) {
  AnnotatorHit h;
  h.ontology = require_string(j, "ontology", path);
  h.class_id = require_string(j, "class_id", path);
  h.preferred_label = optional_string(j, "preferred_label", path).value_or("");
  const Json& m = require_field(j, "match", path);
  if (!m.is_array() || m.size() != 2 || !m[0].is_number_unsigned() || !m[1].is_number_unsigned()) {
    throw Error(ErrorCode::kParseError, path + ".match: expected [begin, end]");
  }
  h.match_begin = m[0].get<std::size_t>();
  h.match_end = m[1].get<std::size_t>();
  if (auto a = j.find("ancestors"); a != j.end()) {
    for (const auto& e : *a) {
      h.ancestors.push_back({require_string(e, "class_id", path + ".ancestors"),
                             optional_string(e, "label", path + ".ancestors").value_or("")});
    }
  }
  return h;
}

bool AnnotatorHit::valid_for(std::string_view query) const {
  if (match_begin > match_end || match_end > query.size()) return false;
  std::set<std::string> ids{class_id};
  for (const auto& a : ancestors) {
    if (!ids.insert(a.class_id).second) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Fixture

std::shared_ptr<FixtureBackend> FixtureBackend::load(const std::filesystem::path& path) {
  std::string body;
  try {
    body = io::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigError, "ontology fixture " + e.detail());
  }
  try {
    return from_json(parse_json(body, path.string()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigError) throw;
    throw Error(ErrorCode::kConfigError, "ontology fixture: " + e.detail());
  }
}

std::shared_ptr<FixtureBackend> FixtureBackend::from_json(const Json& doc) {
  auto fx = std::make_shared<FixtureBackend>();
  const Json& classes = require_field(doc, "classes", "fixture");
  for (const auto& [id, info] : classes.items()) {
    const std::string path = "fixture.classes." + id;
    ClassInfo c;
    c.label = require_string(info, "label", path);
    c.ontology = require_string(info, "ontology", path);
    const auto parent = info.find("parent");
    if (parent != info.end() && !parent->is_null()) c.parent = parent->get<std::string>();
    fx->classes_.emplace(id, std::move(c));
  }
  for (const auto& [id, c] : fx->classes_) {
    std::set<std::string> seen{id};
    for (std::string cur = c.parent; !cur.empty();) {
      auto it = fx->classes_.find(cur);
      if (it == fx->classes_.end()) {
        throw Error(ErrorCode::kConfigError, "fixture class " + id + ": unknown ancestor " + cur);
      }
      if (!seen.insert(cur).second) {
        throw Error(ErrorCode::kConfigError, "fixture class " + id + ": ancestor cycle through " + cur);
      }
      cur = it->second.parent;
    }
  }
  const Json& terms = require_field(doc, "terms", "fixture");
  for (const auto& [term, ids] : terms.items()) {
    const std::string normalized = text::normalize_concept(term);
    if (normalized != term) {
      throw Error(ErrorCode::kConfigError, "fixture term '" + term + "' is not normalized (expected '" +
                                               normalized + "')");
    }
    auto& list = fx->terms_[normalized];
    for (const auto& id : ids) {
      const std::string cid = id.get<std::string>();
      if (!fx->classes_.count(cid)) {
        throw Error(ErrorCode::kConfigError, "fixture term '" + term + "' references unknown class " + cid);
      }
      list.push_back(cid);
    }
  }
  return fx;
}

std::vector<AnnotatorHit> FixtureBackend::annotate(const std::string& query,
                                                   const std::vector<std::string>& ontologies) {
  std::vector<AnnotatorHit> hits;
  for (const auto& [term, ids] : terms_) {
    for (std::size_t at = query.find(term); at != std::string::npos; at = query.find(term, at + 1)) {
      const bool left = at == 0 || query[at - 1] == ' ';
      const bool right = at + term.size() == query.size() || query[at + term.size()] == ' ';
      if (!left || !right) continue;
      for (const auto& id : ids) {
        const ClassInfo& c = classes_.at(id);
        if (std::find(ontologies.begin(), ontologies.end(), c.ontology) == ontologies.end()) continue;
        AnnotatorHit h{c.ontology, id, c.label, at, at + term.size(), ancestors(id)};
        hits.push_back(std::move(h));
      }
    }
  }
  std::sort(hits.begin(), hits.end(), [](const AnnotatorHit& a, const AnnotatorHit& b) {
    return std::tie(a.match_begin, b.match_end, a.class_id) < std::tie(b.match_begin, a.match_end, b.class_id);
  });
  // A class matched by nested terms keeps its first (widest) span.
  std::set<std::string> seen;
  hits.erase(std::remove_if(hits.begin(), hits.end(),
                            [&](const AnnotatorHit& h) { return !seen.insert(h.class_id).second; }),
             hits.end());
  return hits;
}

std::vector<AncestorRef> FixtureBackend::ancestors(const std::string& class_id) {
  auto it = classes_.find(class_id);
  if (it == classes_.end()) throw Error(ErrorCode::kNotFound, "unknown class id " + class_id);
  std::vector<AncestorRef> chain;
  for (std::string cur = it->second.parent; !cur.empty();) {
    const ClassInfo& c = classes_.at(cur);
    chain.push_back({cur, c.label});
    cur = c.parent;
  }
  return chain;
}

std::vector<std::string> FixtureBackend::terms() const {
  std::vector<std::string> out;
  for (const auto& [t, _] : terms_) out.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// Remote

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  http::split_url(config_.base_url);
}

std::vector<AnnotatorHit> RemoteBackend::translate_response(const Json& body, const std::string& query) {
  if (!body.is_array()) throw Error(ErrorCode::kAnnotatorUnavailable, "annotator response is not a list");
  std::vector<AnnotatorHit> hits;
  std::set<std::pair<std::string, std::size_t>> seen;
  for (const auto& ann : body) {
    const Json& cls = ann.value("annotatedClass", Json::object());
    const std::string uri = cls.value("@id", "");
    if (uri.empty()) continue;
    std::string onto;
    if (cls.contains("links") && cls["links"].contains("ontology")) {
      onto = upper(last_segment(cls["links"]["ontology"].get<std::string>()));
    }
    const std::string class_id = onto + ":" + last_segment(uri);

    std::vector<std::pair<int, AncestorRef>> levels;
    for (const auto& h : ann.value("hierarchy", Json::array())) {
      const Json& hc = h.value("annotatedClass", Json::object());
      levels.push_back({h.value("distance", 0),
                        {onto + ":" + last_segment(hc.value("@id", "")), hc.value("prefLabel", "")}});
    }
    std::stable_sort(levels.begin(), levels.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<AncestorRef> chain;
    std::set<std::string> chain_ids{class_id};
    for (auto& [d, a] : levels) {
      if (chain_ids.insert(a.class_id).second) chain.push_back(std::move(a));
    }

    for (const auto& m : ann.value("annotations", Json::array())) {
      // The service reports 1-based inclusive offsets.
      const auto from = m.value("from", 1);
      const auto to = m.value("to", 0);
      if (from < 1 || to < from || static_cast<std::size_t>(to) > query.size()) continue;
      if (!seen.insert({class_id, static_cast<std::size_t>(from)}).second) continue;
      hits.push_back({onto, class_id, cls.value("prefLabel", ""), static_cast<std::size_t>(from - 1),
                      static_cast<std::size_t>(to), chain});
    }
  }
  return hits;
}

std::vector<AnnotatorHit> RemoteBackend::annotate(const std::string& query,
                                                  const std::vector<std::string>& ontologies) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw Error(ErrorCode::kAnnotatorUnavailable, "environment variable " + config_.api_key_env + " is not set");
  }
  const http::Target target = http::split_url(config_.base_url);
  auto client = http::make_client(target, config_.timeout);
  std::string onto_list;
  for (std::size_t i = 0; i < ontologies.size(); ++i) onto_list += (i ? "," : "") + ontologies[i];
  const httplib::Params params = {{"text", query},
                                  {"ontologies", onto_list},
                                  {"include", "prefLabel"},
                                  {"expand_class_hierarchy", "true"},
                                  {"class_hierarchy_max_level", std::to_string(config_.hierarchy_depth)}};
  const httplib::Headers headers = {{"Authorization", std::string("apikey token=") + key}};
  std::string path = target.path;
  if (path.empty() || path.back() != '/') path += '/';
  path += "annotator";

  std::string failure = "no attempt made";
  auto backoff = config_.initial_backoff;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client->Get(path, params, headers);
    if (!res) {
      failure = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      Json body;
      try {
        body = Json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kAnnotatorUnavailable, std::string("unparseable annotator response: ") + e.what());
      }
      auto hits = translate_response(body, query);
      std::lock_guard lock(mu_);
      for (const auto& h : hits) seen_[h.class_id] = h.ancestors;
      return hits;
    }
    failure = "HTTP " + std::to_string(res->status);
    if (!http::is_transient(res->status)) break;
  }
  throw Error(ErrorCode::kAnnotatorUnavailable, "annotator request failed (" + failure + ")");
}

std::vector<AncestorRef> RemoteBackend::ancestors(const std::string& class_id) {
  std::lock_guard lock(mu_);
  auto it = seen_.find(class_id);
  if (it == seen_.end()) throw Error(ErrorCode::kNotFound, "class " + class_id + " not seen in any annotation");
  return it->second;
}

// ---------------------------------------------------------------------------
// Client

OntologyClient::OntologyClient(std::shared_ptr<AnnotatorBackend> backend, std::vector<std::string> ontologies,
                               std::optional<std::filesystem::path> cache_path)
    : backend_(std::move(backend)), ontologies_(std::move(ontologies)), cache_path_(std::move(cache_path)) {
  if (!backend_) throw Error(ErrorCode::kConfigError, "ontology client requires a backend");
  for (const auto& o : ontologies_) {
    if (std::find(kSupportedOntologies.begin(), kSupportedOntologies.end(), o) == kSupportedOntologies.end()) {
      throw Error(ErrorCode::kConfigError, "unsupported ontology '" + o + "'");
    }
  }
  if (cache_path_ && std::filesystem::exists(*cache_path_)) {
    const Json doc = parse_json(io::read_file(*cache_path_), cache_path_->string());
    const Json entries = doc.value("entries", Json::object());
    for (const auto& [key, hits] : entries.items()) {
      auto& list = cache_[key];
      for (const auto& h : hits) list.push_back(AnnotatorHit::from_json(h, "ontology cache"));
    }
  }
}

std::vector<AnnotatorHit> OntologyClient::annotate(const std::string& text) { return annotate(text, ontologies_); }

std::vector<AnnotatorHit> OntologyClient::annotate(const std::string& text, std::vector<std::string> ontologies) {
  for (const auto& o : ontologies) {
    if (std::find(ontologies_.begin(), ontologies_.end(), o) == ontologies_.end()) {
      throw Error(ErrorCode::kInvalidArgument, "ontology '" + o + "' is not configured");
    }
  }
  const std::string normalized = text::normalize_concept(text);
  if (normalized.empty()) return {};
  const std::string key = cache_key(normalized, ontologies);

  std::promise<std::vector<AnnotatorHit>> promise;
  {
    std::unique_lock lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      ++cache_hits_;
      return it->second;
    }
    if (auto it = inflight_.find(key); it != inflight_.end()) {
      auto shared = it->second;
      lock.unlock();
      ++cache_hits_;
      return shared.get();
    }
    inflight_.emplace(key, promise.get_future().share());
  }

  try {
    ++backend_calls_;
    auto hits = backend_->annotate(normalized, ontologies);
    std::lock_guard lock(mu_);
    cache_[key] = hits;
    inflight_.erase(key);
    promise.set_value(hits);
    persist_locked();
    return hits;
  } catch (...) {
    std::lock_guard lock(mu_);
    inflight_.erase(key);
    promise.set_exception(std::current_exception());
    throw;
  }
}

std::vector<AncestorRef> OntologyClient::ancestors(const std::string& class_id) {
  return backend_->ancestors(class_id);
}

void OntologyClient::persist_locked() {
  if (!cache_path_) return;
  Json entries = Json::object();
  for (const auto& [key, hits] : cache_) {
    Json list = Json::array();
    for (const auto& h : hits) list.push_back(h.to_json());
    entries[key] = std::move(list);
  }
  io::write_file_atomic(*cache_path_, dump_pretty({{"version", 1}, {"entries", std::move(entries)}}));
}

}  // namespace paostruct::ontology
