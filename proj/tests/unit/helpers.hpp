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


// Shared fixtures for the unit tests.

#ifndef PAOSTRUCT_TESTS_HELPERS_HPP_
#define PAOSTRUCT_TESTS_HELPERS_HPP_

#include <unistd.h>

#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "paostruct/config.hpp"
#include "paostruct/llm.hpp"

namespace testing {

inline const std::filesystem::path kData = PAOSTRUCT_TEST_DATA_DIR;
inline const std::filesystem::path kFixtures = PAOSTRUCT_TEST_FIXTURE_DIR;

// Answers from a per-role script, falling back to the stub engine. Every
// conversation it receives is recorded.
class ScriptedEngine : public paostruct::llm::ChatEngine {
 public:
  using Handler = std::function<std::string(const paostruct::Json& input, int call)>;

  explicit ScriptedEngine(std::shared_ptr<paostruct::llm::StubEngine> fallback = nullptr)
      : fallback_(std::move(fallback)) {}

  void on(paostruct::llm::Role role, Handler h) { handlers_[role] = std::move(h); }
  // Raw replies consumed in order before any handler.
  void queue(std::string reply) { queued_.push_back(std::move(reply)); }

  std::string generate(const std::vector<paostruct::llm::ChatMessage>& conversation) override {
    std::lock_guard lock(mu_);
    conversations.push_back(conversation);
    if (!queued_.empty()) {
      std::string r = queued_.front();
      queued_.pop_front();
      return r;
    }
    const std::string& first = conversation.front().content;
    const auto role = paostruct::llm::prompt_role(first);
    if (role) {
      if (auto it = handlers_.find(*role); it != handlers_.end()) {
        return it->second(paostruct::llm::prompt_input(first).value_or(paostruct::Json()), calls_[*role]++);
      }
    }
    if (fallback_) return fallback_->generate(conversation);
    return "no script";
  }
  std::string name() const override { return "scripted"; }

  std::vector<std::vector<paostruct::llm::ChatMessage>> conversations;

 private:
  std::shared_ptr<paostruct::llm::StubEngine> fallback_;
  std::map<paostruct::llm::Role, Handler> handlers_;
  std::map<paostruct::llm::Role, int> calls_;
  std::deque<std::string> queued_;
  std::mutex mu_;
};

inline std::shared_ptr<const paostruct::llm::Lexicon> lexicon() {
  static auto lex = std::make_shared<const paostruct::llm::Lexicon>(
      paostruct::llm::Lexicon::load(kData / "lexicon" / "abcdef_lexicon.json"));
  return lex;
}

inline paostruct::config::Runtime stub_runtime(bool cache_enabled = false) {
  auto cfg = paostruct::config::RunConfig::defaults();
  cfg.cache.enabled = cache_enabled;
  return paostruct::config::build_runtime(cfg, std::make_shared<paostruct::agent::StepClock>());
}

// Per-test scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("paostruct-unit-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace testing

#endif  // PAOSTRUCT_TESTS_HELPERS_HPP_
