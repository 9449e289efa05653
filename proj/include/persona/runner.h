// Copyright 2026 The Persona Agent Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The agent session: observe, retrieve, plan, act, summarize, remember.

#ifndef PERSONA_RUNNER_H_
#define PERSONA_RUNNER_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "persona/bridge.h"
#include "persona/config.h"
#include "persona/embedding.h"
#include "persona/executor.h"
#include "persona/gateway.h"
#include "persona/memory.h"

namespace persona {

struct IterationRecord {
  std::int64_t index = 0;
  std::string mode;  // bottom_up or top_down
  std::string plan;  // canonical plan JSON; empty when planning failed
  Outcome outcome = Outcome::kFailure;
  std::string memory_id;
  std::chrono::milliseconds latency{0};
  std::int64_t gateway_calls = 0;
  bool timed_out = false;
  std::optional<std::string> skill;  // synthesized this iteration
  // Faults that failed the iteration without ending the run.
  std::vector<std::string> faults;

  bool operator==(const IterationRecord&) const = default;
};

enum class StopReason { kDurationElapsed, kIterationLimit, kEnvDisconnect, kFatalError };

std::string_view to_string(StopReason reason);
std::optional<StopReason> parse_stop_reason(std::string_view text);

struct RunReport {
  std::string agent_name;
  std::string personality;
  std::string game_subject;
  Timestamp started{};
  Timestamp ended{};
  std::vector<IterationRecord> iterations;
  StopReason stop_reason = StopReason::kFatalError;
  std::string message;
  std::int64_t memories_at_start = 0;
  std::int64_t memories_at_end = 0;
  std::int64_t skills_at_end = 0;

  bool operator==(const RunReport&) const = default;
};

// True once the session has used its time budget. Only consulted between
// iterations.
bool stop_check(std::chrono::steady_clock::time_point started,
                std::chrono::milliseconds exp_duration,
                std::chrono::steady_clock::time_point now);

// One JSON line per iteration, then a summary line.
std::string report_to_jsonl(const RunReport& report);
RunReport report_from_jsonl(std::string_view text);
void write_report(const RunReport& report, const std::filesystem::path& path);
RunReport read_report(const std::filesystem::path& path);

// Where the runner finds its game assets. Every directory defaults to a
// subdirectory of data_dir:
//   personalities/<trait>.txt   entities.tsv
//   games/<GAME>/{capabilities.tsv, entity_mapping.tsv, game_spec.txt,
//                 payload_mapping.tsv (optional)}
//   templates/<GAME>/<role>.txt
//   skills/<GAME>/{manifest.tsv, <name>.dsl}
struct AssetPaths {
  std::filesystem::path data_dir;
  std::optional<std::filesystem::path> custom_personalities;
  std::optional<std::filesystem::path> templates;
  std::optional<std::filesystem::path> skills;

  std::filesystem::path personalities_dir() const;
  std::filesystem::path entities_file() const;
  std::filesystem::path game_dir(const std::string& game) const;
  std::filesystem::path templates_root() const;
  std::filesystem::path skills_dir(const std::string& game) const;
};

// Basic skills from `<dir>/manifest.tsv` (name<TAB>description[<TAB>deps])
// with bodies in `<dir>/<name>.dsl`. Missing entries are stored; existing
// ones are left alone. Returns how many were added.
int seed_basic_skills(MemoryStore& store, const Embedder& embedder,
                      const std::filesystem::path& dir);

struct RunDependencies {
  AssetPaths assets;
  // Built from the config when null.
  std::shared_ptr<LlmBackend> instruction_backend;
  std::shared_ptr<LlmBackend> code_backend;
  std::shared_ptr<Embedder> embedder;
  TranslatorRegistry translators;
  std::map<std::string, std::shared_ptr<CodeExecutor>> code_executors;
  std::shared_ptr<Transcript> transcript;
  std::ostream* log = nullptr;
  // How long to wait for the environment to connect; negative is forever.
  Seconds connect_timeout{-1.0};
  // Called once the bridge listens, with the bound port.
  std::function<void(int)> on_listening;
  // Called after each iteration's memory is stored.
  std::function<void(const IterationRecord&)> on_iteration;
  // Replaces the sleep between retries.
  std::function<void(Seconds)> retry_sleep;
};

// Setup problems (bad assets, unknown translator, busy port) throw; once
// the environment is connected every outcome is reported.
RunReport run(const RunConfig& cfg, RunDependencies deps);

}  // namespace persona

#endif  // PERSONA_RUNNER_H_
