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

// Run configuration loaded from a KEY=VALUE environment file.
//
// Precedence, highest first: explicit overrides (CLI), process environment,
// file, built-in defaults. Keys the loader does not recognise are kept in
// RunConfig::game_params so game-specific settings need no schema change.

#ifndef PERSONA_CONFIG_H_
#define PERSONA_CONFIG_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace persona {

using Seconds = std::chrono::duration<double>;

struct ModelEndpoint {
  std::string model_name;
  std::optional<std::string> base_url;
  std::optional<std::string> api_key;

  bool operator==(const ModelEndpoint&) const = default;
};

// Knobs that have invented defaults. All are overridable by key.
struct Tuning {
  Seconds llm_timeout{60.0};              // LLM_TIMEOUT_S
  int llm_max_attempts = 3;               // LLM_MAX_ATTEMPTS
  Seconds llm_backoff{1.0};               // LLM_BACKOFF_S
  double instruction_temperature = 0.7;   // INSTRUCTION_TEMPERATURE
  double code_temperature = 0.2;          // CODE_TEMPERATURE
  int max_tokens = 1024;                  // MAX_TOKENS
  Seconds status_timeout{30.0};           // STATUS_TIMEOUT_S
  Seconds action_timeout{120.0};          // ACTION_TIMEOUT_S
  Seconds code_timeout{30.0};             // CODE_TIMEOUT_S
  Seconds executor_grace{2.0};            // EXECUTOR_GRACE_S
  int skill_max_rounds = 3;               // SKILL_MAX_ROUNDS
  int failure_streak_limit = 3;           // FAILURE_STREAK_LIMIT
  int revision_rounds = 3;                // REVISION_ROUNDS
  int reparse_attempts = 2;               // REPARSE_ATTEMPTS
  std::size_t log_budget_bytes = 8192;    // LOG_BUDGET_BYTES
  int embedding_dim = 64;                 // EMBEDDING_DIM
  int max_iterations = 0;                 // MAX_ITERATIONS, 0 = unbounded

  bool operator==(const Tuning&) const = default;
};

struct RunConfig {
  std::string game_subject;
  std::string personality;
  std::string agent_name;
  std::chrono::milliseconds exp_duration{std::chrono::minutes(125)};
  bool is_continued = true;
  ModelEndpoint instruction_model{"openai/gpt-4o", std::nullopt, std::nullopt};
  std::optional<ModelEndpoint> code_model;
  std::optional<ModelEndpoint> embedding_model;
  bool is_plan_to_code = false;
  std::string translator = "plan_to_parameters";
  std::string code_executor = "dungeon";
  std::string bridge_host = "localhost";
  int bridge_port = 1111;
  int retrieval_k = 5;
  std::filesystem::path memory_root = "memory";
  Tuning tuning;
  std::map<std::string, std::string> game_params;

  bool operator==(const RunConfig&) const = default;

  // The testing objective, if any: game_params TASK or the first key
  // ending in _TASK (e.g. MC_TASK). Absent means free exploration.
  std::optional<std::string> objective() const;
};

using ConfigOverrides = std::map<std::string, std::string>;

// Parses an environment file. Throws ConfigError naming the missing key or
// the offending line.
RunConfig load_config(const std::filesystem::path& path,
                      const ConfigOverrides& overrides = {});

// Same as load_config over in-memory text; `source` labels error messages.
RunConfig parse_config(std::string_view text,
                       const ConfigOverrides& overrides = {},
                       std::string_view source = "<text>");

// Cross-field checks against the available personality names.
const RunConfig& validate_config(const RunConfig& cfg,
                                 const std::set<std::string>& personalities);

enum class Redaction { kRedactSecrets, kKeepSecrets };

// Serialises every field back to KEY=VALUE text that parse_config accepts.
std::string to_env_text(const RunConfig& cfg,
                        Redaction redaction = Redaction::kRedactSecrets);

// Keys with a fixed meaning; everything else lands in game_params.
const std::vector<std::string>& known_config_keys();

// Picks up process environment variables for known keys and for any key in
// `file_keys`. The result is meant to sit below CLI overrides.
ConfigOverrides environment_overrides(const std::set<std::string>& file_keys);

// Reads only the keys of a file, used to decide which environment variables
// may override it.
std::set<std::string> config_file_keys(const std::filesystem::path& path);

std::string redact(const std::optional<std::string>& secret);

}  // namespace persona

#endif  // PERSONA_CONFIG_H_
