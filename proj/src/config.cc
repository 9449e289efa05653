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

#include "persona/config.h"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "persona/error.h"
#include "persona/personality.h"
#include "util/strings.h"

namespace persona {
namespace {

struct RawValue {
  std::string value;
  std::string origin;  // "line 12" or "override"
};

using RawMap = std::map<std::string, RawValue>;

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(key[0])) || key[0] == '_')) {
    return false;
  }
  return std::all_of(key.begin(), key.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

std::string unquote(std::string value) {
  if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
      value.back() == value.front()) {
    return value.substr(1, value.size() - 2);
  }
  return value;
}

RawMap parse_lines(std::string_view text, std::string_view source) {
  RawMap raw;
  int line_no = 0;
  for (const auto& line : util::split_lines(text)) {
    ++line_no;
    std::string trimmed = util::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}: line {}: expected KEY=VALUE, got '{}'",
                                    source, line_no, trimmed));
    }
    std::string key = util::trim(trimmed.substr(0, eq));
    if (!valid_key(key)) {
      throw ConfigError(
          fmt::format("{}: line {}: invalid key '{}'", source, line_no, key));
    }
    raw[key] = RawValue{unquote(util::trim(trimmed.substr(eq + 1))),
                        fmt::format("line {}", line_no)};
  }
  return raw;
}

class Reader {
 public:
  Reader(const RawMap& raw, std::string_view source)
      : raw_(raw), source_(source) {}

  const RawValue* find(const std::string& key) {
    consumed_.insert(key);
    auto it = raw_.find(key);
    return it == raw_.end() ? nullptr : &it->second;
  }

  std::string required(const std::string& key) {
    const RawValue* v = find(key);
    if (v == nullptr) {
      throw ConfigError(
          fmt::format("{}: missing required key {}", source_, key));
    }
    if (v->value.empty()) {
      throw ConfigError(fmt::format("{}: {}: {} must not be empty", source_,
                                    v->origin, key));
    }
    return v->value;
  }

  std::optional<std::string> optional(const std::string& key) {
    const RawValue* v = find(key);
    if (v == nullptr || v->value.empty()) return std::nullopt;
    return v->value;
  }

  void string(const std::string& key, std::string& out) {
    if (auto v = optional(key)) out = *v;
  }

  void boolean(const std::string& key, bool& out) {
    const RawValue* v = find(key);
    if (v == nullptr) return;
    std::string lower = util::to_lower(v->value);
    if (lower == "true") {
      out = true;
    } else if (lower == "false") {
      out = false;
    } else {
      fail(key, *v, "expected true or false");
    }
  }

  void integer(const std::string& key, int& out, int min, int max) {
    const RawValue* v = find(key);
    if (v == nullptr) return;
    int parsed = 0;
    auto [ptr, ec] = std::from_chars(v->value.data(),
                                     v->value.data() + v->value.size(), parsed);
    if (ec != std::errc{} || ptr != v->value.data() + v->value.size()) {
      fail(key, *v, "expected an integer");
    }
    if (parsed < min || parsed > max) {
      fail(key, *v, fmt::format("expected a value in [{}, {}]", min, max));
    }
    out = parsed;
  }

  void size(const std::string& key, std::size_t& out) {
    int tmp = static_cast<int>(out);
    integer(key, tmp, 1, 1 << 30);
    out = static_cast<std::size_t>(tmp);
  }

  std::optional<double> real(const std::string& key, double min) {
    const RawValue* v = find(key);
    if (v == nullptr) return std::nullopt;
    double parsed = 0;
    auto [ptr, ec] = std::from_chars(v->value.data(),
                                     v->value.data() + v->value.size(), parsed);
    if (ec != std::errc{} || ptr != v->value.data() + v->value.size() ||
        !std::isfinite(parsed)) {
      fail(key, *v, "expected a number");
    }
    if (parsed < min) {
      fail(key, *v, fmt::format("expected a value >= {}", min));
    }
    return parsed;
  }

  void seconds(const std::string& key, Seconds& out) {
    if (auto v = real(key, 0.0)) out = Seconds(*v);
  }

  [[noreturn]] void fail(const std::string& key, const RawValue& v,
                         std::string_view why) {
    throw ConfigError(fmt::format("{}: {}: unparsable value '{}' for {}: {}",
                                  source_, v.origin, v.value, key, why));
  }

  const std::set<std::string>& consumed() const { return consumed_; }

 private:
  const RawMap& raw_;
  std::string_view source_;
  std::set<std::string> consumed_;
};

std::string format_minutes(std::chrono::milliseconds ms) {
  if (ms.count() % 60000 == 0) return std::to_string(ms.count() / 60000);
  return fmt::format("{}", static_cast<double>(ms.count()) / 60000.0);
}

}  // namespace

std::optional<std::string> RunConfig::objective() const {
  if (auto it = game_params.find("TASK");
      it != game_params.end() && !it->second.empty()) {
    return it->second;
  }
  for (const auto& [key, value] : game_params) {
    if (key.size() > 5 && key.ends_with("_TASK") && !value.empty()) {
      return value;
    }
  }
  return std::nullopt;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "GAME_SUBJECT",          "PERSONALITY",
      "AGENT_NAME",            "EXP_DURATION",
      "IS_CONTINUED",          "OPENAI_API_KEY",
      "INSTRUCTION_MODEL_NAME", "INSTRUCTION_MODEL_URL",
      "INSTRUCTION_MODEL_API_KEY", "CODE_MODEL_NAME",
      "CODE_MODEL_URL",        "CODE_MODEL_API_KEY",
      "EMBEDDING_MODEL_NAME",  "EMBEDDING_MODEL_URL",
      "EMBEDDING_MODEL_API_KEY", "IS_PLAN_TO_CODE",
      "TRANSLATOR",            "CODE_EXECUTOR",
      "BRIDGE_HOST",           "BRIDGE_PORT",
      "RETRIEVAL_K",           "MEMORY_ROOT",
      "LLM_TIMEOUT_S",         "LLM_MAX_ATTEMPTS",
      "LLM_BACKOFF_S",         "INSTRUCTION_TEMPERATURE",
      "CODE_TEMPERATURE",      "MAX_TOKENS",
      "STATUS_TIMEOUT_S",      "ACTION_TIMEOUT_S",
      "CODE_TIMEOUT_S",        "EXECUTOR_GRACE_S",
      "SKILL_MAX_ROUNDS",      "FAILURE_STREAK_LIMIT",
      "REVISION_ROUNDS",       "REPARSE_ATTEMPTS",
      "LOG_BUDGET_BYTES",      "EMBEDDING_DIM",
      "MAX_ITERATIONS",
  };
  return keys;
}

RunConfig parse_config(std::string_view text, const ConfigOverrides& overrides,
                       std::string_view source) {
  RawMap raw = parse_lines(text, source);
  for (const auto& [key, value] : overrides) {
    if (!valid_key(key)) {
      throw ConfigError(fmt::format("override: invalid key '{}'", key));
    }
    raw[key] = RawValue{value, "override"};
  }

  Reader r(raw, source);
  RunConfig cfg;
  cfg.game_subject = r.required("GAME_SUBJECT");
  cfg.personality = r.required("PERSONALITY");
  cfg.agent_name = r.required("AGENT_NAME");

  if (auto minutes = r.real("EXP_DURATION", 0.0)) {
    auto ms = std::llround(*minutes * 60000.0);
    if (ms <= 0) {
      r.fail("EXP_DURATION", *r.find("EXP_DURATION"), "duration must be > 0");
    }
    cfg.exp_duration = std::chrono::milliseconds(ms);
  }
  r.boolean("IS_CONTINUED", cfg.is_continued);

  auto shared_key = r.optional("OPENAI_API_KEY");
  r.string("INSTRUCTION_MODEL_NAME", cfg.instruction_model.model_name);
  cfg.instruction_model.base_url = r.optional("INSTRUCTION_MODEL_URL");
  cfg.instruction_model.api_key = r.optional("INSTRUCTION_MODEL_API_KEY");
  if (!cfg.instruction_model.api_key) cfg.instruction_model.api_key = shared_key;

  auto code_url = r.optional("CODE_MODEL_URL");
  auto code_key = r.optional("CODE_MODEL_API_KEY");
  if (auto name = r.optional("CODE_MODEL_NAME")) {
    cfg.code_model = ModelEndpoint{*name, code_url, code_key ? code_key : shared_key};
  }
  auto embed_url = r.optional("EMBEDDING_MODEL_URL");
  auto embed_key = r.optional("EMBEDDING_MODEL_API_KEY");
  if (auto name = r.optional("EMBEDDING_MODEL_NAME")) {
    cfg.embedding_model =
        ModelEndpoint{*name, embed_url, embed_key ? embed_key : shared_key};
  }

  r.boolean("IS_PLAN_TO_CODE", cfg.is_plan_to_code);
  if (cfg.is_plan_to_code) cfg.translator = "plan_to_code";
  r.string("TRANSLATOR", cfg.translator);
  if (cfg.translator == "plan_to_code") cfg.is_plan_to_code = true;
  r.string("CODE_EXECUTOR", cfg.code_executor);
  r.string("BRIDGE_HOST", cfg.bridge_host);
  r.integer("BRIDGE_PORT", cfg.bridge_port, 1, 65535);
  r.integer("RETRIEVAL_K", cfg.retrieval_k, 1, 1 << 20);
  if (auto root = r.optional("MEMORY_ROOT")) cfg.memory_root = *root;

  Tuning& t = cfg.tuning;
  r.seconds("LLM_TIMEOUT_S", t.llm_timeout);
  r.integer("LLM_MAX_ATTEMPTS", t.llm_max_attempts, 1, 100);
  r.seconds("LLM_BACKOFF_S", t.llm_backoff);
  if (auto v = r.real("INSTRUCTION_TEMPERATURE", 0.0)) t.instruction_temperature = *v;
  if (auto v = r.real("CODE_TEMPERATURE", 0.0)) t.code_temperature = *v;
  r.integer("MAX_TOKENS", t.max_tokens, 1, 1 << 20);
  r.seconds("STATUS_TIMEOUT_S", t.status_timeout);
  r.seconds("ACTION_TIMEOUT_S", t.action_timeout);
  r.seconds("CODE_TIMEOUT_S", t.code_timeout);
  r.seconds("EXECUTOR_GRACE_S", t.executor_grace);
  r.integer("SKILL_MAX_ROUNDS", t.skill_max_rounds, 1, 1000);
  r.integer("FAILURE_STREAK_LIMIT", t.failure_streak_limit, 1, 1000);
  r.integer("REVISION_ROUNDS", t.revision_rounds, 0, 1000);
  r.integer("REPARSE_ATTEMPTS", t.reparse_attempts, 0, 1000);
  r.size("LOG_BUDGET_BYTES", t.log_budget_bytes);
  r.integer("EMBEDDING_DIM", t.embedding_dim, 1, 1 << 16);
  r.integer("MAX_ITERATIONS", t.max_iterations, 0, 1 << 30);

  for (const auto& [key, value] : raw) {
    if (!r.consumed().contains(key)) cfg.game_params[key] = value.value;
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path,
                      const ConfigOverrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError(
        fmt::format("cannot read configuration file {}", path.string()));
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), overrides, path.string());
}

const RunConfig& validate_config(const RunConfig& cfg,
                                 const std::set<std::string>& personalities) {
  if (!personalities.contains(cfg.personality)) {
    throw ConfigError(fmt::format(
        "unknown personality '{}' and no custom prompt file found; built-in "
        "personalities are: {}",
        cfg.personality, fmt::join(builtin_trait_names(), ", ")));
  }
  if (cfg.is_plan_to_code && !cfg.code_model) {
    throw ConfigError(
        "IS_PLAN_TO_CODE is true but no code model is configured "
        "(set CODE_MODEL_NAME)");
  }
  if (cfg.is_plan_to_code != (cfg.translator == "plan_to_code")) {
    throw ConfigError(fmt::format(
        "IS_PLAN_TO_CODE={} conflicts with TRANSLATOR={}",
        cfg.is_plan_to_code ? "true" : "false", cfg.translator));
  }
  if (cfg.code_model && cfg.code_model->model_name.empty()) {
    throw ConfigError("CODE_MODEL_NAME must not be empty");
  }
  if (cfg.instruction_model.model_name.empty()) {
    throw ConfigError("INSTRUCTION_MODEL_NAME must not be empty");
  }
  return cfg;
}

std::string redact(const std::optional<std::string>& secret) {
  return secret && !secret->empty() ? "***" : "";
}

std::string to_env_text(const RunConfig& cfg, Redaction redaction) {
  auto secret = [&](const std::optional<std::string>& s) {
    return redaction == Redaction::kRedactSecrets ? redact(s)
                                                  : s.value_or("");
  };
  std::string out;
  auto put = [&](std::string_view key, const std::string& value) {
    out += fmt::format("{}={}\n", key, value);
  };
  auto num = [](auto v) { return fmt::format("{}", v); };

  put("GAME_SUBJECT", cfg.game_subject);
  put("PERSONALITY", cfg.personality);
  put("AGENT_NAME", cfg.agent_name);
  put("EXP_DURATION", format_minutes(cfg.exp_duration));
  put("IS_CONTINUED", cfg.is_continued ? "true" : "false");
  put("INSTRUCTION_MODEL_NAME", cfg.instruction_model.model_name);
  put("INSTRUCTION_MODEL_URL", cfg.instruction_model.base_url.value_or(""));
  put("INSTRUCTION_MODEL_API_KEY", secret(cfg.instruction_model.api_key));
  if (cfg.code_model) {
    put("CODE_MODEL_NAME", cfg.code_model->model_name);
    put("CODE_MODEL_URL", cfg.code_model->base_url.value_or(""));
    put("CODE_MODEL_API_KEY", secret(cfg.code_model->api_key));
  }
  if (cfg.embedding_model) {
    put("EMBEDDING_MODEL_NAME", cfg.embedding_model->model_name);
    put("EMBEDDING_MODEL_URL", cfg.embedding_model->base_url.value_or(""));
    put("EMBEDDING_MODEL_API_KEY", secret(cfg.embedding_model->api_key));
  }
  put("IS_PLAN_TO_CODE", cfg.is_plan_to_code ? "true" : "false");
  put("TRANSLATOR", cfg.translator);
  put("CODE_EXECUTOR", cfg.code_executor);
  put("BRIDGE_HOST", cfg.bridge_host);
  put("BRIDGE_PORT", num(cfg.bridge_port));
  put("RETRIEVAL_K", num(cfg.retrieval_k));
  put("MEMORY_ROOT", cfg.memory_root.string());

  const Tuning& t = cfg.tuning;
  put("LLM_TIMEOUT_S", num(t.llm_timeout.count()));
  put("LLM_MAX_ATTEMPTS", num(t.llm_max_attempts));
  put("LLM_BACKOFF_S", num(t.llm_backoff.count()));
  put("INSTRUCTION_TEMPERATURE", num(t.instruction_temperature));
  put("CODE_TEMPERATURE", num(t.code_temperature));
  put("MAX_TOKENS", num(t.max_tokens));
  put("STATUS_TIMEOUT_S", num(t.status_timeout.count()));
  put("ACTION_TIMEOUT_S", num(t.action_timeout.count()));
  put("CODE_TIMEOUT_S", num(t.code_timeout.count()));
  put("EXECUTOR_GRACE_S", num(t.executor_grace.count()));
  put("SKILL_MAX_ROUNDS", num(t.skill_max_rounds));
  put("FAILURE_STREAK_LIMIT", num(t.failure_streak_limit));
  put("REVISION_ROUNDS", num(t.revision_rounds));
  put("REPARSE_ATTEMPTS", num(t.reparse_attempts));
  put("LOG_BUDGET_BYTES", num(t.log_budget_bytes));
  put("EMBEDDING_DIM", num(t.embedding_dim));
  put("MAX_ITERATIONS", num(t.max_iterations));
  for (const auto& [key, value] : cfg.game_params) put(key, value);
  return out;
}

std::set<std::string> config_file_keys(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::set<std::string> keys;
  for (const auto& [key, _] : parse_lines(buffer.str(), path.string())) {
    keys.insert(key);
  }
  return keys;
}

ConfigOverrides environment_overrides(const std::set<std::string>& file_keys) {
  ConfigOverrides env;
  auto pick = [&](const std::string& key) {
    if (const char* v = std::getenv(key.c_str()); v != nullptr) env[key] = v;
  };
  for (const auto& key : known_config_keys()) pick(key);
  for (const auto& key : file_keys) pick(key);
  return env;
}

}  // namespace persona
