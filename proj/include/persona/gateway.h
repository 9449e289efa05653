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

// The only path from the agent to a language model.
//
// Two backends implement LlmBackend: HttpBackend speaks a chat-completions
// style JSON contract to a hosted or local model server, ScriptedBackend
// answers from an ordered rule list and records every request so whole
// agent runs can be replayed offline.

#ifndef PERSONA_GATEWAY_H_
#define PERSONA_GATEWAY_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "persona/config.h"
#include "persona/error.h"

namespace persona {

enum class ModelRole { kInstruction, kCode };

std::string_view to_string(ModelRole role);

struct CompletionRequest {
  ModelRole role = ModelRole::kInstruction;
  std::string prompt;
  int max_tokens = 1024;
  double temperature = 0.7;
  std::string request_id;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct CompletionResult {
  std::string text;
  std::chrono::microseconds latency{0};
  TokenUsage usage;
};

enum class GatewayErrorKind { kTransport, kProtocol, kTimeout };

std::string_view to_string(GatewayErrorKind kind);

class GatewayError : public Error {
 public:
  GatewayError(GatewayErrorKind kind, const std::string& what)
      : Error(what), kind_(kind) {}

  GatewayErrorKind kind() const { return kind_; }
  // Transport and timeout failures may succeed on a later attempt.
  bool retryable() const { return kind_ != GatewayErrorKind::kProtocol; }

 private:
  GatewayErrorKind kind_;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual CompletionResult complete(const CompletionRequest& req) = 0;
};

// One canned answer. A reply with `fault` set throws instead of answering.
struct ScriptedReply {
  std::string text;
  std::optional<GatewayErrorKind> fault;

  static ScriptedReply text_reply(std::string text) { return {std::move(text), {}}; }
  static ScriptedReply fault_reply(GatewayErrorKind kind, std::string message = {}) {
    return {std::move(message), kind};
  }
};

struct ScriptedRule {
  std::function<bool(const CompletionRequest&)> matcher;
  // Successive matches walk this list; the last reply repeats unless
  // `cycle` is set, in which case the list wraps around.
  std::vector<ScriptedReply> replies;
  bool cycle = false;
};

class ScriptedBackend : public LlmBackend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::string default_response)
      : default_response_(std::move(default_response)) {}

  // JSON rules file, see docs/formats.md.
  static std::shared_ptr<ScriptedBackend> from_file(
      const std::filesystem::path& path);

  // Matches when `pattern` (ECMAScript regex) is found in the prompt.
  ScriptedBackend& add_rule(const std::string& pattern, std::string response);
  ScriptedBackend& add_rule(const std::string& pattern,
                            std::vector<ScriptedReply> replies,
                            bool cycle = false);
  ScriptedBackend& add_rule(ScriptedRule rule);
  void set_default(std::string response);

  CompletionResult complete(const CompletionRequest& req) override;

  std::vector<CompletionRequest> call_log() const;
  std::size_t call_count() const;

 private:
  struct RuleState {
    ScriptedRule rule;
    std::size_t hits = 0;
  };

  mutable std::mutex mu_;
  std::vector<RuleState> rules_;
  std::string default_response_;
  std::vector<CompletionRequest> call_log_;
};

// Chat-completions over HTTP(S). `model_name` may carry a provider prefix
// such as "openai/" or "ollama_chat/", which is stripped before sending.
class HttpBackend : public LlmBackend {
 public:
  HttpBackend(ModelEndpoint endpoint, Seconds timeout);
  CompletionResult complete(const CompletionRequest& req) override;

 private:
  ModelEndpoint endpoint_;
  Seconds timeout_;
};

// "scripted:<rules.json>" selects a ScriptedBackend; anything else is HTTP.
std::shared_ptr<LlmBackend> make_backend(const ModelEndpoint& endpoint,
                                         Seconds timeout);

// Throws std::invalid_argument on an empty prompt, non-positive max_tokens
// or negative temperature.
void validate_request(const CompletionRequest& req);

CompletionResult complete(LlmBackend& backend, const CompletionRequest& req);

struct RetryPolicy {
  int max_attempts = 3;
  Seconds backoff_base{1.0};
  double backoff_multiplier = 2.0;
  // Replaced in tests to avoid real sleeping.
  std::function<void(Seconds)> sleep;
};

// Retries transport and timeout errors with exponential backoff. Protocol
// errors surface immediately. The final error names the attempt count.
CompletionResult complete_with_retry(LlmBackend& backend,
                                     const CompletionRequest& req,
                                     const RetryPolicy& policy);

struct GatewaySettings {
  RetryPolicy retry;
  int max_tokens = 1024;
  double instruction_temperature = 0.7;
  double code_temperature = 0.2;

  static GatewaySettings from(const Tuning& tuning);
};

// Routes requests to the instruction or code backend and keeps call counts.
class LlmGateway {
 public:
  LlmGateway(std::shared_ptr<LlmBackend> instruction,
             std::shared_ptr<LlmBackend> code, GatewaySettings settings = {});

  CompletionResult complete(ModelRole role, std::string prompt,
                            std::string request_id = {});

  bool has_code_model() const { return code_ != nullptr; }

  // Backend invocations, retries included.
  std::size_t calls() const;
  std::size_t calls(ModelRole role) const;
  TokenUsage usage() const;

 private:
  std::shared_ptr<LlmBackend> instruction_;
  std::shared_ptr<LlmBackend> code_;
  GatewaySettings settings_;
  mutable std::mutex mu_;
  std::size_t instruction_calls_ = 0;
  std::size_t code_calls_ = 0;
  TokenUsage usage_;
};

}  // namespace persona

#endif  // PERSONA_GATEWAY_H_
