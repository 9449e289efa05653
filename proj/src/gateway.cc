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

#include "persona/gateway.h"

#include <fmt/format.h>

#include <cmath>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "util/strings.h"

namespace persona {
namespace {

using json = nlohmann::json;

std::optional<GatewayErrorKind> parse_fault_kind(const std::string& s) {
  if (s == "transport") return GatewayErrorKind::kTransport;
  if (s == "protocol") return GatewayErrorKind::kProtocol;
  if (s == "timeout") return GatewayErrorKind::kTimeout;
  return std::nullopt;
}

ScriptedReply parse_reply(const json& j, const std::string& where) {
  if (j.is_string()) return ScriptedReply::text_reply(j.get<std::string>());
  if (j.is_object() && j.contains("fault")) {
    auto kind = parse_fault_kind(j.at("fault").get<std::string>());
    if (!kind) throw Error(where + ": unknown fault kind");
    return ScriptedReply::fault_reply(*kind, j.value("message", "injected fault"));
  }
  throw Error(where + ": a reply must be a string or {\"fault\": ...}");
}

}  // namespace

std::string_view to_string(ModelRole role) {
  return role == ModelRole::kInstruction ? "instruction" : "code";
}

std::string_view to_string(GatewayErrorKind kind) {
  switch (kind) {
    case GatewayErrorKind::kTransport: return "transport";
    case GatewayErrorKind::kProtocol: return "protocol";
    case GatewayErrorKind::kTimeout: return "timeout";
  }
  return "unknown";
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(
    const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(util::read_file(path));
  } catch (const std::exception& e) {
    throw Error(fmt::format("cannot load scripted rules {}: {}", path.string(),
                            e.what()));
  }
  auto backend = std::make_shared<ScriptedBackend>(doc.value("default", ""));
  int index = 0;
  for (const auto& r : doc.value("rules", json::array())) {
    std::string where = fmt::format("{}: rule {}", path.string(), index++);
    std::vector<ScriptedReply> replies;
    if (r.contains("response")) replies.push_back(parse_reply(r["response"], where));
    for (const auto& reply : r.value("responses", json::array())) {
      replies.push_back(parse_reply(reply, where));
    }
    if (replies.empty()) throw Error(where + ": no response");

    std::optional<ModelRole> role;
    if (r.contains("role")) {
      auto name = r["role"].get<std::string>();
      if (name == "instruction") {
        role = ModelRole::kInstruction;
      } else if (name == "code") {
        role = ModelRole::kCode;
      } else {
        throw Error(where + ": role must be instruction or code");
      }
    }
    std::regex pattern(r.value("match", ""));
    backend->add_rule(ScriptedRule{
        [pattern, role](const CompletionRequest& req) {
          if (role && *role != req.role) return false;
          return std::regex_search(req.prompt, pattern);
        },
        std::move(replies), r.value("cycle", false)});
  }
  return backend;
}

ScriptedBackend& ScriptedBackend::add_rule(const std::string& pattern,
                                           std::string response) {
  return add_rule(pattern, {ScriptedReply::text_reply(std::move(response))});
}

ScriptedBackend& ScriptedBackend::add_rule(const std::string& pattern,
                                           std::vector<ScriptedReply> replies,
                                           bool cycle) {
  std::regex re(pattern);
  return add_rule(ScriptedRule{
      [re](const CompletionRequest& req) { return std::regex_search(req.prompt, re); },
      std::move(replies), cycle});
}

ScriptedBackend& ScriptedBackend::add_rule(ScriptedRule rule) {
  if (rule.replies.empty()) {
    throw std::invalid_argument("scripted rule needs at least one reply");
  }
  std::lock_guard lock(mu_);
  rules_.push_back({std::move(rule), 0});
  return *this;
}

void ScriptedBackend::set_default(std::string response) {
  std::lock_guard lock(mu_);
  default_response_ = std::move(response);
}

CompletionResult ScriptedBackend::complete(const CompletionRequest& req) {
  std::lock_guard lock(mu_);
  call_log_.push_back(req);
  for (auto& state : rules_) {
    if (!state.rule.matcher(req)) continue;
    const auto& replies = state.rule.replies;
    std::size_t i = state.rule.cycle
                        ? state.hits % replies.size()
                        : std::min(state.hits, replies.size() - 1);
    ++state.hits;
    const ScriptedReply& reply = replies[i];
    if (reply.fault) {
      throw GatewayError(*reply.fault,
                         fmt::format("scripted {} fault: {}",
                                     to_string(*reply.fault), reply.text));
    }
    return CompletionResult{reply.text, {}, {}};
  }
  return CompletionResult{default_response_, {}, {}};
}

std::vector<CompletionRequest> ScriptedBackend::call_log() const {
  std::lock_guard lock(mu_);
  return call_log_;
}

std::size_t ScriptedBackend::call_count() const {
  std::lock_guard lock(mu_);
  return call_log_.size();
}

std::shared_ptr<LlmBackend> make_backend(const ModelEndpoint& endpoint,
                                         Seconds timeout) {
  constexpr std::string_view kScripted = "scripted:";
  if (endpoint.model_name.starts_with(kScripted)) {
    return ScriptedBackend::from_file(endpoint.model_name.substr(kScripted.size()));
  }
  return std::make_shared<HttpBackend>(endpoint, timeout);
}

void validate_request(const CompletionRequest& req) {
  if (req.prompt.empty()) throw std::invalid_argument("completion prompt is empty");
  if (req.max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
  if (!(req.temperature >= 0.0)) {
    throw std::invalid_argument("temperature must be non-negative");
  }
}

CompletionResult complete(LlmBackend& backend, const CompletionRequest& req) {
  validate_request(req);
  auto start = std::chrono::steady_clock::now();
  CompletionResult result = backend.complete(req);
  auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::steady_clock::now() - start);
  if (result.latency <= std::chrono::microseconds::zero()) result.latency = elapsed;
  return result;
}

CompletionResult complete_with_retry(LlmBackend& backend,
                                     const CompletionRequest& req,
                                     const RetryPolicy& policy) {
  if (policy.max_attempts < 1) {
    throw std::invalid_argument("max_attempts must be at least 1");
  }
  Seconds delay = policy.backoff_base;
  for (int attempt = 1;; ++attempt) {
    try {
      return complete(backend, req);
    } catch (const GatewayError& e) {
      if (!e.retryable() || attempt >= policy.max_attempts) {
        throw GatewayError(
            e.kind(), fmt::format("{} (after {} attempt{})", e.what(), attempt,
                                  attempt == 1 ? "" : "s"));
      }
    }
    if (policy.sleep) {
      policy.sleep(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
    delay *= policy.backoff_multiplier;
  }
}

GatewaySettings GatewaySettings::from(const Tuning& tuning) {
  GatewaySettings s;
  s.retry.max_attempts = tuning.llm_max_attempts;
  s.retry.backoff_base = tuning.llm_backoff;
  s.max_tokens = tuning.max_tokens;
  s.instruction_temperature = tuning.instruction_temperature;
  s.code_temperature = tuning.code_temperature;
  return s;
}

LlmGateway::LlmGateway(std::shared_ptr<LlmBackend> instruction,
                       std::shared_ptr<LlmBackend> code,
                       GatewaySettings settings)
    : instruction_(std::move(instruction)),
      code_(std::move(code)),
      settings_(std::move(settings)) {
  if (!instruction_) throw std::invalid_argument("instruction backend is required");
}

CompletionResult LlmGateway::complete(ModelRole role, std::string prompt,
                                      std::string request_id) {
  if (role == ModelRole::kCode && !code_) {
    throw Error("code completion requested but no code model is configured");
  }
  CompletionRequest req;
  req.role = role;
  req.prompt = std::move(prompt);
  req.max_tokens = settings_.max_tokens;
  req.temperature = role == ModelRole::kCode ? settings_.code_temperature
                                             : settings_.instruction_temperature;
  req.request_id = std::move(request_id);

  // Counts every backend invocation so retries show up in iteration stats.
  class Counting : public LlmBackend {
   public:
    Counting(LlmBackend& inner, LlmGateway& owner, ModelRole role)
        : inner_(inner), owner_(owner), role_(role) {}
    CompletionResult complete(const CompletionRequest& r) override {
      {
        std::lock_guard lock(owner_.mu_);
        ++(role_ == ModelRole::kCode ? owner_.code_calls_ : owner_.instruction_calls_);
      }
      return inner_.complete(r);
    }

   private:
    LlmBackend& inner_;
    LlmGateway& owner_;
    ModelRole role_;
  };

  Counting counting(role == ModelRole::kCode ? *code_ : *instruction_, *this, role);
  CompletionResult result = complete_with_retry(counting, req, settings_.retry);
  std::lock_guard lock(mu_);
  usage_.prompt_tokens += result.usage.prompt_tokens;
  usage_.completion_tokens += result.usage.completion_tokens;
  return result;
}

std::size_t LlmGateway::calls() const {
  std::lock_guard lock(mu_);
  return instruction_calls_ + code_calls_;
}

std::size_t LlmGateway::calls(ModelRole role) const {
  std::lock_guard lock(mu_);
  return role == ModelRole::kCode ? code_calls_ : instruction_calls_;
}

TokenUsage LlmGateway::usage() const {
  std::lock_guard lock(mu_);
  return usage_;
}

}  // namespace persona
