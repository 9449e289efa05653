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

// Turning plans into game interactions: structured payloads sent over the
// bridge, or generated code handed to a CodeExecutor.

#ifndef PERSONA_EXECUTOR_H_
#define PERSONA_EXECUTOR_H_

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "persona/bridge.h"
#include "persona/embedding.h"
#include "persona/feedback.h"
#include "persona/gateway.h"
#include "persona/memory.h"
#include "persona/planner.h"
#include "persona/templates.h"

namespace persona {

// The executor did not return within timeout + grace.
class HungExecutorError : public ExecutorError {
 public:
  using ExecutorError::ExecutorError;
};

inline constexpr std::string_view kPlanToParameters = "plan_to_parameters";
inline constexpr std::string_view kPlanToCode = "plan_to_code";

// Renames fields of the default payload. One rule per line:
//   action<TAB>new | parameters<TAB>new | parameters.<key><TAB>new
class PayloadMapping {
 public:
  static PayloadMapping load(const std::filesystem::path& path);
  static PayloadMapping parse(std::string_view text, std::string_view source = "<text>");

  bool empty() const;

 private:
  friend std::string translate_to_parameters(const ActionPlan&, const PayloadMapping*);
  std::optional<std::string> action_key_;
  std::optional<std::string> parameters_key_;
  std::map<std::string, std::string> parameter_keys_;
};

// `{"action":...,"parameters":{...}}`, optionally renamed by `mapping`.
std::string translate_to_parameters(const ActionPlan& plan,
                                    const PayloadMapping* mapping = nullptr);

using Translator = std::function<std::string(const ActionPlan&)>;

class TranslatorRegistry {
 public:
  // Starts with plan_to_parameters.
  TranslatorRegistry();

  // Throws ExecutorError on a duplicate or reserved name.
  void register_custom_translator(const std::string& name, Translator handler);
  bool contains(const std::string& name) const;
  // Throws ExecutorError listing every selectable name.
  const Translator& resolve(const std::string& name) const;
  // Selectable names, plan_to_code included.
  std::vector<std::string> names() const;

 private:
  std::map<std::string, Translator> translators_;
};

// Sends the payload, waits for feedback, then fetches the post-action state.
// Timeouts and protocol faults become ExecutorError; a lost connection
// propagates as BridgeError.
ExecutionFeedback execute_plan(const std::string& payload, BridgeServer& bridge);

struct HelperProgram {
  std::string name;
  std::string body;
};

struct CodeRunMetadata {
  bool timed_out = false;
  std::vector<std::string> logs;
  std::vector<std::string> errors;
};

struct CodeRunResult {
  std::string observation;
  CodeRunMetadata metadata;
};

// Runs environment-defined code with `programs` callable as helpers and
// must honor `timeout`.
class CodeExecutor {
 public:
  virtual ~CodeExecutor() = default;
  virtual CodeRunResult run(const std::string& code,
                            const std::vector<HelperProgram>& programs,
                            Seconds timeout) = 0;
};

// Runs the executor under a watchdog. Throws HungExecutorError past
// timeout + grace and ExecutorError on an empty observation.
ExecutionFeedback run_and_feedback(const std::string& code,
                                   const std::vector<HelperProgram>& programs,
                                   Seconds timeout,
                                   std::shared_ptr<CodeExecutor> executor,
                                   Seconds grace = Seconds(2.0));

struct CodeGenOptions {
  // Corrective re-prompts allowed when a reply has no code block.
  int reparse_attempts = 2;
};

// Code-model completion with the prose stripped. Throws ExecutorError when
// no fenced block appears within the re-prompt budget.
std::string translate_to_code(const ActionPlan& plan,
                              const std::vector<SkillRecord>& related_skills,
                              const std::string& game_spec,
                              const TemplateSet& templates, LlmGateway& gateway,
                              CodeGenOptions options = {});

struct SynthesisOptions {
  int max_rounds = 3;
  int retrieval_k = 5;
  int reparse_attempts = 2;
  Seconds code_timeout{30.0};
  Seconds grace{2.0};

  static SynthesisOptions from(const RunConfig& cfg);
};

struct SynthesisResult {
  std::optional<SkillRecord> skill;
  // Feedback of the last executor run, or empty if none ran.
  ExecutionFeedback feedback;
  std::vector<std::string> error_history;
  int rounds = 0;
  std::vector<std::string> retrieved_skills;
  std::string last_code;

  bool succeeded() const { return skill.has_value(); }
};

// Generate, run, refine. On success the skill is stored with
// origin=synthesized and refinement_count = rounds - 1.
SynthesisResult synthesize_skill(const ActionPlan& plan, MemoryStore& store,
                                 const Embedder& embedder,
                                 const std::string& game_spec,
                                 std::shared_ptr<CodeExecutor> executor,
                                 const TemplateSet& templates, LlmGateway& gateway,
                                 const SynthesisOptions& options);

// Name a synthesized skill is stored under for `plan`.
std::string skill_name_for(const ActionPlan& plan);

}  // namespace persona

#endif  // PERSONA_EXECUTOR_H_
