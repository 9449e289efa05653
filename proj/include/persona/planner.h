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

#ifndef PERSONA_PLANNER_H_
#define PERSONA_PLANNER_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "persona/gateway.h"
#include "persona/memory.h"
#include "persona/templates.h"

namespace persona {

enum class PlanMode { kBottomUp, kTopDownStep };

std::string_view to_string(PlanMode mode);

struct ObjectiveRef {
  std::string objective_id;
  std::size_t sub_task_index = 0;

  bool operator==(const ObjectiveRef&) const = default;
};

struct ActionPlan {
  PlanMode mode = PlanMode::kBottomUp;
  std::string action;
  nlohmann::json parameters = nlohmann::json::object();
  std::string rationale;
  std::optional<ObjectiveRef> objective_ref;
  // Text expected in the observation once the plan has taken effect.
  std::optional<std::string> postcondition;

  bool operator==(const ActionPlan&) const = default;
};

// Canonical single-line JSON form, as sent to the environment.
std::string to_json_text(const ActionPlan& plan);
// Reads `action`, `parameters`, `rationale` and `postcondition` from a model
// reply object. Throws PlannerError when the shape is wrong.
ActionPlan plan_from_json(const nlohmann::json& j);
// Short human-readable form used for skill retrieval and memory records.
std::string describe_plan(const ActionPlan& plan);

enum class SubTaskStatus { kPending, kActive, kDone, kFailed };

std::string_view to_string(SubTaskStatus status);

struct SubTask {
  std::string description;
  SubTaskStatus status = SubTaskStatus::kPending;

  bool operator==(const SubTask&) const = default;
};

// Ordered sub-tasks with at most one active. Statuses only advance
// pending -> active -> {done, failed}.
class TaskDecomposition {
 public:
  // The first sub-task starts active. Throws PlannerError if empty.
  TaskDecomposition(std::string objective_id, std::string objective_text,
                    std::vector<std::string> sub_tasks);

  const std::string& objective_id() const { return objective_id_; }
  const std::string& objective_text() const { return objective_text_; }
  const std::vector<SubTask>& sub_tasks() const { return sub_tasks_; }

  std::optional<std::size_t> active_index() const;
  const SubTask* active() const;
  bool complete() const { return !active_index().has_value(); }

  // Moves the active sub-task to `terminal` (done or failed) and activates
  // the next pending one.
  void finish_active(SubTaskStatus terminal);

  bool operator==(const TaskDecomposition&) const = default;

 private:
  std::string objective_id_;
  std::string objective_text_;
  std::vector<SubTask> sub_tasks_;
};

struct RetrievedMemory {
  MemoryRecord record;
  double score = 0.0;
};

struct PlannerContext {
  std::int64_t iteration = 0;
  std::string current_state;
  std::optional<std::string> objective;
  std::string personality_prompt;
  std::vector<RetrievedMemory> preferred_memories;
  std::vector<RetrievedMemory> related_memories;
  std::vector<std::string> capabilities;
  int failure_streak = 0;
  std::optional<TaskDecomposition> decomposition;
  // The decomposition was produced this iteration; the plan is its
  // top-down step rather than a bottom-up step under an older sub-task.
  bool fresh_decomposition = false;
};

struct ParameterSpec {
  std::string name;
  // Empty means any non-empty value.
  std::vector<std::string> allowed;
  // The value must name something present in the current state.
  bool from_state = false;
};

struct ActionSpec {
  std::string name;
  std::vector<ParameterSpec> required;
};

// Per-game action schema. One action per line:
//   name<TAB>param[=a|b|c],param[=@state],...
class ActionSchema {
 public:
  static ActionSchema load(const std::filesystem::path& path);
  static ActionSchema parse(std::string_view text, std::string_view source = "<text>");

  void add(ActionSpec spec);
  const ActionSpec* find(std::string_view action) const;
  std::vector<std::string> action_names() const;
  // One line per action, used in prompts.
  std::string describe() const;
  bool empty() const { return actions_.empty(); }

 private:
  std::vector<ActionSpec> actions_;
};

enum class Verdict { kValid, kRevise };

struct ValidationReport {
  Verdict verdict = Verdict::kValid;
  std::vector<std::string> reasons;
};

enum class PlanningMode { kBottomUp, kTopDown };

std::string_view to_string(PlanningMode mode);

bool live(const std::optional<TaskDecomposition>& decomposition);

PlanningMode choose_mode(const PlannerContext& ctx, int failure_streak_limit);

struct ProgressUpdate {
  TaskDecomposition decomposition;
  int failure_streak = 0;
};

// Success finishes the active sub-task. Failure keeps it active and grows
// the streak. Partial leaves both unchanged.
ProgressUpdate update_progress(const TaskDecomposition& decomposition,
                               Outcome outcome, int failure_streak);

struct PlannerOptions {
  int failure_streak_limit = 3;
  int reparse_attempts = 2;
  int revision_rounds = 3;
  // When false, any action name passes the membership check; used when
  // plans are turned into new code rather than looked up.
  bool restrict_actions = true;

  static PlannerOptions from(const Tuning& tuning);
};

class Planner {
 public:
  Planner(const TemplateSet& templates, ActionSchema schema,
          PlannerOptions options = {});

  // Resets the corrective re-prompt budget shared by decompose and
  // plan_next within one iteration.
  void begin_iteration();

  PlanningMode choose_mode(const PlannerContext& ctx) const;
  TaskDecomposition decompose(const PlannerContext& ctx, LlmGateway& gateway);
  ActionPlan plan_next(const PlannerContext& ctx, LlmGateway& gateway);
  ValidationReport validate_plan(const ActionPlan& plan,
                                 const PlannerContext& ctx) const;
  ActionPlan revise_plan(const ActionPlan& plan, const ValidationReport& report,
                         const PlannerContext& ctx, LlmGateway& gateway);

  std::string compose_plan_prompt(const PlannerContext& ctx) const;

  const ActionSchema& schema() const { return schema_; }
  const PlannerOptions& options() const { return options_; }

 private:
  // Calls the instruction model until `parse` accepts the reply or the
  // budget runs out. `parse` returns an error string on rejection.
  template <typename T, typename Parse>
  T complete_parsed(const std::string& prompt, const std::string& shape_hint,
                    const std::string& what, LlmGateway& gateway, Parse parse);

  void stamp_mode(ActionPlan& plan, const PlannerContext& ctx) const;

  const TemplateSet& templates_;
  ActionSchema schema_;
  PlannerOptions options_;
  int reparse_budget_;
  int next_objective_ = 1;
};

}  // namespace persona

#endif  // PERSONA_PLANNER_H_
