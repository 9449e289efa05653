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

#include "persona/planner.h"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include <fmt/format.h>

#include "util/extract.h"
#include "util/strings.h"

namespace persona {

using nlohmann::json;

std::string_view to_string(PlanMode mode) {
  return mode == PlanMode::kBottomUp ? "bottom_up" : "top_down_step";
}

std::string_view to_string(PlanningMode mode) {
  return mode == PlanningMode::kBottomUp ? "bottom_up" : "top_down";
}

std::string_view to_string(SubTaskStatus status) {
  switch (status) {
    case SubTaskStatus::kPending: return "pending";
    case SubTaskStatus::kActive: return "active";
    case SubTaskStatus::kDone: return "done";
    case SubTaskStatus::kFailed: return "failed";
  }
  return "unknown";
}

namespace {

std::string value_text(const json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

// Whole-word occurrence, so "goblin" does not match "hobgoblin".
bool mentions(std::string_view text, std::string_view word) {
  if (word.empty()) return false;
  for (auto pos = text.find(word); pos != std::string_view::npos;
       pos = text.find(word, pos + 1)) {
    bool left = pos == 0 || !is_word_char(text[pos - 1]);
    auto end = pos + word.size();
    bool right = end == text.size() || !is_word_char(text[end]);
    if (left && right) return true;
  }
  return false;
}

std::string format_memories(const std::vector<RetrievedMemory>& memories) {
  if (memories.empty()) return "(none)";
  std::string out;
  int n = 1;
  for (const auto& m : memories) {
    out += fmt::format("{}. [{}] {} | context: {} | preference: {}\n", n++,
                       to_string(m.record.outcome), m.record.plan_summary,
                       m.record.context, m.record.preference_summary);
  }
  out.pop_back();
  return out;
}

std::string format_subtask(const std::optional<TaskDecomposition>& d) {
  if (!live(d)) return "(none)";
  auto idx = *d->active_index();
  return fmt::format("{} of {}: {} (objective: {})", idx + 1, d->sub_tasks().size(),
                     d->sub_tasks()[idx].description, d->objective_text());
}

constexpr std::string_view kPlanShape =
    R"(Reply with one JSON object: {"action": "<name>", "parameters": {...}, "rationale": "<why>"}.)";
constexpr std::string_view kDecompositionShape =
    R"(Reply with one JSON object: {"sub_tasks": ["<first step>", "<second step>", ...]}.)";

}  // namespace

std::string to_json_text(const ActionPlan& plan) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(plan.mode);
  j["action"] = plan.action;
  j["parameters"] = plan.parameters;
  j["rationale"] = plan.rationale;
  if (plan.objective_ref) {
    j["objective_ref"] = {{"objective_id", plan.objective_ref->objective_id},
                          {"index", plan.objective_ref->sub_task_index}};
  }
  if (plan.postcondition) j["postcondition"] = *plan.postcondition;
  return j.dump();
}

ActionPlan plan_from_json(const json& j) {
  if (!j.is_object()) throw PlannerError("plan is not a JSON object");
  ActionPlan plan;
  auto action = j.find("action");
  if (action == j.end() || !action->is_string() ||
      util::trim(action->get<std::string>()).empty()) {
    throw PlannerError("plan has no \"action\" string");
  }
  plan.action = util::trim(action->get<std::string>());
  if (auto p = j.find("parameters"); p != j.end() && !p->is_null()) {
    if (!p->is_object()) throw PlannerError("plan \"parameters\" is not an object");
    plan.parameters = *p;
  }
  if (auto r = j.find("rationale"); r != j.end() && r->is_string()) {
    plan.rationale = r->get<std::string>();
  }
  if (auto pc = j.find("postcondition"); pc != j.end() && pc->is_string() &&
                                         !pc->get<std::string>().empty()) {
    plan.postcondition = pc->get<std::string>();
  }
  return plan;
}

std::string describe_plan(const ActionPlan& plan) {
  std::string out = plan.action;
  for (const auto& [k, v] : plan.parameters.items()) {
    out += fmt::format(" {}={}", k, value_text(v));
  }
  if (!plan.rationale.empty()) out += ": " + plan.rationale;
  return out;
}

TaskDecomposition::TaskDecomposition(std::string objective_id,
                                     std::string objective_text,
                                     std::vector<std::string> sub_tasks)
    : objective_id_(std::move(objective_id)),
      objective_text_(std::move(objective_text)) {
  if (sub_tasks.empty()) throw PlannerError("degenerate decomposition: no sub-tasks");
  for (auto& s : sub_tasks) sub_tasks_.push_back({std::move(s), SubTaskStatus::kPending});
  sub_tasks_.front().status = SubTaskStatus::kActive;
}

std::optional<std::size_t> TaskDecomposition::active_index() const {
  for (std::size_t i = 0; i < sub_tasks_.size(); ++i) {
    if (sub_tasks_[i].status == SubTaskStatus::kActive) return i;
  }
  return std::nullopt;
}

const SubTask* TaskDecomposition::active() const {
  auto idx = active_index();
  return idx ? &sub_tasks_[*idx] : nullptr;
}

void TaskDecomposition::finish_active(SubTaskStatus terminal) {
  if (terminal != SubTaskStatus::kDone && terminal != SubTaskStatus::kFailed) {
    throw std::invalid_argument("sub-task can only finish as done or failed");
  }
  auto idx = active_index();
  if (!idx) throw std::invalid_argument("decomposition has no active sub-task");
  sub_tasks_[*idx].status = terminal;
  for (std::size_t i = *idx + 1; i < sub_tasks_.size(); ++i) {
    if (sub_tasks_[i].status == SubTaskStatus::kPending) {
      sub_tasks_[i].status = SubTaskStatus::kActive;
      return;
    }
  }
}

ActionSchema ActionSchema::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = util::read_file(path);
  } catch (const std::exception& e) {
    throw PlannerError(fmt::format("cannot read capabilities file: {}", e.what()));
  }
  return parse(text, path.string());
}

ActionSchema ActionSchema::parse(std::string_view text, std::string_view source) {
  ActionSchema schema;
  int line_no = 0;
  for (const auto& raw : util::split_lines(text)) {
    ++line_no;
    auto line = util::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto tab = line.find('\t');
    ActionSpec spec;
    spec.name = util::trim(line.substr(0, tab));
    if (spec.name.empty()) {
      throw PlannerError(fmt::format("{}:{}: empty action name", source, line_no));
    }
    if (tab != std::string::npos) {
      for (const auto& item : util::split(line.substr(tab + 1), ',')) {
        auto field = util::trim(item);
        if (field.empty()) continue;
        ParameterSpec param;
        auto eq = field.find('=');
        param.name = util::trim(field.substr(0, eq));
        if (param.name.empty()) {
          throw PlannerError(fmt::format("{}:{}: empty parameter name", source, line_no));
        }
        if (eq != std::string::npos) {
          auto domain = util::trim(field.substr(eq + 1));
          if (domain == "@state") {
            param.from_state = true;
          } else {
            for (const auto& v : util::split(domain, '|')) {
              auto value = util::trim(v);
              if (!value.empty()) param.allowed.push_back(value);
            }
          }
        }
        spec.required.push_back(std::move(param));
      }
    }
    if (schema.find(spec.name)) {
      throw PlannerError(fmt::format("{}:{}: action '{}' declared twice", source,
                                     line_no, spec.name));
    }
    schema.add(std::move(spec));
  }
  return schema;
}

void ActionSchema::add(ActionSpec spec) { actions_.push_back(std::move(spec)); }

const ActionSpec* ActionSchema::find(std::string_view action) const {
  for (const auto& a : actions_) {
    if (a.name == action) return &a;
  }
  return nullptr;
}

std::vector<std::string> ActionSchema::action_names() const {
  std::vector<std::string> names;
  for (const auto& a : actions_) names.push_back(a.name);
  return names;
}

std::string ActionSchema::describe() const {
  if (actions_.empty()) return "(unrestricted)";
  std::string out;
  for (const auto& a : actions_) {
    out += a.name + "(";
    for (std::size_t i = 0; i < a.required.size(); ++i) {
      const auto& p = a.required[i];
      if (i) out += ", ";
      out += p.name;
      if (p.from_state) {
        out += "=<name visible in state>";
      } else if (!p.allowed.empty()) {
        out += "=";
        for (std::size_t j = 0; j < p.allowed.size(); ++j) {
          out += (j ? "|" : "") + p.allowed[j];
        }
      }
    }
    out += ")\n";
  }
  out.pop_back();
  return out;
}

bool live(const std::optional<TaskDecomposition>& decomposition) {
  return decomposition.has_value() && !decomposition->complete();
}

PlanningMode choose_mode(const PlannerContext& ctx, int failure_streak_limit) {
  if (!ctx.objective) return PlanningMode::kBottomUp;
  if (!live(ctx.decomposition) || ctx.failure_streak >= failure_streak_limit) {
    return PlanningMode::kTopDown;
  }
  return PlanningMode::kBottomUp;
}

ProgressUpdate update_progress(const TaskDecomposition& decomposition,
                               Outcome outcome, int failure_streak) {
  if (decomposition.complete()) {
    throw std::invalid_argument("update_progress needs an active sub-task");
  }
  ProgressUpdate update{decomposition, failure_streak};
  switch (outcome) {
    case Outcome::kSuccess:
      update.decomposition.finish_active(SubTaskStatus::kDone);
      update.failure_streak = 0;
      break;
    case Outcome::kFailure:
      ++update.failure_streak;
      break;
    case Outcome::kPartial:
      break;
  }
  return update;
}

PlannerOptions PlannerOptions::from(const Tuning& tuning) {
  PlannerOptions o;
  o.failure_streak_limit = tuning.failure_streak_limit;
  o.reparse_attempts = tuning.reparse_attempts;
  o.revision_rounds = tuning.revision_rounds;
  return o;
}

Planner::Planner(const TemplateSet& templates, ActionSchema schema,
                 PlannerOptions options)
    : templates_(templates),
      schema_(std::move(schema)),
      options_(options),
      reparse_budget_(options.reparse_attempts) {}

void Planner::begin_iteration() { reparse_budget_ = options_.reparse_attempts; }

PlanningMode Planner::choose_mode(const PlannerContext& ctx) const {
  return persona::choose_mode(ctx, options_.failure_streak_limit);
}

template <typename T, typename Parse>
T Planner::complete_parsed(const std::string& prompt, const std::string& shape_hint,
                           const std::string& what, LlmGateway& gateway,
                           Parse parse) {
  std::string current = prompt;
  int attempts = 0;
  while (true) {
    ++attempts;
    auto reply = gateway.complete(ModelRole::kInstruction, current, what).text;
    std::string why;
    if (std::optional<T> parsed = parse(reply, why)) return std::move(*parsed);
    if (reparse_budget_ <= 0) {
      throw PlannerError(fmt::format(
          "{}: unusable model reply after {} attempt(s): {}; raw reply: {}", what,
          attempts, why, reply));
    }
    --reparse_budget_;
    current = fmt::format("{}\n\nYour previous reply could not be used ({}). {}",
                          prompt, why, shape_hint);
  }
}

TaskDecomposition Planner::decompose(const PlannerContext& ctx, LlmGateway& gateway) {
  if (!ctx.objective) throw std::invalid_argument("decompose needs an objective");
  TemplateVars vars = {
      {"iteration", std::to_string(ctx.iteration)},
      {"state", ctx.current_state},
      {"objective", *ctx.objective},
      {"personality", ctx.personality_prompt},
      {"capabilities", fmt::format("{}", fmt::join(ctx.capabilities, ", "))},
      {"related_memories", format_memories(ctx.related_memories)},
  };
  auto prompt = templates_.get(PromptRole::kDecompose).render(vars);
  auto steps = complete_parsed<std::vector<std::string>>(
      prompt, std::string(kDecompositionShape), "decompose", gateway,
      [](const std::string& reply, std::string& why) -> std::optional<std::vector<std::string>> {
        auto j = util::extract_json_object(reply, &why);
        if (!j) return std::nullopt;
        auto list = j->find("sub_tasks");
        if (list == j->end() || !list->is_array()) {
          why = "missing \"sub_tasks\" array";
          return std::nullopt;
        }
        std::vector<std::string> steps;
        for (const auto& item : *list) {
          std::string text;
          if (item.is_string()) {
            text = item.get<std::string>();
          } else if (item.is_object() && item.contains("description") &&
                     item["description"].is_string()) {
            text = item["description"].get<std::string>();
          } else {
            why = "sub-task entries must be strings";
            return std::nullopt;
          }
          text = util::trim(text);
          if (text.empty()) {
            why = "blank sub-task";
            return std::nullopt;
          }
          steps.push_back(std::move(text));
        }
        if (steps.empty()) {
          throw PlannerError("degenerate decomposition: model returned no sub-tasks");
        }
        return steps;
      });
  return TaskDecomposition(fmt::format("objective-{}", next_objective_++),
                           *ctx.objective, std::move(steps));
}

std::string Planner::compose_plan_prompt(const PlannerContext& ctx) const {
  if (ctx.capabilities.empty()) {
    throw PlannerError("no capabilities available to plan with");
  }
  TemplateVars vars = {
      {"iteration", std::to_string(ctx.iteration)},
      {"state", ctx.current_state},
      {"objective", ctx.objective.value_or("(none)")},
      {"personality", ctx.personality_prompt},
      {"preferred_memories", format_memories(ctx.preferred_memories)},
      {"related_memories", format_memories(ctx.related_memories)},
      {"capabilities", fmt::format("{}", fmt::join(ctx.capabilities, ", "))},
      {"action_schema", schema_.describe()},
      {"subtask", format_subtask(ctx.decomposition)},
  };
  return templates_.get(PromptRole::kPlan).render(vars);
}

void Planner::stamp_mode(ActionPlan& plan, const PlannerContext& ctx) const {
  plan.objective_ref.reset();
  plan.mode = PlanMode::kBottomUp;
  if (!live(ctx.decomposition)) return;
  plan.objective_ref = ObjectiveRef{ctx.decomposition->objective_id(),
                                    *ctx.decomposition->active_index()};
  if (ctx.fresh_decomposition) plan.mode = PlanMode::kTopDownStep;
}

ActionPlan Planner::plan_next(const PlannerContext& ctx, LlmGateway& gateway) {
  auto prompt = compose_plan_prompt(ctx);
  auto plan = complete_parsed<ActionPlan>(
      prompt, std::string(kPlanShape), "plan", gateway,
      [](const std::string& reply, std::string& why) -> std::optional<ActionPlan> {
        auto j = util::extract_json_object(reply, &why);
        if (!j) return std::nullopt;
        try {
          return plan_from_json(*j);
        } catch (const PlannerError& e) {
          why = e.what();
          return std::nullopt;
        }
      });
  stamp_mode(plan, ctx);
  return plan;
}

ValidationReport Planner::validate_plan(const ActionPlan& plan,
                                        const PlannerContext& ctx) const {
  ValidationReport report;
  auto& reasons = report.reasons;
  if (plan.action.empty()) reasons.push_back("plan has an empty action");
  if (options_.restrict_actions &&
      std::find(ctx.capabilities.begin(), ctx.capabilities.end(), plan.action) ==
          ctx.capabilities.end()) {
    reasons.push_back(fmt::format("action '{}' is not an available capability", plan.action));
  }
  if (const auto* spec = schema_.find(plan.action)) {
    for (const auto& param : spec->required) {
      auto it = plan.parameters.find(param.name);
      if (it == plan.parameters.end() || value_text(*it).empty()) {
        reasons.push_back(fmt::format("action '{}' requires parameter '{}'",
                                      plan.action, param.name));
        continue;
      }
      auto value = value_text(*it);
      if (!param.allowed.empty() &&
          std::find(param.allowed.begin(), param.allowed.end(), value) ==
              param.allowed.end()) {
        reasons.push_back(fmt::format("parameter '{}' of '{}' must be one of {}, got '{}'",
                                      param.name, plan.action,
                                      fmt::join(param.allowed, "|"), value));
      }
      if (param.from_state && !mentions(ctx.current_state, value)) {
        reasons.push_back(fmt::format(
            "parameter '{}' of '{}' names '{}', which is not in the current state",
            param.name, plan.action, value));
      }
    }
  }
  if (plan.mode == PlanMode::kTopDownStep && !plan.objective_ref) {
    reasons.push_back("top-down step has no objective reference");
  }
  if (plan.objective_ref) {
    const auto& ref = *plan.objective_ref;
    if (!live(ctx.decomposition)) {
      reasons.push_back(fmt::format("plan refers to objective '{}' but no decomposition is live",
                                    ref.objective_id));
    } else if (ref.objective_id != ctx.decomposition->objective_id()) {
      reasons.push_back(fmt::format("plan refers to objective '{}', live objective is '{}'",
                                    ref.objective_id, ctx.decomposition->objective_id()));
    } else if (ref.sub_task_index != *ctx.decomposition->active_index()) {
      reasons.push_back(fmt::format("plan refers to sub-task {}, active sub-task is {}",
                                    ref.sub_task_index, *ctx.decomposition->active_index()));
    }
  }
  report.verdict = reasons.empty() ? Verdict::kValid : Verdict::kRevise;
  return report;
}

ActionPlan Planner::revise_plan(const ActionPlan& plan, const ValidationReport& report,
                                const PlannerContext& ctx, LlmGateway& gateway) {
  if (report.verdict != Verdict::kRevise || report.reasons.empty()) {
    throw std::invalid_argument("revise_plan needs a revise verdict with reasons");
  }
  std::vector<std::string> history;
  for (const auto& r : report.reasons) history.push_back("initial: " + r);
  std::string previous = to_json_text(plan);

  for (int round = 1; round <= options_.revision_rounds; ++round) {
    std::string reasons;
    for (const auto& h : history) reasons += "- " + h + "\n";
    TemplateVars vars = {
        {"iteration", std::to_string(ctx.iteration)},
        {"state", ctx.current_state},
        {"objective", ctx.objective.value_or("(none)")},
        {"personality", ctx.personality_prompt},
        {"capabilities", fmt::format("{}", fmt::join(ctx.capabilities, ", "))},
        {"action_schema", schema_.describe()},
        {"subtask", format_subtask(ctx.decomposition)},
        {"plan", previous},
        {"reasons", reasons},
    };
    auto prompt = templates_.get(PromptRole::kRevise).render(vars);
    auto reply = gateway.complete(ModelRole::kInstruction, prompt, "revise").text;

    std::string why;
    auto j = util::extract_json_object(reply, &why);
    if (!j) {
      history.push_back(fmt::format("round {}: {}", round, why));
      continue;
    }
    ActionPlan candidate;
    try {
      candidate = plan_from_json(*j);
    } catch (const PlannerError& e) {
      history.push_back(fmt::format("round {}: {}", round, e.what()));
      continue;
    }
    candidate.mode = plan.mode;
    candidate.objective_ref = plan.objective_ref;
    auto check = validate_plan(candidate, ctx);
    if (check.verdict == Verdict::kValid) return candidate;
    for (const auto& r : check.reasons) history.push_back(fmt::format("round {}: {}", round, r));
    previous = to_json_text(candidate);
  }
  std::string all;
  for (const auto& h : history) all += "\n  " + h;
  throw PlannerError(fmt::format("plan still invalid after {} revision round(s):{}",
                                 options_.revision_rounds, all));
}

}  // namespace persona
