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

#include "persona/summarizer.h"

#include <fmt/format.h>

#include "util/extract.h"
#include "util/strings.h"

namespace persona {

namespace {

std::string join_budgeted(const std::vector<std::string>& lines, std::size_t budget) {
  if (lines.empty()) return "(none)";
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  text.pop_back();
  return util::truncate_bytes(text, budget);
}

std::string first_line(const std::string& s) {
  auto nl = s.find('\n');
  return s.substr(0, nl);
}

constexpr std::string_view kSummaryShape =
    R"(Reply with one JSON object: {"outcome": "success|partial|failure", "description": "...", "context": "...", "plan_summary": "..."}.)";

}  // namespace

SummarizerOptions SummarizerOptions::from(const Tuning& tuning) {
  return {tuning.reparse_attempts, tuning.log_budget_bytes};
}

ExecutionSummary fallback_summary(const ActionPlan& plan, const ExecutionFeedback& fb) {
  ExecutionSummary s;
  s.outcome = Outcome::kFailure;
  s.plan_summary = describe_plan(plan);
  if (!fb.errors.empty()) {
    s.description = fmt::format("no usable summary; first error: {}", first_line(fb.errors.front()));
  } else {
    s.description = fmt::format("no usable summary for action '{}'", plan.action);
  }
  s.context = fmt::format("{} log line(s), {} error(s){}", fb.logs.size(), fb.errors.size(),
                          fb.timed_out ? ", timed out" : "");
  return s;
}

Summarizer::Summarizer(const TemplateSet& templates, SummarizerOptions options)
    : templates_(templates), options_(options) {}

ExecutionSummary Summarizer::summarize_execution(const ActionPlan& plan,
                                                 const ExecutionFeedback& fb,
                                                 const std::string& state_before,
                                                 const std::string& state_after,
                                                 LlmGateway& gateway) const {
  TemplateVars vars = {
      {"plan", to_json_text(plan)},
      {"plan_description", describe_plan(plan)},
      {"logs", join_budgeted(fb.logs, options_.log_budget_bytes)},
      {"errors", join_budgeted(fb.errors, options_.log_budget_bytes)},
      {"timed_out", fb.timed_out ? "true" : "false"},
      {"state_before", state_before},
      {"state_after", state_after},
  };
  const std::string prompt = templates_.get(PromptRole::kActionSummary).render(vars);

  std::string current = prompt;
  std::string why;
  for (int attempt = 0; attempt <= options_.reparse_attempts; ++attempt) {
    if (attempt > 0) {
      current = fmt::format("{}\n\nYour previous reply could not be used ({}). {}",
                            prompt, why, kSummaryShape);
    }
    auto reply = gateway.complete(ModelRole::kInstruction, current, "action_summary").text;
    auto j = util::extract_json_object(reply, &why);
    if (!j) continue;
    auto get = [&](const char* key) -> std::string {
      auto it = j->find(key);
      return it != j->end() && it->is_string() ? util::trim(it->get<std::string>()) : "";
    };
    auto outcome = parse_outcome(util::to_lower(get("outcome")));
    if (!outcome) {
      why = "\"outcome\" must be success, partial or failure";
      continue;
    }
    ExecutionSummary s{*outcome, get("description"), get("context"), get("plan_summary")};
    if (s.description.empty()) {
      why = "\"description\" is empty";
      continue;
    }
    if (s.plan_summary.empty()) s.plan_summary = describe_plan(plan);
    if (fb.timed_out) {
      s.outcome = Outcome::kFailure;
      if (!util::contains_ci(s.description, "timeout") &&
          !util::contains_ci(s.description, "timed out")) {
        s.description = "Execution hit the timeout. " + s.description;
      }
    } else if (s.outcome == Outcome::kSuccess && !fb.errors.empty()) {
      s.outcome = Outcome::kPartial;
    }
    return s;
  }
  throw SummarizerError(
      fmt::format("no usable execution summary after {} attempt(s): {}",
                  options_.reparse_attempts + 1, why),
      fallback_summary(plan, fb));
}

std::string Summarizer::preference_summary(const ExecutionSummary& summary,
                                           const PersonalityProfile& profile,
                                           LlmGateway& gateway) const {
  TemplateVars vars = {
      {"trait", profile.name},
      {"personality", profile.prompt_text},
      {"outcome", std::string(to_string(summary.outcome))},
      {"description", summary.description},
      {"context", summary.context},
      {"plan_summary", summary.plan_summary},
  };
  const std::string prompt = templates_.get(PromptRole::kPreferenceSummary).render(vars);
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto text = util::trim(
        gateway.complete(ModelRole::kInstruction, prompt, "preference_summary").text);
    if (text.empty()) continue;
    if (!util::contains_ci(text, profile.name)) text = fmt::format("[{}] {}", profile.name, text);
    return text;
  }
  return fmt::format("outcome {} under trait {}", to_string(summary.outcome), profile.name);
}

}  // namespace persona
