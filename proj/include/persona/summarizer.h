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

#ifndef PERSONA_SUMMARIZER_H_
#define PERSONA_SUMMARIZER_H_

#include <cstddef>
#include <string>

#include "persona/error.h"
#include "persona/feedback.h"
#include "persona/gateway.h"
#include "persona/memory.h"
#include "persona/personality.h"
#include "persona/planner.h"
#include "persona/templates.h"

namespace persona {

struct ExecutionSummary {
  Outcome outcome = Outcome::kFailure;
  std::string description;
  std::string context;
  std::string plan_summary;

  bool operator==(const ExecutionSummary&) const = default;
};

// Raised when no usable summary could be parsed. Carries a failure summary
// built from the feedback so the caller can still record the iteration.
class SummarizerError : public Error {
 public:
  SummarizerError(const std::string& what, ExecutionSummary fallback)
      : Error(what), fallback_(std::move(fallback)) {}
  const ExecutionSummary& fallback() const { return fallback_; }

 private:
  ExecutionSummary fallback_;
};

struct SummarizerOptions {
  int reparse_attempts = 2;
  std::size_t log_budget_bytes = 8192;

  static SummarizerOptions from(const Tuning& tuning);
};

// Failure summary derived from the feedback alone.
ExecutionSummary fallback_summary(const ActionPlan& plan, const ExecutionFeedback& fb);

class Summarizer {
 public:
  Summarizer(const TemplateSet& templates, SummarizerOptions options = {});

  ExecutionSummary summarize_execution(const ActionPlan& plan,
                                       const ExecutionFeedback& fb,
                                       const std::string& state_before,
                                       const std::string& state_after,
                                       LlmGateway& gateway) const;

  // Never empty and always names the trait.
  std::string preference_summary(const ExecutionSummary& summary,
                                 const PersonalityProfile& profile,
                                 LlmGateway& gateway) const;

 private:
  const TemplateSet& templates_;
  SummarizerOptions options_;
};

}  // namespace persona

#endif  // PERSONA_SUMMARIZER_H_
