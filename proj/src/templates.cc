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

#include "persona/templates.h"

#include <fmt/format.h>

#include "persona/error.h"
#include "util/strings.h"

namespace persona {

std::string_view role_name(PromptRole role) {
  switch (role) {
    case PromptRole::kPlan: return "plan";
    case PromptRole::kDecompose: return "decompose";
    case PromptRole::kRevise: return "revise";
    case PromptRole::kActionSummary: return "action_summary";
    case PromptRole::kPreferenceSummary: return "preference_summary";
    case PromptRole::kCodeGeneration: return "code_generation";
    case PromptRole::kCodeRefinement: return "code_refinement";
    case PromptRole::kSkillDescription: return "skill_description";
  }
  return "unknown";
}

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {}

std::string PromptTemplate::render(const TemplateVars& vars) const {
  std::string out;
  out.reserve(text_.size() * 2);
  std::size_t pos = 0;
  while (true) {
    auto open = text_.find("{{", pos);
    if (open == std::string::npos) break;
    auto close = text_.find("}}", open + 2);
    if (close == std::string::npos) break;
    std::string name = util::trim(std::string_view(text_).substr(open + 2, close - open - 2));
    auto it = vars.find(name);
    if (it == vars.end()) {
      throw TemplateError(fmt::format("template placeholder '{{{{{}}}}}' has no value", name));
    }
    out.append(text_, pos, open - pos);
    out.append(it->second);
    pos = close + 2;
  }
  out.append(text_, pos, std::string::npos);
  return out;
}

std::set<std::string> PromptTemplate::placeholders() const {
  std::set<std::string> names;
  std::size_t pos = 0;
  while (true) {
    auto open = text_.find("{{", pos);
    if (open == std::string::npos) break;
    auto close = text_.find("}}", open + 2);
    if (close == std::string::npos) break;
    names.insert(util::trim(std::string_view(text_).substr(open + 2, close - open - 2)));
    pos = close + 2;
  }
  return names;
}

TemplateSet TemplateSet::load(const std::filesystem::path& root,
                              const std::string& game_subject) {
  TemplateSet set;
  auto dir = root / game_subject;
  set.origin_ = dir.string();
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) {
    throw TemplateError(fmt::format("no prompt templates for game '{}' in {}",
                                    game_subject, dir.string()));
  }
  for (PromptRole role : kAllPromptRoles) {
    auto path = dir / (std::string(role_name(role)) + ".txt");
    if (!std::filesystem::is_regular_file(path, ec)) continue;
    set.set(role, PromptTemplate(util::read_file(path)));
  }
  return set;
}

void TemplateSet::set(PromptRole role, PromptTemplate tmpl) {
  templates_[role] = std::move(tmpl);
}

bool TemplateSet::has(PromptRole role) const { return templates_.contains(role); }

const PromptTemplate& TemplateSet::get(PromptRole role) const {
  auto it = templates_.find(role);
  if (it == templates_.end()) {
    throw TemplateError(fmt::format("missing prompt template {}.txt in {}",
                                    role_name(role), origin_));
  }
  return it->second;
}

}  // namespace persona
