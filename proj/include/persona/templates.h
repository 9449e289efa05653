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

#ifndef PERSONA_TEMPLATES_H_
#define PERSONA_TEMPLATES_H_

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>

namespace persona {

// One prompt template per role, stored as `<templates>/<game>/<role>.txt`.
enum class PromptRole {
  kPlan,
  kDecompose,
  kRevise,
  kActionSummary,
  kPreferenceSummary,
  kCodeGeneration,
  kCodeRefinement,
  kSkillDescription,
};

inline constexpr std::array<PromptRole, 8> kAllPromptRoles = {
    PromptRole::kPlan,           PromptRole::kDecompose,
    PromptRole::kRevise,         PromptRole::kActionSummary,
    PromptRole::kPreferenceSummary, PromptRole::kCodeGeneration,
    PromptRole::kCodeRefinement, PromptRole::kSkillDescription,
};

std::string_view role_name(PromptRole role);

using TemplateVars = std::map<std::string, std::string>;

// Text with `{{name}}` placeholders. Rendering substitutes each once and
// never rescans inserted values.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  explicit PromptTemplate(std::string text);

  // Throws TemplateError if a placeholder has no value.
  std::string render(const TemplateVars& vars) const;

  std::set<std::string> placeholders() const;
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

class TemplateSet {
 public:
  // Loads whichever role files exist under `<root>/<game_subject>/`.
  static TemplateSet load(const std::filesystem::path& root,
                          const std::string& game_subject);

  void set(PromptRole role, PromptTemplate tmpl);
  bool has(PromptRole role) const;
  // Throws TemplateError naming the missing role file.
  const PromptTemplate& get(PromptRole role) const;

 private:
  std::string origin_ = "<memory>";
  std::map<PromptRole, PromptTemplate> templates_;
};

}  // namespace persona

#endif  // PERSONA_TEMPLATES_H_
