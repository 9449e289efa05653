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

// Personality traits as prompt text, and the entity-type vocabulary that
// lets one trait prompt be reused across games.
//
// A trait prompt may contain placeholders of the form `{entity:<id>}`. A
// per-game EntityMapping turns each id into the game's own word for it
// ("mobs", "monsters", ...) before the prompt reaches the planner.

#ifndef PERSONA_PERSONALITY_H_
#define PERSONA_PERSONALITY_H_

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace persona {

enum class ProfileOrigin { kBuiltIn, kCustom };

struct PersonalityProfile {
  std::string name;
  std::string prompt_text;
  ProfileOrigin origin = ProfileOrigin::kBuiltIn;

  bool operator==(const PersonalityProfile&) const = default;
};

// achievement, adrenaline, aggression, caution, completion, curiosity,
// efficiency.
const std::vector<std::string>& builtin_trait_names();

// Resolves trait names to prompt files. Built-in traits live in
// `builtin_dir`; files in `custom_dir` (named `<trait>` or `<trait>.txt`)
// add new traits and shadow built-ins of the same name.
class PersonalityLibrary {
 public:
  explicit PersonalityLibrary(std::filesystem::path builtin_dir,
                              std::optional<std::filesystem::path> custom_dir =
                                  std::nullopt);

  PersonalityProfile load_profile(const std::string& name) const;

  // Every name load_profile would accept.
  std::set<std::string> available() const;

 private:
  std::filesystem::path builtin_dir_;
  std::optional<std::filesystem::path> custom_dir_;
};

struct EntityType {
  std::string id;
  std::string description;
};

class EntityRegistry {
 public:
  static constexpr std::size_t kFullSize = 9;

  // Tab-separated `id<TAB>description`, '#' comments.
  static EntityRegistry load(const std::filesystem::path& path);

  void add(EntityType type);
  bool contains(const std::string& id) const;
  const EntityType* find(const std::string& id) const;
  std::size_t size() const { return types_.size(); }
  bool fully_populated() const { return types_.size() == kFullSize; }
  const std::vector<EntityType>& types() const { return types_; }

 private:
  std::vector<EntityType> types_;
};

struct EntityMapping {
  std::string game_subject;
  std::map<std::string, std::string> entries;  // entity id -> game term

  // Tab-separated `id<TAB>game term`. Every id must be registered.
  static EntityMapping load(const std::filesystem::path& path,
                            std::string game_subject,
                            const EntityRegistry& registry);
};

// Replaces every `{entity:<id>}` in the profile's prompt with the mapped
// game term. Text outside placeholders is copied byte for byte.
std::string map_entities(const PersonalityProfile& profile,
                         const EntityMapping& mapping);
std::string map_entities(std::string_view text, const EntityMapping& mapping);

}  // namespace persona

#endif  // PERSONA_PERSONALITY_H_
