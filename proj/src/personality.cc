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

#include "persona/personality.h"

#include <fmt/format.h>

#include <algorithm>

#include "persona/error.h"
#include "util/strings.h"

namespace persona {
namespace {

constexpr std::string_view kPlaceholderOpen = "{entity:";

std::optional<std::filesystem::path> profile_file(
    const std::filesystem::path& dir, const std::string& name) {
  for (const auto& candidate : {dir / name, dir / (name + ".txt")}) {
    std::error_code ec;
    if (std::filesystem::is_regular_file(candidate, ec)) return candidate;
  }
  return std::nullopt;
}

std::string read_prompt(const std::filesystem::path& path) {
  std::string text;
  try {
    text = util::read_file(path);
  } catch (const std::exception& e) {
    throw PersonalityError(e.what());
  }
  // Trailing newlines are an editor artifact, not prompt content.
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
    text.pop_back();
  }
  if (util::trim(text).empty()) {
    throw PersonalityError(
        fmt::format("personality prompt {} is empty", path.string()));
  }
  return text;
}

bool valid_entity_id_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

// Reads `key<TAB>value` rows. Blank lines and '#' comments are skipped.
std::vector<std::pair<std::string, std::string>> read_table(
    const std::filesystem::path& path) {
  std::string text;
  try {
    text = util::read_file(path);
  } catch (const std::exception& e) {
    throw PersonalityError(e.what());
  }
  std::vector<std::pair<std::string, std::string>> rows;
  int line_no = 0;
  for (const auto& line : util::split_lines(text)) {
    ++line_no;
    if (util::trim(line).empty() || util::trim(line).front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw PersonalityError(fmt::format("{}: line {}: expected two tab-separated columns",
                                         path.string(), line_no));
    }
    rows.emplace_back(util::trim(line.substr(0, tab)),
                      util::trim(line.substr(tab + 1)));
  }
  return rows;
}

}  // namespace

const std::vector<std::string>& builtin_trait_names() {
  static const std::vector<std::string> names = {
      "achievement", "adrenaline", "aggression", "caution",
      "completion",  "curiosity",  "efficiency"};
  return names;
}

PersonalityLibrary::PersonalityLibrary(
    std::filesystem::path builtin_dir,
    std::optional<std::filesystem::path> custom_dir)
    : builtin_dir_(std::move(builtin_dir)), custom_dir_(std::move(custom_dir)) {}

PersonalityProfile PersonalityLibrary::load_profile(
    const std::string& name) const {
  if (name.empty()) throw PersonalityError("personality name is empty");
  if (custom_dir_) {
    if (auto file = profile_file(*custom_dir_, name)) {
      return {name, read_prompt(*file), ProfileOrigin::kCustom};
    }
  }
  const auto& builtins = builtin_trait_names();
  if (std::find(builtins.begin(), builtins.end(), name) != builtins.end()) {
    auto file = profile_file(builtin_dir_, name);
    if (!file) {
      throw PersonalityError(
          fmt::format("built-in personality '{}' has no prompt file in {}",
                      name, builtin_dir_.string()));
    }
    return {name, read_prompt(*file), ProfileOrigin::kBuiltIn};
  }
  throw PersonalityError(
      fmt::format("unknown personality '{}'; available profiles: {}", name,
                  fmt::join(available(), ", ")));
}

std::set<std::string> PersonalityLibrary::available() const {
  std::set<std::string> names;
  for (const auto& name : builtin_trait_names()) {
    if (profile_file(builtin_dir_, name)) names.insert(name);
  }
  std::error_code ec;
  if (custom_dir_ && std::filesystem::is_directory(*custom_dir_, ec)) {
    for (const auto& entry : std::filesystem::directory_iterator(*custom_dir_)) {
      if (!entry.is_regular_file()) continue;
      auto path = entry.path();
      names.insert(path.extension() == ".txt" ? path.stem().string()
                                              : path.filename().string());
    }
  }
  return names;
}

EntityRegistry EntityRegistry::load(const std::filesystem::path& path) {
  EntityRegistry registry;
  for (auto& [id, description] : read_table(path)) {
    registry.add({std::move(id), std::move(description)});
  }
  return registry;
}

void EntityRegistry::add(EntityType type) {
  if (type.id.empty() ||
      !std::all_of(type.id.begin(), type.id.end(), valid_entity_id_char)) {
    throw PersonalityError(fmt::format("invalid entity id '{}'", type.id));
  }
  if (contains(type.id)) {
    throw PersonalityError(fmt::format("duplicate entity id '{}'", type.id));
  }
  if (types_.size() >= kFullSize) {
    throw PersonalityError(fmt::format(
        "entity registry already holds {} entity types", kFullSize));
  }
  types_.push_back(std::move(type));
}

bool EntityRegistry::contains(const std::string& id) const {
  return find(id) != nullptr;
}

const EntityType* EntityRegistry::find(const std::string& id) const {
  auto it = std::find_if(types_.begin(), types_.end(),
                         [&](const EntityType& t) { return t.id == id; });
  return it == types_.end() ? nullptr : &*it;
}

EntityMapping EntityMapping::load(const std::filesystem::path& path,
                                  std::string game_subject,
                                  const EntityRegistry& registry) {
  EntityMapping mapping;
  mapping.game_subject = std::move(game_subject);
  for (auto& [id, term] : read_table(path)) {
    if (!registry.contains(id)) {
      throw PersonalityError(fmt::format(
          "{}: entity id '{}' is not registered (registry holds {} of {} "
          "entity types)",
          path.string(), id, registry.size(), EntityRegistry::kFullSize));
    }
    if (term.empty()) {
      throw PersonalityError(
          fmt::format("{}: empty game term for '{}'", path.string(), id));
    }
    if (term.find(kPlaceholderOpen) != std::string::npos) {
      throw PersonalityError(fmt::format(
          "{}: game term for '{}' contains a placeholder", path.string(), id));
    }
    mapping.entries[id] = std::move(term);
  }
  return mapping;
}

std::string map_entities(std::string_view text, const EntityMapping& mapping) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto open = text.find(kPlaceholderOpen, pos);
    if (open == std::string_view::npos) {
      out.append(text.substr(pos));
      break;
    }
    std::size_t id_begin = open + kPlaceholderOpen.size();
    std::size_t id_end = id_begin;
    while (id_end < text.size() && valid_entity_id_char(text[id_end])) ++id_end;
    if (id_end == id_begin || id_end >= text.size() || text[id_end] != '}') {
      // Not a well-formed placeholder; copy the opening brace and move on.
      out.append(text.substr(pos, open + 1 - pos));
      pos = open + 1;
      continue;
    }
    std::string id(text.substr(id_begin, id_end - id_begin));
    auto it = mapping.entries.find(id);
    if (it == mapping.entries.end()) {
      throw PersonalityError(fmt::format(
          "no '{}' mapping for entity '{}'", mapping.game_subject, id));
    }
    out.append(text.substr(pos, open - pos));
    out.append(it->second);
    pos = id_end + 1;
  }
  return out;
}

std::string map_entities(const PersonalityProfile& profile,
                         const EntityMapping& mapping) {
  return map_entities(profile.prompt_text, mapping);
}

}  // namespace persona
