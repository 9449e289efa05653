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

#include <gtest/gtest.h>

#include "test_support.h"

namespace persona {
namespace {

using testing::data_dir;
using testing::TempDir;
using testing::write_file;

PersonalityLibrary builtin_library() { return PersonalityLibrary(data_dir() / "personalities"); }

EntityMapping mobs() {
  EntityMapping m;
  m.game_subject = "MINECRAFT";
  m.entries["enemy_hazard"] = "mobs";
  return m;
}

TEST(PersonalityTest, SevenBuiltInTraits) {
  const std::vector<std::string> expected = {"achievement", "adrenaline", "aggression",
                                             "caution",     "completion", "curiosity",
                                             "efficiency"};
  EXPECT_EQ(builtin_trait_names(), expected);
  auto lib = builtin_library();
  EXPECT_EQ(lib.available(), std::set<std::string>(expected.begin(), expected.end()));
  for (const auto& name : expected) {
    auto p = lib.load_profile(name);
    EXPECT_EQ(p.name, name);
    EXPECT_FALSE(p.prompt_text.empty());
    EXPECT_EQ(p.origin, ProfileOrigin::kBuiltIn);
  }
}

TEST(PersonalityTest, CustomProfileLoads) {
  TempDir dir;
  write_file(dir / "speedrunner.txt", "Finish as fast as possible.\n");
  PersonalityLibrary lib(data_dir() / "personalities", dir.path());
  auto p = lib.load_profile("speedrunner");
  EXPECT_EQ(p.origin, ProfileOrigin::kCustom);
  EXPECT_EQ(p.prompt_text, "Finish as fast as possible.");
  EXPECT_TRUE(lib.available().contains("speedrunner"));
}

TEST(PersonalityTest, CustomShadowsBuiltIn) {
  TempDir dir;
  write_file(dir / "achievement.txt", "Collect every trophy.");
  PersonalityLibrary lib(data_dir() / "personalities", dir.path());
  auto p = lib.load_profile("achievement");
  EXPECT_EQ(p.origin, ProfileOrigin::kCustom);
  EXPECT_EQ(p.prompt_text, "Collect every trophy.");
}

TEST(PersonalityTest, UnknownProfileListsAvailable) {
  try {
    builtin_library().load_profile("zzz");
    FAIL() << "expected PersonalityError";
  } catch (const PersonalityError& e) {
    EXPECT_NE(std::string(e.what()).find("caution"), std::string::npos);
  }
}

TEST(PersonalityTest, MapEntitiesSubstitutesTerm) {
  EXPECT_EQ(map_entities("avoid every {entity:enemy_hazard}", mobs()), "avoid every mobs");
}

TEST(PersonalityTest, MapEntitiesWithoutPlaceholdersIsIdentity) {
  const std::string text = "plain text with {braces} and {entity:} left alone";
  EXPECT_EQ(map_entities(text, mobs()), text);
}

TEST(PersonalityTest, MapEntitiesUnknownIdIsNamed) {
  try {
    map_entities("fear the {entity:unknown}", mobs());
    FAIL() << "expected PersonalityError";
  } catch (const PersonalityError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown"), std::string::npos);
  }
}

TEST(PersonalityTest, MapEntitiesIsSinglePass) {
  EntityMapping m = mobs();
  m.entries["enemy_hazard"] = "{entity:enemy_hazard}";
  EXPECT_EQ(map_entities("x {entity:enemy_hazard} y", m), "x {entity:enemy_hazard} y");
}

TEST(PersonalityTest, BundledMappingCoversEveryBuiltInPrompt) {
  auto registry = EntityRegistry::load(data_dir() / "entities.tsv");
  auto mapping = EntityMapping::load(data_dir() / "games/DUNGEON/entity_mapping.tsv",
                                     "DUNGEON", registry);
  auto lib = builtin_library();
  for (const auto& name : builtin_trait_names()) {
    std::string rendered = map_entities(lib.load_profile(name), mapping);
    EXPECT_EQ(rendered.find("{entity:"), std::string::npos) << name;
  }
}

TEST(PersonalityTest, RegistryRejectsDuplicatesAndOverflow) {
  EntityRegistry r;
  for (int i = 0; i < 9; ++i) r.add({"type_" + std::to_string(i), "d"});
  EXPECT_TRUE(r.fully_populated());
  EXPECT_THROW(r.add({"type_9", "d"}), PersonalityError);
  EntityRegistry d;
  d.add({"enemy_hazard", "d"});
  EXPECT_THROW(d.add({"enemy_hazard", "again"}), PersonalityError);
}

TEST(PersonalityTest, MappingKeysMustBeRegistered) {
  TempDir dir;
  write_file(dir / "registry.tsv", "enemy_hazard\thostile\n");
  write_file(dir / "bad.tsv", "treasure\tgold\n");
  write_file(dir / "empty.tsv", "enemy_hazard\t\n");
  auto registry = EntityRegistry::load(dir / "registry.tsv");
  EXPECT_THROW(EntityMapping::load(dir / "bad.tsv", "G", registry), PersonalityError);
  EXPECT_THROW(EntityMapping::load(dir / "empty.tsv", "G", registry), PersonalityError);
}

}  // namespace
}  // namespace persona
