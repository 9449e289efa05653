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

// A small deterministic grid dungeon. It serves the environment side of the
// bridge protocol and runs a small script language, so the agent loop
// can be exercised offline. docs/dungeon.md holds the rule table.

#ifndef PERSONA_REFENV_H_
#define PERSONA_REFENV_H_

#include <atomic>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "persona/config.h"
#include "persona/error.h"
#include "persona/executor.h"

namespace persona::refenv {

class ScenarioError : public Error {
 public:
  using Error::Error;
};

struct Position {
  int x = 0;
  int y = 0;

  auto operator<=>(const Position&) const = default;
};

int manhattan(Position a, Position b);

struct Enemy {
  std::string id;
  char glyph = 'e';
  Position pos;
  int hp = 1;

  bool operator==(const Enemy&) const = default;
};

struct Item {
  std::string id;
  char glyph = '*';
  Position pos;

  bool operator==(const Item&) const = default;
};

inline constexpr char kWall = '#';
inline constexpr char kFloor = '.';
inline constexpr char kExit = '>';
inline constexpr int kVisibleRadius = 5;
inline constexpr int kAttackDamage = 2;

struct DungeonState {
  std::string scenario;
  // Rows of kWall, kFloor or kExit; all rows have the same width.
  std::vector<std::string> terrain;
  Position player;
  Position start;
  int hp = 10;
  int max_hp = 10;
  std::vector<std::string> inventory;
  std::map<std::string, Enemy> enemies;
  std::map<std::string, Item> items;
  int turn = 0;
  int level = 1;
  std::int64_t rng_seed = 0;

  int width() const { return terrain.empty() ? 0 : static_cast<int>(terrain[0].size()); }
  int height() const { return static_cast<int>(terrain.size()); }
  bool in_bounds(Position p) const;
  char terrain_at(Position p) const;
  const Enemy* enemy_at(Position p) const;
  const Item* item_at(Position p) const;

  bool operator==(const DungeonState&) const = default;
};

// Empty when the state satisfies its invariants, else one line per problem.
std::vector<std::string> check_invariants(const DungeonState& state);

struct StepResult {
  DungeonState state;
  std::vector<std::string> logs;
  std::vector<std::string> errors;
};

// Pure transition. Rejected actions leave the state untouched and do not
// advance the turn counter.
StepResult step(const DungeonState& state, const std::string& action,
                const nlohmann::json& params);

// Canonical text; equal states give identical bytes.
std::string serialize_state(const DungeonState& state);
DungeonState parse_state(std::string_view text);

// Scenario text format, see docs/dungeon.md.
DungeonState parse_scenario(std::string_view text, std::string_view source = "<text>");
DungeonState load_scenario(const std::filesystem::path& path);

// The live game shared by the protocol server and the script executor.
class DungeonWorld {
 public:
  explicit DungeonWorld(DungeonState initial);

  StepResult apply(const std::string& action, const nlohmann::json& params);
  DungeonState snapshot() const;
  std::string serialized() const;

 private:
  mutable std::mutex mu_;
  DungeonState state_;
};

// Scripts run until done or out of time; logs beyond this are counted only.
inline constexpr std::size_t kMaxScriptLogs = 1000;
inline constexpr int kMaxCallDepth = 32;

enum class Verb { kMove, kAttack, kPickup, kWait, kCall, kGoto, kLabel };

struct Statement {
  Verb verb;
  std::string arg;
  int line = 0;
};

struct DslProgram {
  std::vector<Statement> statements;
  std::map<std::string, std::size_t> labels;
};

// Statements are separated by newlines or ';'. `#` starts a comment.
// Throws ScenarioError naming the line on a parse error.
DslProgram parse_program(std::string_view code);

// Interprets scripts against a DungeonWorld. Failures are reported in the
// metadata, never thrown.
class DslExecutor : public CodeExecutor {
 public:
  explicit DslExecutor(std::shared_ptr<DungeonWorld> world);

  CodeRunResult run(const std::string& code, const std::vector<HelperProgram>& programs,
                    Seconds timeout) override;

 private:
  std::shared_ptr<DungeonWorld> world_;
};

// Environment side of the protocol: connects to the agent, sends the start
// command, then answers GetStatus and ACTION frames until the agent hangs
// up. Any other frame is a protocol violation and ends the session.
class ReferenceEnvironment {
 public:
  explicit ReferenceEnvironment(std::shared_ptr<DungeonWorld> world,
                                std::ostream* log = nullptr);

  // Returns the number of frames answered.
  int run(const std::string& host, int port, Seconds connect_retry = Seconds(5.0));

  // Hook for tests: called with each answered ACTION payload.
  std::function<void(const std::string&)> on_action;

 private:
  std::shared_ptr<DungeonWorld> world_;
  std::ostream* log_;
};

}  // namespace persona::refenv

#endif  // PERSONA_REFENV_H_
