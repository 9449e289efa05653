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

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <optional>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "persona/refenv.h"
#include "util/strings.h"

namespace persona::refenv {

using nlohmann::json;

int manhattan(Position a, Position b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

bool DungeonState::in_bounds(Position p) const {
  return p.x >= 0 && p.y >= 0 && p.x < width() && p.y < height();
}

char DungeonState::terrain_at(Position p) const {
  return in_bounds(p) ? terrain[static_cast<std::size_t>(p.y)][static_cast<std::size_t>(p.x)]
                      : kWall;
}

const Enemy* DungeonState::enemy_at(Position p) const {
  for (const auto& [id, e] : enemies) {
    if (e.pos == p) return &e;
  }
  return nullptr;
}

const Item* DungeonState::item_at(Position p) const {
  for (const auto& [id, i] : items) {
    if (i.pos == p) return &i;
  }
  return nullptr;
}

std::vector<std::string> check_invariants(const DungeonState& s) {
  std::vector<std::string> problems;
  for (const auto& row : s.terrain) {
    if (static_cast<int>(row.size()) != s.width()) problems.push_back("ragged terrain row");
    for (char c : row) {
      if (c != kWall && c != kFloor && c != kExit) {
        problems.push_back(fmt::format("unknown terrain '{}'", c));
      }
    }
  }
  if (!s.in_bounds(s.player)) problems.push_back("player out of bounds");
  if (s.terrain_at(s.player) == kWall) problems.push_back("player inside a wall");
  if (s.enemy_at(s.player)) problems.push_back("player shares a cell with an enemy");
  if (s.hp < 0 || s.hp > s.max_hp) problems.push_back("hp outside [0, max_hp]");
  for (const auto& [id, e] : s.enemies) {
    if (!s.in_bounds(e.pos) || s.terrain_at(e.pos) == kWall) {
      problems.push_back(fmt::format("enemy {} misplaced", id));
    }
    if (e.hp <= 0) problems.push_back(fmt::format("enemy {} kept at hp {}", id, e.hp));
  }
  for (const auto& [id, i] : s.items) {
    if (!s.in_bounds(i.pos) || s.terrain_at(i.pos) == kWall) {
      problems.push_back(fmt::format("item {} misplaced", id));
    }
  }
  if (s.turn < 0) problems.push_back("negative turn");
  return problems;
}

namespace {

std::optional<Position> direction_offset(std::string_view dir) {
  if (dir == "north") return Position{0, -1};
  if (dir == "south") return Position{0, 1};
  if (dir == "east") return Position{1, 0};
  if (dir == "west") return Position{-1, 0};
  return std::nullopt;
}

std::optional<std::string> param(const json& params, const char* key) {
  if (!params.is_object()) return std::nullopt;
  auto it = params.find(key);
  if (it == params.end() || it->is_null()) return std::nullopt;
  return it->is_string() ? it->get<std::string>() : it->dump();
}

Position offset(Position p, Position d) { return {p.x + d.x, p.y + d.y}; }

}  // namespace

StepResult step(const DungeonState& state, const std::string& action, const json& params) {
  StepResult r{state, {}, {}};
  auto& s = r.state;
  auto reject = [&](std::string why) {
    r.state = state;
    r.errors.push_back(std::move(why));
    return r;
  };

  if (action == "move") {
    auto dir = param(params, "dir");
    if (!dir) return reject("move needs a dir");
    auto d = direction_offset(*dir);
    if (!d) return reject(fmt::format("invalid direction: {}", *dir));
    auto next = offset(s.player, *d);
    if (!s.in_bounds(next) || s.terrain_at(next) == kWall || s.enemy_at(next)) {
      return reject("blocked");
    }
    s.player = next;
    r.logs.push_back(fmt::format("moved {} to ({},{})", *dir, next.x, next.y));
    if (const auto* item = s.item_at(next)) r.logs.push_back("you see " + item->id);
    if (s.terrain_at(next) == kExit) r.logs.push_back("standing on the exit");
  } else if (action == "attack") {
    const Enemy* target = nullptr;
    if (auto id = param(params, "target")) {
      auto it = s.enemies.find(*id);
      if (it == s.enemies.end()) return reject(fmt::format("no such enemy: {}", *id));
      if (manhattan(it->second.pos, s.player) != 1) {
        return reject(fmt::format("{} is out of reach", *id));
      }
      target = &it->second;
    } else if (auto dir = param(params, "dir")) {
      auto d = direction_offset(*dir);
      if (!d) return reject(fmt::format("invalid direction: {}", *dir));
      target = s.enemy_at(offset(s.player, *d));
      if (!target) return reject(fmt::format("nothing to attack to the {}", *dir));
    } else {
      return reject("attack needs a target or dir");
    }
    auto& enemy = s.enemies.at(target->id);
    enemy.hp -= kAttackDamage;
    r.logs.push_back(fmt::format("hit {} for {}", enemy.id, kAttackDamage));
    if (enemy.hp <= 0) {
      r.logs.push_back("defeated " + enemy.id);
      s.enemies.erase(enemy.id);
    }
  } else if (action == "pickup") {
    const auto* item = s.item_at(s.player);
    if (!item) return reject("nothing to pick up");
    auto id = item->id;
    s.inventory.push_back(id);
    s.items.erase(id);
    r.logs.push_back("picked up " + id);
  } else if (action == "wait") {
    r.logs.push_back("waited");
  } else if (action == "descend") {
    if (s.terrain_at(s.player) != kExit) return reject("not on the exit");
    ++s.level;
    s.player = s.start;
    r.logs.push_back(fmt::format("descended to level {}", s.level));
  } else {
    return reject(fmt::format("unknown action: {}", action));
  }
  ++s.turn;
  return r;
}

std::string serialize_state(const DungeonState& s) {
  std::string out;
  out += fmt::format("scenario: {}\n", s.scenario);
  out += fmt::format("level: {}\n", s.level);
  out += fmt::format("turn: {}\n", s.turn);
  out += fmt::format("player: ({},{}) hp {}/{}\n", s.player.x, s.player.y, s.hp, s.max_hp);
  out += fmt::format("start: ({},{})\n", s.start.x, s.start.y);
  out += fmt::format("inventory: {}\n",
                     s.inventory.empty() ? std::string("(empty)")
                                         : fmt::format("{}", fmt::join(s.inventory, ", ")));

  // (distance, kind, id) keeps the nearby list canonical.
  std::vector<std::tuple<int, int, std::string, std::string>> nearby;
  for (const auto& [id, e] : s.enemies) {
    int d = manhattan(e.pos, s.player);
    if (d <= kVisibleRadius) {
      nearby.emplace_back(d, 0, id,
                          fmt::format("enemy {} ({},{}) hp {} distance {}", id, e.pos.x,
                                      e.pos.y, e.hp, d));
    }
  }
  for (const auto& [id, i] : s.items) {
    int d = manhattan(i.pos, s.player);
    if (d <= kVisibleRadius) {
      nearby.emplace_back(d, 1, id,
                          fmt::format("item {} ({},{}) distance {}", id, i.pos.x, i.pos.y, d));
    }
  }
  std::sort(nearby.begin(), nearby.end());
  out += "nearby:\n";
  if (nearby.empty()) out += "  (none)\n";
  for (const auto& n : nearby) out += "  " + std::get<3>(n) + "\n";

  out += "entities:\n";
  if (s.enemies.empty() && s.items.empty()) out += "  (none)\n";
  for (const auto& [id, e] : s.enemies) {
    out += fmt::format("  enemy {} {} ({},{}) hp {}\n", id, e.glyph, e.pos.x, e.pos.y, e.hp);
  }
  for (const auto& [id, i] : s.items) {
    out += fmt::format("  item {} {} ({},{})\n", id, i.glyph, i.pos.x, i.pos.y);
  }
  out += "terrain:\n";
  for (const auto& row : s.terrain) out += row + "\n";
  out += fmt::format("seed: {}\n", s.rng_seed);
  return out;
}

namespace {

[[noreturn]] void bad(std::string_view source, int line, const std::string& why) {
  throw ScenarioError(fmt::format("{}:{}: {}", source, line, why));
}

template <typename T>
T number(std::string_view text, std::string_view source, int line) {
  T value{};
  auto t = util::trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    bad(source, line, fmt::format("expected a number, got '{}'", t));
  }
  return value;
}

// "(x,y)"
Position position(std::string_view text, std::string_view source, int line) {
  auto t = util::trim(text);
  if (t.size() < 5 || t.front() != '(' || t.back() != ')') {
    bad(source, line, fmt::format("expected (x,y), got '{}'", t));
  }
  auto comma = t.find(',');
  if (comma == std::string::npos) bad(source, line, "expected (x,y)");
  return {number<int>(std::string_view(t).substr(1, comma - 1), source, line),
          number<int>(std::string_view(t).substr(comma + 1, t.size() - comma - 2), source, line)};
}

bool valid_id(std::string_view id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

}  // namespace

DungeonState parse_state(std::string_view text) {
  constexpr std::string_view src = "<state>";
  DungeonState s;
  auto lines = util::split_lines(text);
  std::size_t i = 0;
  auto value = [&](std::string_view key) -> std::string {
    if (i >= lines.size() || lines[i].rfind(std::string(key) + ": ", 0) != 0) {
      bad(src, static_cast<int>(i + 1), fmt::format("expected '{}:'", key));
    }
    return lines[i++].substr(key.size() + 2);
  };
  auto header = [&](std::string_view key) {
    if (i >= lines.size() || lines[i] != std::string(key) + ":") {
      bad(src, static_cast<int>(i + 1), fmt::format("expected '{}:'", key));
    }
    ++i;
  };
  s.scenario = value("scenario");
  s.level = number<int>(value("level"), src, static_cast<int>(i));
  s.turn = number<int>(value("turn"), src, static_cast<int>(i));
  {
    auto p = util::split_whitespace(value("player"));
    if (p.size() != 3 || p[1] != "hp") bad(src, static_cast<int>(i), "malformed player line");
    s.player = position(p[0], src, static_cast<int>(i));
    auto slash = p[2].find('/');
    if (slash == std::string::npos) bad(src, static_cast<int>(i), "malformed hp");
    s.hp = number<int>(std::string_view(p[2]).substr(0, slash), src, static_cast<int>(i));
    s.max_hp = number<int>(std::string_view(p[2]).substr(slash + 1), src, static_cast<int>(i));
  }
  s.start = position(value("start"), src, static_cast<int>(i));
  if (auto inv = value("inventory"); inv != "(empty)") {
    for (const auto& id : util::split(inv, ',')) s.inventory.push_back(util::trim(id));
  }
  header("nearby");
  while (i < lines.size() && lines[i].rfind("  ", 0) == 0) ++i;
  header("entities");
  for (; i < lines.size() && lines[i].rfind("  ", 0) == 0; ++i) {
    auto f = util::split_whitespace(lines[i]);
    int line = static_cast<int>(i + 1);
    if (f.size() == 1 && f[0] == "(none)") continue;
    if (f.size() == 6 && f[0] == "enemy" && f[4] == "hp" && f[2].size() == 1) {
      s.enemies[f[1]] = Enemy{f[1], f[2][0], position(f[3], src, line), number<int>(f[5], src, line)};
    } else if (f.size() == 4 && f[0] == "item" && f[2].size() == 1) {
      s.items[f[1]] = Item{f[1], f[2][0], position(f[3], src, line)};
    } else {
      bad(src, line, "malformed entity line");
    }
  }
  header("terrain");
  for (; i < lines.size() && lines[i].rfind("seed: ", 0) != 0; ++i) s.terrain.push_back(lines[i]);
  s.rng_seed = number<std::int64_t>(value("seed"), src, static_cast<int>(i));
  return s;
}

DungeonState parse_scenario(std::string_view text, std::string_view source) {
  DungeonState s;
  std::vector<std::string> grid;
  int grid_line = 0;
  struct Legend {
    bool enemy;
    std::string id;
    int hp;
    int line;
  };
  std::map<char, Legend> legend;
  bool have_name = false, in_grid = false, have_max = false;
  int line_no = 0;
  for (const auto& raw : util::split_lines(text)) {
    ++line_no;
    if (in_grid) {
      if (util::trim(raw) == "end") {
        in_grid = false;
      } else {
        grid.push_back(raw);
      }
      continue;
    }
    auto line = util::trim(raw);
    if (line.empty() || line[0] == ';') continue;
    auto f = util::split_whitespace(line);
    const auto& key = f[0];
    if (key == "grid" && f.size() == 1) {
      if (!grid.empty()) bad(source, line_no, "second grid block");
      in_grid = true;
      grid_line = line_no;
    } else if (key == "name" && f.size() >= 2) {
      s.scenario = util::trim(line.substr(4));
      have_name = true;
    } else if (key == "seed" && f.size() == 2) {
      s.rng_seed = number<std::int64_t>(f[1], source, line_no);
    } else if (key == "hp" && f.size() == 2) {
      s.hp = number<int>(f[1], source, line_no);
    } else if (key == "max_hp" && f.size() == 2) {
      s.max_hp = number<int>(f[1], source, line_no);
      have_max = true;
    } else if ((key == "item" && f.size() == 3) || (key == "enemy" && f.size() == 4)) {
      if (f[1].size() != 1) bad(source, line_no, "glyph must be one character");
      char glyph = f[1][0];
      if (glyph == kWall || glyph == kFloor || glyph == kExit || glyph == '@') {
        bad(source, line_no, fmt::format("glyph '{}' is reserved", glyph));
      }
      if (!valid_id(f[2])) bad(source, line_no, fmt::format("invalid id '{}'", f[2]));
      if (legend.contains(glyph)) bad(source, line_no, fmt::format("glyph '{}' declared twice", glyph));
      int hp = key == "enemy" ? number<int>(f[3], source, line_no) : 0;
      if (key == "enemy" && hp <= 0) bad(source, line_no, "enemy hp must be positive");
      legend[glyph] = {key == "enemy", f[2], hp, line_no};
    } else {
      bad(source, line_no, fmt::format("unrecognized line '{}'", line));
    }
  }
  if (in_grid) bad(source, grid_line, "grid block has no 'end'");
  if (!have_name) bad(source, line_no, "scenario has no name");
  if (grid.empty()) bad(source, line_no, "scenario has no grid");
  if (!have_max) s.max_hp = s.hp;

  bool have_player = false;
  std::set<char> placed;
  for (std::size_t y = 0; y < grid.size(); ++y) {
    const auto& row = grid[y];
    if (row.size() != grid[0].size()) {
      bad(source, grid_line + static_cast<int>(y) + 1, "grid rows differ in width");
    }
    std::string terrain;
    for (std::size_t x = 0; x < row.size(); ++x) {
      char c = row[x];
      Position p{static_cast<int>(x), static_cast<int>(y)};
      if (c == kWall || c == kFloor || c == kExit) {
        terrain += c;
        continue;
      }
      terrain += kFloor;
      if (c == '@') {
        if (have_player) bad(source, grid_line + static_cast<int>(y) + 1, "two players");
        have_player = true;
        s.player = s.start = p;
        continue;
      }
      auto it = legend.find(c);
      if (it == legend.end()) {
        bad(source, grid_line + static_cast<int>(y) + 1, fmt::format("undeclared glyph '{}'", c));
      }
      if (!placed.insert(c).second) {
        bad(source, grid_line + static_cast<int>(y) + 1,
            fmt::format("glyph '{}' appears twice", c));
      }
      if (it->second.enemy) {
        s.enemies[it->second.id] = Enemy{it->second.id, c, p, it->second.hp};
      } else {
        s.items[it->second.id] = Item{it->second.id, c, p};
      }
    }
    s.terrain.push_back(std::move(terrain));
  }
  if (!have_player) bad(source, grid_line, "grid has no player '@'");
  for (const auto& [glyph, l] : legend) {
    if (!placed.contains(glyph)) bad(source, l.line, fmt::format("'{}' is not on the grid", glyph));
  }
  if (auto problems = check_invariants(s); !problems.empty()) {
    bad(source, grid_line, problems.front());
  }
  return s;
}

DungeonState load_scenario(const std::filesystem::path& path) {
  std::string text;
  try {
    text = util::read_file(path);
  } catch (const std::exception& e) {
    throw ScenarioError(e.what());
  }
  return parse_scenario(text, path.string());
}

DungeonWorld::DungeonWorld(DungeonState initial) : state_(std::move(initial)) {}

StepResult DungeonWorld::apply(const std::string& action, const json& params) {
  std::lock_guard lock(mu_);
  auto r = step(state_, action, params);
  state_ = r.state;
  return r;
}

DungeonState DungeonWorld::snapshot() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::string DungeonWorld::serialized() const { return serialize_state(snapshot()); }

}  // namespace persona::refenv
