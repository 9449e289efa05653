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

#include "persona/refenv.h"

#include <gtest/gtest.h>

#include <future>
#include <random>

#include "test_support.h"

namespace persona::refenv {
namespace {

const char* kSmall = R"(name small
seed 7
hp 10
max_hp 10
grid
########
#......#
#......#
#.@....#
#......#
#.....>#
########
end
)";

DungeonState arena() { return load_scenario(persona::testing::scenario("combat-arena")); }

TEST(StepTest, MoveNorth) {
  auto s = parse_scenario(kSmall);
  ASSERT_EQ(s.player, (Position{2, 3}));
  auto r = step(s, "move", {{"dir", "north"}});
  EXPECT_TRUE(r.errors.empty());
  EXPECT_EQ(r.state.player, (Position{2, 2}));
  EXPECT_EQ(r.state.turn, 1);
}

TEST(StepTest, WallBlocksWithoutChangingState) {
  auto s = parse_scenario(kSmall);
  auto once = step(s, "move", {{"dir", "west"}}).state;
  auto r = step(once, "move", {{"dir", "west"}});
  EXPECT_EQ(r.errors, std::vector<std::string>{"blocked"});
  EXPECT_EQ(r.state, once);
}

TEST(StepTest, AttackDefeatsWeakEnemy) {
  auto s = arena();
  ASSERT_EQ(s.enemies.at("goblin").hp, 2);
  auto r = step(s, "attack", {{"dir", "east"}});
  EXPECT_TRUE(r.errors.empty());
  EXPECT_FALSE(r.state.enemies.contains("goblin"));
  EXPECT_NE(std::find(r.logs.begin(), r.logs.end(), "defeated goblin"), r.logs.end());
  auto by_id = step(s, "attack", {{"target", "goblin"}});
  EXPECT_EQ(by_id.state, r.state);
}

TEST(StepTest, RejectionsAreNamed) {
  auto s = arena();
  EXPECT_EQ(step(s, "attack", {{"target", "orc"}}).errors,
            std::vector<std::string>{"orc is out of reach"});
  EXPECT_EQ(step(s, "attack", {{"target", "dragon"}}).errors,
            std::vector<std::string>{"no such enemy: dragon"});
  EXPECT_EQ(step(s, "dance", {}).errors, std::vector<std::string>{"unknown action: dance"});
  EXPECT_EQ(step(s, "move", {{"dir", "up"}}).errors,
            std::vector<std::string>{"invalid direction: up"});
  EXPECT_EQ(step(s, "move", {{"dir", "east"}}).errors, std::vector<std::string>{"blocked"});
  EXPECT_EQ(step(s, "pickup", {}).errors, std::vector<std::string>{"nothing to pick up"});
}

TEST(StepTest, PickupAndDescend) {
  auto s = load_scenario(persona::testing::scenario("open-room"));
  auto gem = s.items.begin()->second;
  s.player = gem.pos;
  auto r = step(s, "pickup", {});
  EXPECT_EQ(r.state.inventory, std::vector<std::string>{gem.id});
  EXPECT_TRUE(r.state.items.empty());
  EXPECT_FALSE(step(s, "descend", {}).errors.empty());
}

TEST(StepTest, PureAndDeterministic) {
  auto s = arena();
  auto copy = s;
  auto a = step(s, "move", {{"dir", "north"}});
  auto b = step(s, "move", {{"dir", "north"}});
  EXPECT_EQ(s, copy);
  EXPECT_EQ(a.state, b.state);
  EXPECT_EQ(a.logs, b.logs);
}

TEST(StepTest, RandomWalkKeepsInvariants) {
  const std::vector<std::string> actions = {"move", "attack", "pickup", "wait", "descend", "junk"};
  const std::vector<std::string> dirs = {"north", "south", "east", "west", "sideways"};
  for (const auto* name : {"open-room", "combat-arena", "corridor-maze"}) {
    auto s = load_scenario(persona::testing::scenario(name));
    std::mt19937 rng(42);
    for (int i = 0; i < 10000; ++i) {
      const auto& action = actions[rng() % actions.size()];
      nlohmann::json params = {{"dir", dirs[rng() % dirs.size()]}};
      auto r = step(s, action, params);
      ASSERT_TRUE(check_invariants(r.state).empty()) << name << " step " << i;
      if (!r.errors.empty()) {
        ASSERT_EQ(r.state, s);
      } else {
        ASSERT_EQ(r.state.turn, s.turn + 1);
        if (action == "descend") {
          ASSERT_EQ(r.state.player, s.start);
          ASSERT_EQ(r.state.level, s.level + 1);
        } else {
          ASSERT_LE(manhattan(r.state.player, s.player), 1);
        }
      }
      s = std::move(r.state);
    }
  }
}

TEST(SerializeTest, EqualStatesEqualBytes) {
  auto a = arena();
  auto b = arena();
  EXPECT_EQ(serialize_state(a), serialize_state(b));
  auto moved = step(a, "move", {{"dir", "north"}}).state;
  EXPECT_NE(serialize_state(moved), serialize_state(a));
}

TEST(SerializeTest, NearbyHonorsRadius) {
  auto s = parse_scenario(R"(name far
grid
##########
#@.......#
#........#
#......e.#
##########
end
enemy e rat 3
)");
  ASSERT_EQ(manhattan(s.player, s.enemies.at("rat").pos), 8);
  auto text = serialize_state(s);
  EXPECT_NE(text.find("nearby:\n  (none)\n"), std::string::npos);
  s.player = {2, 2};  // distance 6
  text = serialize_state(s);
  EXPECT_NE(text.find("nearby:\n  (none)\n"), std::string::npos);
  s.player = {3, 2};  // distance 5
  EXPECT_NE(serialize_state(s).find("enemy rat (7,3) hp 3 distance 5"), std::string::npos);
}

TEST(SerializeTest, RoundTrip) {
  for (const auto* name : {"open-room", "combat-arena", "corridor-maze"}) {
    auto s = load_scenario(persona::testing::scenario(name));
    s = step(s, "wait", {}).state;
    s.inventory = {"gem", "key"};
    EXPECT_EQ(parse_state(serialize_state(s)), s) << name;
  }
  EXPECT_THROW(parse_state("scenario: x\n"), ScenarioError);
}

TEST(ScenarioTest, ErrorsNameTheLine) {
  try {
    parse_scenario("name x\ngrid\n###\n#@Z\n###\nend\n", "bad.txt");
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.txt:4"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_scenario("name x\n"), ScenarioError);
}

TEST(DslTest, ParsesStatements) {
  auto p = parse_program("move north; attack east # hit it\nloop: wait\ngoto loop\n");
  ASSERT_EQ(p.statements.size(), 5u);
  EXPECT_EQ(p.statements[0].verb, Verb::kMove);
  EXPECT_EQ(p.statements[1].arg, "east");
  EXPECT_EQ(p.statements[2].verb, Verb::kLabel);
  EXPECT_EQ(p.labels.at("loop"), 2u);
  EXPECT_EQ(p.statements[4].line, 3);
}

TEST(DslTest, ParseErrorsNameTheLine) {
  auto expect_error = [](const char* code, const char* fragment) {
    try {
      parse_program(code);
      ADD_FAILURE() << code;
    } catch (const ScenarioError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  expect_error("wait\nfly north", "line 2: unknown verb 'fly'");
  expect_error("move", "line 1: move takes 1 argument");
  expect_error("wait\n\ngoto nowhere", "line 3: goto to undefined label 'nowhere'");
  expect_error("a:\na:", "line 2: label 'a' defined twice");
}

TEST(DslTest, StopsAtFirstFailure) {
  auto world = std::make_shared<DungeonWorld>(arena());
  DslExecutor exec(world);
  auto r = exec.run("move east\nwait", {}, Seconds(5));
  ASSERT_EQ(r.metadata.errors.size(), 1u);
  EXPECT_EQ(r.metadata.errors[0], "line 1: blocked");
  EXPECT_TRUE(r.metadata.logs.empty());
  EXPECT_EQ(r.observation, serialize_state(arena()));
}

TEST(DslTest, HelperErrorsNameTheHelper) {
  auto world = std::make_shared<DungeonWorld>(arena());
  DslExecutor exec(world);
  auto r = exec.run("wait\ncall bump", {{"bump", "wait\nmove east"}}, Seconds(5));
  ASSERT_EQ(r.metadata.errors.size(), 1u);
  EXPECT_NE(r.metadata.errors[0].find("bump"), std::string::npos) << r.metadata.errors[0];
  EXPECT_NE(r.metadata.errors[0].find("blocked"), std::string::npos);
  auto missing = exec.run("call ghost", {}, Seconds(5));
  EXPECT_NE(missing.metadata.errors.at(0).find("unknown helper 'ghost'"), std::string::npos);
  auto recursive = exec.run("call self", {{"self", "call self"}}, Seconds(5));
  EXPECT_NE(recursive.metadata.errors.at(0).find("call depth"), std::string::npos);
}

TEST(DslTest, BoundedLoops) {
  auto world = std::make_shared<DungeonWorld>(arena());
  DslExecutor exec(world);
  auto start = std::chrono::steady_clock::now();
  auto r = exec.run("loop: wait; goto loop", {}, Seconds(0.5));
  EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(500));
  EXPECT_EQ(r.metadata.logs.size(), kMaxScriptLogs + 1);
  EXPECT_TRUE(r.metadata.timed_out);
  EXPECT_NE(r.metadata.errors.at(0).find("timeout"), std::string::npos);
  auto parse = exec.run("jump", {}, Seconds(1));
  EXPECT_FALSE(parse.metadata.errors.empty());
  EXPECT_FALSE(parse.observation.empty());
}

TEST(EnvironmentTest, ServesProtocol) {
  auto world = std::make_shared<DungeonWorld>(arena());
  ReferenceEnvironment env(world);
  std::vector<std::string> actions;
  env.on_action = [&](const std::string& p) { actions.push_back(p); };
  BridgeServer bridge(BridgeTimeouts{Seconds(5), Seconds(5)});
  bridge.serve("127.0.0.1", 0);
  auto answered = std::async(std::launch::async, [&] { return env.run("127.0.0.1", bridge.port()); });
  bridge.accept_environment(Seconds(5));
  EXPECT_EQ(bridge.get_command(Seconds(5)), "b");
  EXPECT_EQ(bridge.get_status(), serialize_state(arena()));

  auto fb = bridge.act_and_feedback(R"({"action":"move","parameters":{"dir":"north"}})");
  EXPECT_TRUE(fb.errors.empty());
  EXPECT_EQ(fb.logs, std::vector<std::string>{"moved north to (4,1)"});
  fb = bridge.act_and_feedback(R"({"action":"fly","parameters":{}})");
  EXPECT_EQ(fb.errors, std::vector<std::string>{"unknown action: fly"});
  fb = bridge.act_and_feedback("not json");
  ASSERT_EQ(fb.errors.size(), 1u);
  EXPECT_NE(fb.errors[0].find("malformed action payload"), std::string::npos);
  EXPECT_EQ(world->snapshot().player, (Position{4, 1}));
  bridge.close();
  EXPECT_EQ(answered.get(), 4);
  EXPECT_EQ(actions.size(), 3u);
}

TEST(EnvironmentTest, GivesUpWithoutAgent) {
  auto world = std::make_shared<DungeonWorld>(arena());
  ReferenceEnvironment env(world);
  int port = persona::testing::free_port();
  auto start = std::chrono::steady_clock::now();
  EXPECT_ANY_THROW(env.run("127.0.0.1", port, Seconds(0.3)));
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(3));
}

}  // namespace
}  // namespace persona::refenv
