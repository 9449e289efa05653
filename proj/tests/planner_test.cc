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

#include "persona/planner.h"

#include <gtest/gtest.h>

#include "persona/refenv.h"
#include "test_support.h"

namespace persona {
namespace {

const std::string kPlanMarker = "Choose the single next action";
const std::string kReviseMarker = "Fix the plan";
const std::string kDecomposeMarker = "Break the objective";

class PlannerTest : public ::testing::Test {
 protected:
  PlannerTest()
      : templates_(testing::dungeon_templates()),
        schema_(ActionSchema::load(testing::data_dir() / "games/DUNGEON/capabilities.tsv")),
        backend_(std::make_shared<ScriptedBackend>("no rule matched")),
        gateway_(backend_, nullptr) {}

  PlannerContext context() const {
    PlannerContext ctx;
    ctx.iteration = 1;
    ctx.current_state = refenv::serialize_state(
        refenv::load_scenario(testing::scenario("combat-arena")));
    ctx.personality_prompt = "You like to explore.";
    ctx.capabilities = schema_.action_names();
    return ctx;
  }

  Planner planner(PlannerOptions options = {}) const { return Planner(templates_, schema_, options); }

  TemplateSet templates_;
  ActionSchema schema_;
  std::shared_ptr<ScriptedBackend> backend_;
  LlmGateway gateway_;
};

TaskDecomposition three_steps() {
  return TaskDecomposition("objective-1", "craft a tool", {"gather wood", "build table", "craft"});
}

TEST(TaskDecompositionTest, AtMostOneActiveAndStatusesAdvance) {
  auto d = three_steps();
  EXPECT_EQ(d.active_index(), 0u);
  d.finish_active(SubTaskStatus::kDone);
  EXPECT_EQ(d.active_index(), 1u);
  d.finish_active(SubTaskStatus::kFailed);
  d.finish_active(SubTaskStatus::kDone);
  EXPECT_TRUE(d.complete());
  EXPECT_EQ(d.sub_tasks()[1].status, SubTaskStatus::kFailed);
  EXPECT_THROW(d.finish_active(SubTaskStatus::kDone), std::invalid_argument);
  EXPECT_THROW(TaskDecomposition("o", "t", {}), PlannerError);
}

TEST(TaskDecompositionTest, RandomWalkKeepsInvariant) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> steps(1 + rng() % 6, "step");
    TaskDecomposition d("o", "t", steps);
    int streak = 0;
    std::vector<SubTaskStatus> prev;
    for (const auto& s : d.sub_tasks()) prev.push_back(s.status);
    while (!d.complete()) {
      auto outcome = static_cast<Outcome>(rng() % 3);
      auto u = update_progress(d, outcome, streak);
      d = u.decomposition;
      streak = u.failure_streak;
      int active = 0;
      for (std::size_t i = 0; i < d.sub_tasks().size(); ++i) {
        auto now = d.sub_tasks()[i].status;
        active += now == SubTaskStatus::kActive;
        EXPECT_GE(static_cast<int>(now), static_cast<int>(prev[i]));
        if (prev[i] == SubTaskStatus::kDone || prev[i] == SubTaskStatus::kFailed) {
          EXPECT_EQ(now, prev[i]);
        }
        prev[i] = now;
      }
      EXPECT_LE(active, 1);
    }
  }
}

TEST(ProgressTest, AdvanceAndStreakRules) {
  auto u = update_progress(three_steps(), Outcome::kSuccess, 2);
  EXPECT_EQ(u.decomposition.active_index(), 1u);
  EXPECT_EQ(u.failure_streak, 0);

  auto d = three_steps();
  d.finish_active(SubTaskStatus::kDone);
  d.finish_active(SubTaskStatus::kDone);
  u = update_progress(d, Outcome::kSuccess, 0);
  EXPECT_TRUE(u.decomposition.complete());
  EXPECT_EQ(u.decomposition.active(), nullptr);

  u = update_progress(three_steps(), Outcome::kFailure, 0);
  EXPECT_EQ(u.decomposition.active_index(), 0u);
  EXPECT_EQ(u.failure_streak, 1);

  u = update_progress(three_steps(), Outcome::kPartial, 1);
  EXPECT_EQ(u.decomposition, three_steps());
  EXPECT_EQ(u.failure_streak, 1);
}

TEST_F(PlannerTest, ChooseMode) {
  auto ctx = context();
  EXPECT_EQ(choose_mode(ctx, 3), PlanningMode::kBottomUp);
  ctx.objective = "craft a tool";
  EXPECT_EQ(choose_mode(ctx, 3), PlanningMode::kTopDown);
  ctx.decomposition = three_steps();
  EXPECT_EQ(choose_mode(ctx, 3), PlanningMode::kBottomUp);
  ctx.failure_streak = 3;
  EXPECT_EQ(choose_mode(ctx, 3), PlanningMode::kTopDown);
}

TEST_F(PlannerTest, DecomposeThreeSubTasks) {
  backend_->add_rule(kDecomposeMarker, R"({"sub_tasks": ["gather wood", "build table", "craft"]})");
  auto ctx = context();
  ctx.objective = "craft a tool";
  auto p = planner();
  auto d = p.decompose(ctx, gateway_);
  ASSERT_EQ(d.sub_tasks().size(), 3u);
  EXPECT_EQ(d.active_index(), 0u);
  EXPECT_EQ(d.objective_text(), "craft a tool");
}

TEST_F(PlannerTest, DecomposeSucceedsOnThirdAttempt) {
  backend_->add_rule(kDecomposeMarker,
                     {ScriptedReply::text_reply("I think we should start with wood."),
                      ScriptedReply::text_reply(R"({"steps": ["a"]})"),
                      ScriptedReply::text_reply(R"({"sub_tasks": [{"description": "a"}, "b"]})")});
  auto ctx = context();
  ctx.objective = "craft a tool";
  auto p = planner();
  p.begin_iteration();
  auto d = p.decompose(ctx, gateway_);
  EXPECT_EQ(d.sub_tasks().size(), 2u);
  EXPECT_EQ(backend_->call_count(), 3u);
  auto retry_prompt = backend_->call_log()[1].prompt;
  EXPECT_NE(retry_prompt.find("could not be used"), std::string::npos);
}

TEST_F(PlannerTest, DecomposeEmptyListIsDegenerate) {
  backend_->add_rule(kDecomposeMarker, R"({"sub_tasks": []})");
  auto ctx = context();
  ctx.objective = "craft a tool";
  auto p = planner();
  EXPECT_THROW(p.decompose(ctx, gateway_), PlannerError);
  EXPECT_EQ(backend_->call_count(), 1u);
}

TEST_F(PlannerTest, PlanNextParsesReply) {
  backend_->add_rule(kPlanMarker, R"({"action":"move","parameters":{"dir":"north"}})");
  auto p = planner();
  auto plan = p.plan_next(context(), gateway_);
  EXPECT_EQ(plan.action, "move");
  EXPECT_EQ(plan.parameters["dir"], "north");
  EXPECT_EQ(plan.mode, PlanMode::kBottomUp);
  EXPECT_FALSE(plan.objective_ref);
}

TEST_F(PlannerTest, PlanNextStampsObjective) {
  backend_->add_rule(kPlanMarker, R"({"action":"wait"})");
  auto ctx = context();
  ctx.objective = "craft a tool";
  ctx.decomposition = three_steps();
  ctx.decomposition->finish_active(SubTaskStatus::kDone);
  auto p = planner();
  auto plan = p.plan_next(ctx, gateway_);
  EXPECT_EQ(plan.mode, PlanMode::kBottomUp);
  EXPECT_EQ(plan.objective_ref, (ObjectiveRef{"objective-1", 1}));
  ctx.fresh_decomposition = true;
  EXPECT_EQ(p.plan_next(ctx, gateway_).mode, PlanMode::kTopDownStep);
  EXPECT_EQ(p.validate_plan(plan, ctx).verdict, Verdict::kValid);
}

TEST_F(PlannerTest, TraitKeyedScriptGivesDistinctActions) {
  backend_->add_rule("caution", R"({"action":"move","parameters":{"dir":"west"},"rationale":"retreat"})");
  backend_->add_rule("aggression", R"({"action":"attack","parameters":{"target":"goblin"}})");
  auto p = planner();
  auto ctx = context();
  ctx.personality_prompt = "Trait: caution. Stay safe.";
  auto careful = p.plan_next(ctx, gateway_);
  ctx.personality_prompt = "Trait: aggression. Fight.";
  auto bold = p.plan_next(ctx, gateway_);
  EXPECT_NE(careful.action, bold.action);
  EXPECT_EQ(bold.action, "attack");
}

TEST_F(PlannerTest, PromptCarriesEveryRetrievedMemory) {
  backend_->add_rule(kPlanMarker, R"({"action":"wait"})");
  auto ctx = context();
  for (int i = 0; i < 5; ++i) {
    MemoryRecord r;
    r.plan_summary = "plan-summary-" + std::to_string(i);
    r.preference_summary = "preference-" + std::to_string(i);
    ctx.preferred_memories.push_back({r, 0.9});
    r.plan_summary = "related-summary-" + std::to_string(i);
    ctx.related_memories.push_back({r, 0.5});
  }
  auto p = planner();
  p.plan_next(ctx, gateway_);
  auto prompt = backend_->call_log().back().prompt;
  for (int i = 0; i < 5; ++i) {
    EXPECT_NE(prompt.find("plan-summary-" + std::to_string(i)), std::string::npos);
    EXPECT_NE(prompt.find("preference-" + std::to_string(i)), std::string::npos);
    EXPECT_NE(prompt.find("related-summary-" + std::to_string(i)), std::string::npos);
  }
  EXPECT_NE(prompt.find(ctx.current_state), std::string::npos);
}

TEST_F(PlannerTest, EmptyCapabilitiesRefused) {
  auto ctx = context();
  ctx.capabilities.clear();
  auto p = planner();
  EXPECT_THROW(p.plan_next(ctx, gateway_), PlannerError);
  EXPECT_EQ(backend_->call_count(), 0u);
}

TEST_F(PlannerTest, ValidateMembershipAndSchema) {
  auto p = planner();
  auto ctx = context();
  ActionPlan fly;
  fly.action = "fly";
  auto r = p.validate_plan(fly, ctx);
  ASSERT_EQ(r.verdict, Verdict::kRevise);
  EXPECT_NE(r.reasons.at(0).find("fly"), std::string::npos);

  ActionPlan move;
  move.action = "move";
  EXPECT_EQ(p.validate_plan(move, ctx).verdict, Verdict::kRevise);
  move.parameters["dir"] = "up";
  EXPECT_EQ(p.validate_plan(move, ctx).verdict, Verdict::kRevise);
  move.parameters["dir"] = "north";
  EXPECT_EQ(p.validate_plan(move, ctx).verdict, Verdict::kValid);
}

TEST_F(PlannerTest, ValidateTargetAgainstState) {
  auto p = planner();
  auto ctx = context();
  ActionPlan attack;
  attack.action = "attack";
  attack.parameters["target"] = "goblin";
  EXPECT_EQ(p.validate_plan(attack, ctx).verdict, Verdict::kValid);
  attack.parameters["target"] = "dragon";
  EXPECT_EQ(p.validate_plan(attack, ctx).verdict, Verdict::kRevise);
  attack.parameters["target"] = "gob";  // whole words only
  EXPECT_EQ(p.validate_plan(attack, ctx).verdict, Verdict::kRevise);
}

TEST_F(PlannerTest, ReviseVerdictAlwaysHasReasons) {
  auto p = planner();
  auto ctx = context();
  for (const char* action : {"", "fly", "move", "attack", "wait", "descend"}) {
    ActionPlan plan;
    plan.action = action;
    auto r = p.validate_plan(plan, ctx);
    EXPECT_EQ(r.verdict == Verdict::kRevise, !r.reasons.empty()) << action;
  }
}

TEST_F(PlannerTest, ReviseFixedOnFirstRound) {
  backend_->add_rule(kReviseMarker, R"({"action":"move","parameters":{"dir":"south"}})");
  auto p = planner();
  auto ctx = context();
  ActionPlan fly;
  fly.action = "fly";
  auto report = p.validate_plan(fly, ctx);
  auto fixed = p.revise_plan(fly, report, ctx, gateway_);
  EXPECT_EQ(fixed.action, "move");
  EXPECT_EQ(backend_->call_count(), 1u);
  EXPECT_NE(backend_->call_log()[0].prompt.find("'fly'"), std::string::npos);
}

TEST_F(PlannerTest, ReviseGivesUpAfterConfiguredRounds) {
  backend_->add_rule(kReviseMarker, R"({"action":"fly"})");
  PlannerOptions options;
  options.revision_rounds = 4;
  auto p = planner(options);
  auto ctx = context();
  ActionPlan fly;
  fly.action = "fly";
  EXPECT_THROW(p.revise_plan(fly, p.validate_plan(fly, ctx), ctx, gateway_), PlannerError);
  EXPECT_EQ(backend_->call_count(), 4u);
}

TEST_F(PlannerTest, ReviseRejectsValidPlan) {
  auto p = planner();
  ActionPlan wait;
  wait.action = "wait";
  EXPECT_THROW(p.revise_plan(wait, ValidationReport{}, context(), gateway_),
               std::invalid_argument);
}

TEST(ActionPlanTest, JsonRoundTrip) {
  ActionPlan plan;
  plan.mode = PlanMode::kTopDownStep;
  plan.action = "attack";
  plan.parameters = {{"target", "goblin"}};
  plan.rationale = "it is close";
  plan.objective_ref = ObjectiveRef{"objective-2", 1};
  plan.postcondition = "defeated goblin";
  auto j = nlohmann::json::parse(to_json_text(plan));
  EXPECT_EQ(j["mode"], "top_down_step");
  EXPECT_EQ(j["objective_ref"]["index"], 1);
  auto back = plan_from_json(j);
  EXPECT_EQ(back.action, plan.action);
  EXPECT_EQ(back.parameters, plan.parameters);
  EXPECT_EQ(back.postcondition, plan.postcondition);
  EXPECT_THROW(plan_from_json(nlohmann::json::parse(R"({"action": ""})")), PlannerError);
  EXPECT_THROW(plan_from_json(nlohmann::json::parse(R"({"action": "a", "parameters": 3})")),
               PlannerError);
}

TEST(ActionSchemaTest, ParseAndDescribe) {
  auto s = ActionSchema::parse("move\tdir=north|south\nattack\ttarget=@state\nwait\n");
  EXPECT_EQ(s.action_names(), (std::vector<std::string>{"move", "attack", "wait"}));
  EXPECT_EQ(s.find("move")->required.at(0).allowed.size(), 2u);
  EXPECT_TRUE(s.find("attack")->required.at(0).from_state);
  EXPECT_THROW(ActionSchema::parse("move\nmove\n"), PlannerError);
  EXPECT_NE(s.describe().find("dir=north|south"), std::string::npos);
}

}  // namespace
}  // namespace persona
