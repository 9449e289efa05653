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

#include "persona/runner.h"

#include <gtest/gtest.h>

#include <sstream>
#include <thread>

#include "persona/refenv.h"
#include "test_support.h"

namespace persona {
namespace {

using namespace std::chrono_literals;
using testing::DungeonHarness;
using testing::TempDir;

std::shared_ptr<ScriptedBackend> demo_backend() {
  return ScriptedBackend::from_file(testing::data_dir() / "scripts" / "demo.json");
}

// Delays every planning call, so an iteration can outlive the budget.
class SlowPlanner : public LlmBackend {
 public:
  SlowPlanner(std::shared_ptr<LlmBackend> inner, std::chrono::milliseconds delay)
      : inner_(std::move(inner)), delay_(delay) {}
  CompletionResult complete(const CompletionRequest& req) override {
    if (req.prompt.find("Choose the single next action") != std::string::npos) {
      std::this_thread::sleep_for(delay_);
    }
    return inner_->complete(req);
  }

 private:
  std::shared_ptr<LlmBackend> inner_;
  std::chrono::milliseconds delay_;
};

struct RunOutcome {
  RunReport report;
  std::string log;
  int frames = 0;
};

RunOutcome run_dungeon(const std::string& config_text, std::shared_ptr<LlmBackend> backend,
                       const std::string& scenario = "open-room") {
  DungeonHarness harness(scenario);
  RunDependencies deps;
  harness.attach(deps);
  deps.instruction_backend = std::move(backend);
  std::ostringstream log;
  deps.log = &log;
  auto cfg = parse_config(config_text);
  RunOutcome out{run(cfg, std::move(deps)), {}, 0};
  harness.join();
  out.log = log.str();
  out.frames = harness.frames;
  EXPECT_TRUE(harness.error.empty()) << harness.error;
  return out;
}

TEST(StopCheckTest, BoundaryIsInclusive) {
  auto t0 = std::chrono::steady_clock::time_point{};
  EXPECT_FALSE(stop_check(t0, 125min, t0 + 124min));
  EXPECT_FALSE(stop_check(t0, 125min, t0 + 125min - 1ms));
  EXPECT_TRUE(stop_check(t0, 125min, t0 + 125min));
  EXPECT_TRUE(stop_check(t0, 125min, t0 + 200min));
  EXPECT_TRUE(stop_check(t0, 0ms, t0));
}

TEST(RunnerTest, StopsWhenBudgetElapses) {
  TempDir dir;
  auto text = testing::dungeon_config("budget", dir.path()) + "EXP_DURATION=0.01\n";
  auto start = std::chrono::steady_clock::now();
  auto out = run_dungeon(text, demo_backend());
  auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_EQ(out.report.stop_reason, StopReason::kDurationElapsed);
  EXPECT_GE(elapsed, 600ms);
  EXPECT_LT(elapsed, 5s);
  EXPECT_GE(out.report.iterations.size(), 1u);
  EXPECT_EQ(out.report.memories_at_end, static_cast<std::int64_t>(out.report.iterations.size()));
}

TEST(RunnerTest, IterationInFlightCompletes) {
  TempDir dir;
  auto text = testing::dungeon_config("slow", dir.path()) + "EXP_DURATION=0.005\n";
  auto out = run_dungeon(text, std::make_shared<SlowPlanner>(demo_backend(), 500ms));
  EXPECT_EQ(out.report.stop_reason, StopReason::kDurationElapsed);
  ASSERT_EQ(out.report.iterations.size(), 1u);
  const auto& it = out.report.iterations[0];
  EXPECT_EQ(it.outcome, Outcome::kSuccess);
  EXPECT_TRUE(it.faults.empty());
  EXPECT_FALSE(it.memory_id.empty());
  EXPECT_GE(it.latency, 500ms);
  EXPECT_EQ(out.report.memories_at_end, 1);
}

TEST(RunnerTest, IterationLimit) {
  TempDir dir;
  auto text = testing::dungeon_config("limit", dir.path()) + "MAX_ITERATIONS=4\n";
  auto out = run_dungeon(text, demo_backend());
  EXPECT_EQ(out.report.stop_reason, StopReason::kIterationLimit);
  ASSERT_EQ(out.report.iterations.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(out.report.iterations[i].index, static_cast<std::int64_t>(i + 1));
    EXPECT_EQ(out.report.iterations[i].mode, "bottom_up");
  }
  // Each iteration asks for status twice and acts once.
  EXPECT_EQ(out.frames, 12);
}

TEST(RunnerTest, ContinuedAndFreshSessions) {
  TempDir dir;
  auto base = testing::dungeon_config("keeper", dir.path()) + "MAX_ITERATIONS=3\n";
  auto first = run_dungeon(base, demo_backend());
  EXPECT_EQ(first.report.memories_at_start, 0);
  EXPECT_EQ(first.report.memories_at_end, 3);

  auto continued = run_dungeon(base + "IS_CONTINUED=true\n", demo_backend());
  EXPECT_EQ(continued.report.memories_at_start, 3);
  EXPECT_EQ(continued.report.memories_at_end, 6);

  auto fresh = run_dungeon(base, demo_backend());
  EXPECT_EQ(fresh.report.memories_at_start, 0);
  EXPECT_EQ(fresh.report.memories_at_end, 3);
  EXPECT_NE(fresh.log.find("fresh session"), std::string::npos);
}

TEST(RunnerTest, TopDownWithObjective) {
  TempDir dir;
  auto text = testing::dungeon_config("planner", dir.path()) +
              "MAX_ITERATIONS=2\nTASK=collect the gem\n";
  auto backend = demo_backend();
  auto out = run_dungeon(text, backend);
  ASSERT_EQ(out.report.iterations.size(), 2u);
  EXPECT_EQ(out.report.iterations[0].mode, "top_down");
  auto log = backend->call_log();
  EXPECT_NE(log[0].prompt.find("Break the objective"), std::string::npos);
  EXPECT_NE(log[0].prompt.find("collect the gem"), std::string::npos);
}

TEST(RunnerTest, FaultFailsOnlyItsIteration) {
  TempDir dir;
  auto text = testing::dungeon_config("faulty", dir.path()) + "MAX_ITERATIONS=5\n";
  auto combined = std::make_shared<ScriptedBackend>();
  combined->add_rule(".", {ScriptedReply::fault_reply(GatewayErrorKind::kProtocol, "bad request")});
  auto demo = ScriptedBackend::from_file(testing::data_dir() / "scripts" / "demo.json");
  struct Chain : LlmBackend {
    std::shared_ptr<ScriptedBackend> first, second;
    CompletionResult complete(const CompletionRequest& r) override {
      if (r.prompt.find("Iteration: 3\n") != std::string::npos &&
          r.prompt.find("Choose the single next action") != std::string::npos) {
        return first->complete(r);
      }
      return second->complete(r);
    }
  };
  auto chain = std::make_shared<Chain>();
  chain->first = combined;
  chain->second = demo;
  auto out = run_dungeon(text, chain);
  EXPECT_EQ(out.report.stop_reason, StopReason::kIterationLimit);
  ASSERT_EQ(out.report.iterations.size(), 5u);
  for (const auto& it : out.report.iterations) {
    if (it.index == 3) {
      EXPECT_EQ(it.outcome, Outcome::kFailure);
      ASSERT_FALSE(it.faults.empty());
      EXPECT_NE(it.faults[0].find("bad request"), std::string::npos);
      EXPECT_TRUE(it.plan.empty());
    } else {
      EXPECT_EQ(it.outcome, Outcome::kSuccess) << it.index;
      EXPECT_TRUE(it.faults.empty());
    }
    EXPECT_FALSE(it.memory_id.empty());
  }
  EXPECT_EQ(combined->call_count(), 1u);
  EXPECT_EQ(out.report.memories_at_end, 5);
}

TEST(RunnerTest, SetupErrorsThrowBeforeListening) {
  TempDir dir;
  auto cfg = parse_config(testing::dungeon_config("setup", dir.path()) +
                          "TRANSLATOR=keyboard\n");
  RunDependencies deps;
  deps.assets.data_dir = testing::data_dir();
  bool listened = false;
  deps.on_listening = [&](int) { listened = true; };
  EXPECT_THROW(run(cfg, deps), ExecutorError);
  EXPECT_FALSE(listened);
}

TEST(RunnerTest, NoEnvironmentIsReported) {
  TempDir dir;
  auto cfg = parse_config(testing::dungeon_config("lonely", dir.path()));
  RunDependencies deps;
  deps.assets.data_dir = testing::data_dir();
  deps.instruction_backend = demo_backend();
  deps.connect_timeout = Seconds(0.2);
  auto report = run(cfg, deps);
  EXPECT_EQ(report.stop_reason, StopReason::kEnvDisconnect);
  EXPECT_TRUE(report.iterations.empty());
}

RunReport sample_report(std::size_t n) {
  RunReport r;
  r.agent_name = "agent \"one\"";
  r.personality = "caution";
  r.game_subject = "DUNGEON";
  r.started = Timestamp(std::chrono::milliseconds(1700000000000));
  r.ended = Timestamp(std::chrono::milliseconds(1700000005000));
  r.stop_reason = StopReason::kDurationElapsed;
  r.message = "line one\nline two";
  r.memories_at_start = 2;
  r.memories_at_end = 2 + static_cast<std::int64_t>(n);
  r.skills_at_end = 4;
  for (std::size_t i = 1; i <= n; ++i) {
    IterationRecord it;
    it.index = static_cast<std::int64_t>(i);
    it.mode = i % 2 ? "bottom_up" : "top_down";
    it.plan = R"({"action":"wait","parameters":{}})";
    it.outcome = i % 3 ? Outcome::kSuccess : Outcome::kPartial;
    it.memory_id = "m" + std::to_string(i);
    it.latency = std::chrono::milliseconds(10 * i);
    it.gateway_calls = 3;
    it.timed_out = i == 4;
    if (i == 2) it.skill = "move_north";
    if (i == 5) it.faults = {"gateway: protocol error"};
    r.iterations.push_back(it);
  }
  return r;
}

TEST(ReportTest, OneLinePerIterationPlusSummary) {
  auto text = report_to_jsonl(sample_report(10));
  int lines = 0;
  for (char c : text) lines += c == '\n';
  EXPECT_EQ(lines, 11);
  EXPECT_NE(text.rfind("duration_elapsed"), std::string::npos);
}

TEST(ReportTest, RoundTrip) {
  for (std::size_t n : {0u, 1u, 10u}) {
    auto r = sample_report(n);
    EXPECT_EQ(report_from_jsonl(report_to_jsonl(r)), r) << n;
  }
  TempDir dir;
  auto r = sample_report(3);
  write_report(r, dir / "report.jsonl");
  EXPECT_EQ(read_report(dir / "report.jsonl"), r);
  EXPECT_THROW(report_from_jsonl("{\"index\": 1}\n"), Error);
}

TEST(ReportTest, SecretsNeverLogged) {
  TempDir dir;
  const std::string secret = "sk-test-very-secret-0123456789";
  auto text = testing::dungeon_config("secretive", dir.path()) + "MAX_ITERATIONS=2\n" +
              "INSTRUCTION_MODEL_API_KEY=" + secret + "\n" + "CODE_MODEL_API_KEY=" + secret +
              "\n";
  auto out = run_dungeon(text, demo_backend());
  ASSERT_EQ(out.report.iterations.size(), 2u);
  write_report(out.report, dir / "report.jsonl");
  auto report_text = testing::read_file(dir / "report.jsonl");
  EXPECT_EQ(report_text.find(secret), std::string::npos);
  EXPECT_EQ(out.log.find(secret), std::string::npos);
  EXPECT_EQ(to_env_text(parse_config(text)).find(secret), std::string::npos);
  // Nothing under the memory root carries it either.
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir.path())) {
    if (entry.is_regular_file()) {
      EXPECT_EQ(testing::read_file(entry.path()).find(secret), std::string::npos)
          << entry.path();
    }
  }
}

TEST(SeedSkillsTest, BasicSkillsOnce) {
  TempDir dir;
  HashEmbedder embedder;
  auto store = MemoryStore::open(dir.path(), "skills", embedder.dimension());
  auto skills = testing::data_dir() / "skills" / "DUNGEON";
  int added = seed_basic_skills(*store, embedder, skills);
  EXPECT_GT(added, 0);
  EXPECT_EQ(seed_basic_skills(*store, embedder, skills), 0);
  EXPECT_EQ(store->skill_count(), static_cast<std::size_t>(added));
  for (const auto& s : store->skills()) EXPECT_EQ(s.origin, SkillOrigin::kBasic);
}

}  // namespace
}  // namespace persona
