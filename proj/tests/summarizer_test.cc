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

#include "persona/summarizer.h"

#include <gtest/gtest.h>

#include "persona/personality.h"
#include "test_support.h"

namespace persona {
namespace {

const std::string kSummaryMarker = "Summarize what happened";
const std::string kPreferenceMarker = "reflect the";

class SummarizerTest : public ::testing::Test {
 protected:
  SummarizerTest()
      : templates_(testing::dungeon_templates()),
        backend_(std::make_shared<ScriptedBackend>("")),
        gateway_(backend_, nullptr),
        summarizer_(templates_) {
    plan_.action = "move";
    plan_.parameters = {{"dir", "north"}};
  }

  PersonalityProfile profile(const std::string& name) const {
    return PersonalityLibrary(testing::data_dir() / "personalities").load_profile(name);
  }

  TemplateSet templates_;
  std::shared_ptr<ScriptedBackend> backend_;
  LlmGateway gateway_;
  Summarizer summarizer_;
  ActionPlan plan_;
};

TEST_F(SummarizerTest, ScriptedSuccess) {
  backend_->add_rule(kSummaryMarker,
                     R"({"outcome":"success","description":"Moved north.","context":"y-1"})");
  ExecutionFeedback fb{{"moved north"}, {}, false, "after"};
  auto s = summarizer_.summarize_execution(plan_, fb, "before", "after", gateway_);
  EXPECT_EQ(s.outcome, Outcome::kSuccess);
  EXPECT_EQ(s.description, "Moved north.");
  EXPECT_EQ(s.plan_summary, describe_plan(plan_));
  auto prompt = backend_->call_log()[0].prompt;
  EXPECT_NE(prompt.find("moved north"), std::string::npos);
  EXPECT_NE(prompt.find("before"), std::string::npos);
}

TEST_F(SummarizerTest, TimeoutForcesFailure) {
  backend_->add_rule(kSummaryMarker, R"({"outcome":"success","description":"It went fine."})");
  ExecutionFeedback fb{{}, {"timeout: script exceeded 1s"}, true, std::nullopt};
  auto s = summarizer_.summarize_execution(plan_, fb, "b", "a", gateway_);
  EXPECT_EQ(s.outcome, Outcome::kFailure);
  EXPECT_NE(s.description.find("timeout"), std::string::npos);
}

TEST_F(SummarizerTest, ErrorsDowngradeClaimedSuccess) {
  backend_->add_rule(kSummaryMarker, R"({"outcome":"success","description":"Half done."})");
  ExecutionFeedback fb{{}, {"blocked"}, false, std::nullopt};
  EXPECT_EQ(summarizer_.summarize_execution(plan_, fb, "b", "a", gateway_).outcome,
            Outcome::kPartial);
}

TEST_F(SummarizerTest, MalformedThreeTimesFallsBack) {
  backend_->add_rule(kSummaryMarker, "I cannot summarize that.");
  ExecutionFeedback fb{{}, {"blocked\nat (1,0)", "second"}, false, std::nullopt};
  try {
    summarizer_.summarize_execution(plan_, fb, "b", "a", gateway_);
    FAIL() << "expected SummarizerError";
  } catch (const SummarizerError& e) {
    EXPECT_EQ(e.fallback().outcome, Outcome::kFailure);
    EXPECT_NE(e.fallback().description.find("blocked"), std::string::npos);
    EXPECT_EQ(e.fallback().description.find("at (1,0)"), std::string::npos);
  }
  EXPECT_EQ(backend_->call_count(), 3u);
}

TEST_F(SummarizerTest, RecoversOnRetry) {
  backend_->add_rule(kSummaryMarker,
                     {ScriptedReply::text_reply(R"({"outcome":"great"})"),
                      ScriptedReply::text_reply(R"({"outcome":"partial","description":"d"})")});
  auto s = summarizer_.summarize_execution(plan_, {}, "b", "a", gateway_);
  EXPECT_EQ(s.outcome, Outcome::kPartial);
  EXPECT_EQ(backend_->call_count(), 2u);
}

TEST_F(SummarizerTest, LogsAreTruncatedToBudget) {
  backend_->add_rule(kSummaryMarker, R"({"outcome":"success","description":"d"})");
  Summarizer small(templates_, SummarizerOptions{2, 64});
  ExecutionFeedback fb;
  fb.logs.assign(200, std::string(40, 'x'));
  small.summarize_execution(plan_, fb, "b", "a", gateway_);
  EXPECT_LT(backend_->call_log()[0].prompt.size(), 2000u);
}

TEST_F(SummarizerTest, PreferenceMentionsTrait) {
  backend_->add_rule(kPreferenceMarker, "Picking the shortest route is pure efficiency.");
  ExecutionSummary s{Outcome::kSuccess, "Moved north.", "y-1", "move north"};
  auto text = summarizer_.preference_summary(s, profile("efficiency"), gateway_);
  EXPECT_NE(text.find("efficiency"), std::string::npos);
}

TEST_F(SummarizerTest, PreferenceEmptyTwiceUsesTemplate) {
  backend_->add_rule(kPreferenceMarker, "   ");
  ExecutionSummary s{Outcome::kFailure, "Hit a wall.", "", "move north"};
  auto text = summarizer_.preference_summary(s, profile("caution"), gateway_);
  EXPECT_EQ(text, "outcome failure under trait caution");
  EXPECT_EQ(backend_->call_count(), 2u);
}

TEST_F(SummarizerTest, PreferenceDiffersByTrait) {
  backend_->add_rule("\"caution\"", "Staying back kept the player safe.");
  backend_->add_rule("\"aggression\"", "Charging in shows a taste for combat.");
  ExecutionSummary s{Outcome::kSuccess, "Moved.", "", "move north"};
  auto a = summarizer_.preference_summary(s, profile("caution"), gateway_);
  auto b = summarizer_.preference_summary(s, profile("aggression"), gateway_);
  EXPECT_NE(a, b);
  EXPECT_FALSE(a.empty());
}

TEST(FallbackSummaryTest, DescribesWithoutErrors) {
  ActionPlan plan;
  plan.action = "wait";
  auto s = fallback_summary(plan, {});
  EXPECT_EQ(s.outcome, Outcome::kFailure);
  EXPECT_FALSE(s.description.empty());
}

}  // namespace
}  // namespace persona
