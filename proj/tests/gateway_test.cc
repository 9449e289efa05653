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

// Same macro as the library so both sides see one definition of httplib.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "persona/gateway.h"

#include <gtest/gtest.h>

#include <thread>

#include "json.hpp"
#include "test_support.h"

namespace persona {
namespace {

using testing::TempDir;
using testing::write_file;

CompletionRequest request(std::string prompt, ModelRole role = ModelRole::kInstruction) {
  CompletionRequest r;
  r.role = role;
  r.prompt = std::move(prompt);
  return r;
}

RetryPolicy no_sleep(int attempts, std::vector<double>* delays = nullptr) {
  RetryPolicy p;
  p.max_attempts = attempts;
  p.sleep = [delays](Seconds s) {
    if (delays) delays->push_back(s.count());
  };
  return p;
}

TEST(ScriptedBackendTest, FirstMatchingRuleWins) {
  ScriptedBackend b("fallback");
  b.add_rule("plan", R"({"action":"move"})");
  b.add_rule("plan|anything", "second");
  EXPECT_EQ(complete(b, request("please plan now")).text, R"({"action":"move"})");
  EXPECT_EQ(complete(b, request("unmatched")).text, "fallback");
}

TEST(ScriptedBackendTest, CallLogGrowsByOnePerRequest) {
  ScriptedBackend b("x");
  b.add_rule("boom", {ScriptedReply::fault_reply(GatewayErrorKind::kTransport)});
  for (int i = 1; i <= 5; ++i) {
    try {
      complete(b, request(i % 2 ? "boom" : "fine"));
    } catch (const GatewayError&) {
    }
    EXPECT_EQ(b.call_count(), static_cast<std::size_t>(i));
  }
  EXPECT_EQ(b.call_log()[1].prompt, "fine");
}

TEST(ScriptedBackendTest, RepliesAdvanceThenRepeatOrCycle) {
  ScriptedBackend b;
  b.add_rule("a", {ScriptedReply::text_reply("1"), ScriptedReply::text_reply("2")});
  b.add_rule("c", {ScriptedReply::text_reply("x"), ScriptedReply::text_reply("y")}, true);
  EXPECT_EQ(complete(b, request("a")).text, "1");
  EXPECT_EQ(complete(b, request("a")).text, "2");
  EXPECT_EQ(complete(b, request("a")).text, "2");
  EXPECT_EQ(complete(b, request("c")).text, "x");
  EXPECT_EQ(complete(b, request("c")).text, "y");
  EXPECT_EQ(complete(b, request("c")).text, "x");
}

TEST(ScriptedBackendTest, LoadsRulesFile) {
  TempDir dir;
  write_file(dir / "rules.json", R"({
    "default": "dflt",
    "rules": [
      {"match": "code", "role": "code", "response": "coded"},
      {"match": "^Hello", "responses": ["one", {"fault": "timeout"}, "three"]}
    ]})");
  auto b = ScriptedBackend::from_file(dir / "rules.json");
  EXPECT_EQ(complete(*b, request("code", ModelRole::kCode)).text, "coded");
  EXPECT_EQ(complete(*b, request("code")).text, "dflt");
  EXPECT_EQ(complete(*b, request("Hello")).text, "one");
  try {
    complete(*b, request("Hello"));
    FAIL() << "expected a timeout fault";
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::kTimeout);
  }
  EXPECT_EQ(complete(*b, request("Hello")).text, "three");
}

TEST(GatewayTest, ValidateRequestGuards) {
  EXPECT_THROW(validate_request(request("")), std::invalid_argument);
  auto r = request("p");
  r.max_tokens = 0;
  EXPECT_THROW(validate_request(r), std::invalid_argument);
  r = request("p");
  r.temperature = -0.1;
  EXPECT_THROW(validate_request(r), std::invalid_argument);
}

TEST(GatewayTest, RetrySucceedsOnThirdAttempt) {
  ScriptedBackend b;
  b.add_rule(".", {ScriptedReply::fault_reply(GatewayErrorKind::kTransport),
                   ScriptedReply::fault_reply(GatewayErrorKind::kTimeout),
                   ScriptedReply::text_reply("ok")});
  std::vector<double> delays;
  auto result = complete_with_retry(b, request("p"), no_sleep(3, &delays));
  EXPECT_EQ(result.text, "ok");
  EXPECT_EQ(b.call_count(), 3u);
  EXPECT_EQ(delays, (std::vector<double>{1.0, 2.0}));
}

TEST(GatewayTest, ProtocolErrorIsNotRetried) {
  ScriptedBackend b;
  b.add_rule(".", {ScriptedReply::fault_reply(GatewayErrorKind::kProtocol, "bad body"),
                   ScriptedReply::text_reply("ok")});
  EXPECT_THROW(complete_with_retry(b, request("p"), no_sleep(3)), GatewayError);
  EXPECT_EQ(b.call_count(), 1u);
}

TEST(GatewayTest, ExhaustedRetriesNameAttemptCount) {
  ScriptedBackend b;
  b.add_rule(".", {ScriptedReply::fault_reply(GatewayErrorKind::kTransport, "down")});
  try {
    complete_with_retry(b, request("p"), no_sleep(4));
    FAIL() << "expected GatewayError";
  } catch (const GatewayError& e) {
    EXPECT_NE(std::string(e.what()).find("4 attempts"), std::string::npos) << e.what();
  }
  EXPECT_EQ(b.call_count(), 4u);
}

TEST(GatewayTest, SingleAttemptHealthyBackend) {
  ScriptedBackend b("fine");
  EXPECT_EQ(complete_with_retry(b, request("p"), no_sleep(1)).text, "fine");
  EXPECT_EQ(b.call_count(), 1u);
}

TEST(GatewayTest, RoutesByRoleAndCountsCalls) {
  auto instr = std::make_shared<ScriptedBackend>("from instruction");
  auto code = std::make_shared<ScriptedBackend>("from code");
  LlmGateway gw(instr, code);
  EXPECT_EQ(gw.complete(ModelRole::kInstruction, "a").text, "from instruction");
  EXPECT_EQ(gw.complete(ModelRole::kCode, "b").text, "from code");
  EXPECT_EQ(gw.calls(), 2u);
  EXPECT_EQ(gw.calls(ModelRole::kCode), 1u);
  EXPECT_EQ(code->call_log()[0].role, ModelRole::kCode);
  EXPECT_LT(code->call_log()[0].temperature, instr->call_log()[0].temperature);
}

TEST(GatewayTest, CodeRoleNeedsCodeModel) {
  LlmGateway gw(std::make_shared<ScriptedBackend>("x"), nullptr);
  EXPECT_FALSE(gw.has_code_model());
  EXPECT_THROW(gw.complete(ModelRole::kCode, "write code"), Error);
}

TEST(GatewayTest, LatencyIsNonNegative) {
  ScriptedBackend b("x");
  EXPECT_GE(complete(b, request("p")).latency.count(), 0);
}

TEST(HttpBackendTest, UnreachableEndpointIsTransportError) {
  ModelEndpoint ep{"openai/gpt-4o", "http://127.0.0.1:" + std::to_string(testing::free_port()),
                   std::nullopt};
  HttpBackend b(ep, Seconds(2.0));
  auto start = std::chrono::steady_clock::now();
  try {
    complete(b, request("hello"));
    FAIL() << "expected GatewayError";
  } catch (const GatewayError& e) {
    EXPECT_TRUE(e.retryable());
  }
  EXPECT_LT(std::chrono::steady_clock::now() - start, std::chrono::seconds(3));
}

class FakeModelServer {
 public:
  FakeModelServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      last_body = req.body;
      last_auth = req.get_header_value("Authorization");
      if (status != 200) {
        res.status = status;
        return;
      }
      nlohmann::json reply = {
          {"choices", {{{"message", {{"role", "assistant"}, {"content", "pong"}}}}}},
          {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 1}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeModelServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  int status = 200;
  std::string last_body;
  std::string last_auth;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

TEST(HttpBackendTest, SpeaksChatCompletions) {
  FakeModelServer server;
  HttpBackend b({"ollama_chat/qwen2.5-coder", server.url(), "sk-test"}, Seconds(5.0));
  auto r = complete(b, request("ping"));
  EXPECT_EQ(r.text, "pong");
  EXPECT_EQ(r.usage.prompt_tokens, 7);
  auto body = nlohmann::json::parse(server.last_body);
  EXPECT_EQ(body["model"], "qwen2.5-coder");
  EXPECT_EQ(body["messages"][0]["content"], "ping");
  EXPECT_EQ(server.last_auth, "Bearer sk-test");
}

TEST(HttpBackendTest, StatusCodesMapToErrorKinds) {
  FakeModelServer server;
  HttpBackend b({"m", server.url() + "/v1", std::nullopt}, Seconds(5.0));
  server.status = 503;
  try {
    complete(b, request("p"));
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::kTransport);
  }
  server.status = 400;
  try {
    complete(b, request("p"));
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_EQ(e.kind(), GatewayErrorKind::kProtocol);
  }
}

}  // namespace
}  // namespace persona
