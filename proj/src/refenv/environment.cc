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

#include <fmt/format.h>

#include "persona/bridge.h"
#include "persona/refenv.h"

namespace persona::refenv {

ReferenceEnvironment::ReferenceEnvironment(std::shared_ptr<DungeonWorld> world,
                                           std::ostream* log)
    : world_(std::move(world)), log_(log) {}

int ReferenceEnvironment::run(const std::string& host, int port, Seconds connect_retry) {
  auto channel = EnvChannel::connect(host, port, connect_retry);
  auto say = [&](const std::string& line) {
    if (log_) *log_ << "[env] " << line << std::endl;
  };
  channel.send(BridgeMessage::command("b"));
  say(fmt::format("connected to {}:{}, sent start signal", host, port));

  int answered = 0;
  try {
    while (auto frame = channel.receive()) {
      if (*frame == kGetStatusText) {
        channel.send(BridgeMessage::status(world_->serialized()));
      } else if (frame->rfind(kActionPrefix, 0) == 0) {
        auto payload = frame->substr(kActionPrefix.size());
        if (on_action) on_action(payload);
        auto j = nlohmann::json::parse(payload, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.is_object() || !j.contains("action") ||
            !j["action"].is_string()) {
          channel.send(BridgeMessage::feedback({}, {"malformed action payload: " + payload}));
        } else {
          auto params = j.value("parameters", nlohmann::json::object());
          auto r = world_->apply(j["action"].get<std::string>(), params);
          channel.send(BridgeMessage::feedback(std::move(r.logs), std::move(r.errors)));
        }
      } else {
        say(fmt::format("protocol violation, closing: unexpected frame '{}'", *frame));
        break;
      }
      ++answered;
    }
  } catch (const BridgeError& e) {
    say(fmt::format("connection ended: {}", e.what()));
  }
  channel.close();
  say(fmt::format("session over after {} frame(s)", answered));
  return answered;
}

}  // namespace persona::refenv
