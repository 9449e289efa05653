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

#include <chrono>

#include <fmt/format.h>

#include "persona/refenv.h"
#include "util/strings.h"

namespace persona::refenv {

namespace {

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') {
      return false;
    }
  }
  return true;
}

bool is_direction(std::string_view s) {
  return s == "north" || s == "south" || s == "east" || s == "west";
}

}  // namespace

DslProgram parse_program(std::string_view code) {
  DslProgram program;
  std::vector<std::pair<std::string, int>> gotos;
  int line_no = 0;
  for (const auto& raw_line : util::split_lines(code)) {
    ++line_no;
    auto line = raw_line.substr(0, raw_line.find('#'));
    for (const auto& piece : util::split(line, ';')) {
      auto tokens = util::split_whitespace(piece);
      if (tokens.empty()) continue;
      auto fail = [&](const std::string& why) {
        throw ScenarioError(fmt::format("line {}: {}", line_no, why));
      };
      auto arity = [&](std::size_t n) {
        if (tokens.size() != n + 1) {
          fail(fmt::format("{} takes {} argument{}", tokens[0], n, n == 1 ? "" : "s"));
        }
      };
      // A label may prefix a statement: `loop: wait`.
      if (tokens[0].size() > 1 && tokens[0].back() == ':') {
        auto label = tokens[0].substr(0, tokens[0].size() - 1);
        if (!is_identifier(label)) fail(fmt::format("invalid label '{}'", label));
        if (!program.labels.emplace(label, program.statements.size()).second) {
          fail(fmt::format("label '{}' defined twice", label));
        }
        program.statements.push_back({Verb::kLabel, label, line_no});
        tokens.erase(tokens.begin());
        if (tokens.empty()) continue;
      }
      const std::string verb = tokens[0];
      if (verb == "move") {
        arity(1);
        program.statements.push_back({Verb::kMove, tokens[1], line_no});
      } else if (verb == "attack") {
        arity(1);
        program.statements.push_back({Verb::kAttack, tokens[1], line_no});
      } else if (verb == "pickup") {
        arity(0);
        program.statements.push_back({Verb::kPickup, {}, line_no});
      } else if (verb == "wait") {
        arity(0);
        program.statements.push_back({Verb::kWait, {}, line_no});
      } else if (verb == "call") {
        arity(1);
        if (!is_identifier(tokens[1])) fail(fmt::format("invalid helper name '{}'", tokens[1]));
        program.statements.push_back({Verb::kCall, tokens[1], line_no});
      } else if (verb == "goto") {
        arity(1);
        gotos.emplace_back(tokens[1], line_no);
        program.statements.push_back({Verb::kGoto, tokens[1], line_no});
      } else {
        fail(fmt::format("unknown verb '{}'", verb));
      }
    }
  }
  for (const auto& [label, line] : gotos) {
    if (!program.labels.contains(label)) {
      throw ScenarioError(fmt::format("line {}: goto to undefined label '{}'", line, label));
    }
  }
  return program;
}

namespace {

class Interpreter {
 public:
  Interpreter(DungeonWorld& world, const std::vector<HelperProgram>& programs, Seconds timeout)
      : world_(world),
        programs_(programs),
        timeout_(timeout),
        deadline_(std::chrono::steady_clock::now() +
                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout)) {}

  // False once the script must stop.
  bool exec(const DslProgram& program, int depth, const std::string& where) {
    std::size_t pc = 0;
    while (pc < program.statements.size()) {
      const auto& st = program.statements[pc];
      if (st.verb == Verb::kLabel) {
        ++pc;
        continue;
      }
      if (std::chrono::steady_clock::now() >= deadline_) {
        return halt_timeout(fmt::format("timeout: script exceeded {:.1f}s", timeout_.count()));
      }
      switch (st.verb) {
        case Verb::kGoto:
          pc = program.labels.at(st.arg);
          continue;
        case Verb::kCall:
          if (!call(st, depth, where)) return false;
          break;
        default:
          if (!act(st, where)) return false;
          break;
      }
      ++pc;
    }
    return true;
  }

  std::vector<std::string> logs;
  std::vector<std::string> errors;
  bool timed_out = false;

  void finish_logs() {
    if (dropped_logs_ > 0) logs.push_back(fmt::format("({} more log lines dropped)", dropped_logs_));
  }

 private:
  // A tight loop runs until the deadline; only the first lines are kept.
  void log(std::string line) {
    if (logs.size() < kMaxScriptLogs) {
      logs.push_back(std::move(line));
    } else {
      ++dropped_logs_;
    }
  }

  bool halt_timeout(std::string why) {
    timed_out = true;
    errors.push_back(std::move(why));
    return false;
  }

  bool act(const Statement& st, const std::string& where) {
    std::string action;
    nlohmann::json params = nlohmann::json::object();
    switch (st.verb) {
      case Verb::kMove:
        action = "move";
        params["dir"] = st.arg;
        break;
      case Verb::kAttack:
        action = "attack";
        params[is_direction(st.arg) ? "dir" : "target"] = st.arg;
        break;
      case Verb::kPickup:
        action = "pickup";
        break;
      default:
        action = "wait";
        break;
    }
    auto r = world_.apply(action, params);
    for (auto& l : r.logs) log(std::move(l));
    if (r.errors.empty()) return true;
    for (const auto& e : r.errors) {
      errors.push_back(fmt::format("{}line {}: {}", where, st.line, e));
    }
    return false;
  }

  bool call(const Statement& st, int depth, const std::string& where) {
    if (depth >= kMaxCallDepth) {
      errors.push_back(fmt::format("{}line {}: call depth limit of {} reached", where, st.line,
                                   kMaxCallDepth));
      return false;
    }
    const HelperProgram* helper = nullptr;
    for (const auto& p : programs_) {
      if (p.name == st.arg) helper = &p;
    }
    if (!helper) {
      errors.push_back(fmt::format("{}line {}: unknown helper '{}'", where, st.line, st.arg));
      return false;
    }
    DslProgram body;
    try {
      body = parse_program(helper->body);
    } catch (const ScenarioError& e) {
      errors.push_back(fmt::format("helper {}: {}", st.arg, e.what()));
      return false;
    }
    log("call " + st.arg);
    if (!exec(body, depth + 1, fmt::format("{}{}: ", where, st.arg))) return false;
    log("return " + st.arg);
    return true;
  }

  DungeonWorld& world_;
  const std::vector<HelperProgram>& programs_;
  Seconds timeout_;
  std::chrono::steady_clock::time_point deadline_;
  std::size_t dropped_logs_ = 0;
};

}  // namespace

DslExecutor::DslExecutor(std::shared_ptr<DungeonWorld> world) : world_(std::move(world)) {}

CodeRunResult DslExecutor::run(const std::string& code, const std::vector<HelperProgram>& programs,
                               Seconds timeout) {
  CodeRunResult result;
  DslProgram program;
  try {
    program = parse_program(code);
  } catch (const ScenarioError& e) {
    result.metadata.errors.push_back(fmt::format("parse error: {}", e.what()));
    result.observation = world_->serialized();
    return result;
  }
  Interpreter interp(*world_, programs, timeout);
  interp.exec(program, 0, "");
  interp.finish_logs();
  result.metadata.logs = std::move(interp.logs);
  result.metadata.errors = std::move(interp.errors);
  result.metadata.timed_out = interp.timed_out;
  result.observation = world_->serialized();
  return result;
}

}  // namespace persona::refenv
