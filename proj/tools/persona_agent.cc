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

// persona-agent: run a personality-driven test agent, or serve the
// reference dungeon to one.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <thread>

#include "CLI11.hpp"
#include "persona/config.h"
#include "persona/refenv.h"
#include "persona/runner.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitStopped = 1;
constexpr int kExitSetup = 2;

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("PERSONA_DATA_DIR"); env && *env) return env;
  return PERSONA_DATA_DIR;
}

persona::ConfigOverrides parse_overrides(const std::vector<std::string>& items) {
  persona::ConfigOverrides out;
  for (const auto& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw persona::ConfigError("override '" + item + "' is not KEY=VALUE");
    }
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

persona::RunConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  auto merged = persona::environment_overrides(persona::config_file_keys(path));
  for (auto& [k, v] : parse_overrides(overrides)) merged[k] = v;
  return persona::load_config(path, merged);
}

// A path, or the name of a bundled scenario under <data>/scenarios.
persona::refenv::DungeonState load_scenario_arg(const std::string& arg,
                                                const std::filesystem::path& data_dir) {
  std::error_code ec;
  if (!std::filesystem::exists(arg, ec)) {
    auto bundled = data_dir / "scenarios" / (arg + ".txt");
    if (std::filesystem::exists(bundled, ec)) return persona::refenv::load_scenario(bundled);
  }
  return persona::refenv::load_scenario(arg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personality-driven game testing agent"};
  app.require_subcommand(1);

  std::string config_path, report_path, scenario_path;
  std::vector<std::string> overrides;
  std::string templates_dir, skills_dir, personalities_dir;
  std::string data_dir = default_data_dir().string();
  bool quiet = false;

  auto* run_cmd = app.add_subcommand("run", "Run an agent session");
  run_cmd->add_option("--config", config_path, "KEY=VALUE config file")->required();
  run_cmd->add_option("--override", overrides, "Override a config key, KEY=VALUE");
  run_cmd->add_option("--report", report_path, "Write the run report (JSON lines) here");
  run_cmd->add_option("--templates", templates_dir, "Prompt template root");
  run_cmd->add_option("--skills", skills_dir, "Basic skills directory");
  run_cmd->add_option("--personalities", personalities_dir, "Custom personality profiles");
  run_cmd->add_option("--data", data_dir, "Game asset directory");
  run_cmd->add_option("--embedded-env", scenario_path,
                      "Serve this dungeon scenario (file or bundled name) in-process and "
                      "enable its script executor");
  run_cmd->add_flag("--quiet", quiet, "Only print the final summary");

  auto* show_cmd = app.add_subcommand("config", "Print the effective config, secrets redacted");
  show_cmd->add_option("--config", config_path, "KEY=VALUE config file")->required();
  show_cmd->add_option("--override", overrides, "Override a config key, KEY=VALUE");

  std::string env_host = "localhost";
  int env_port = 1111;
  double env_retry = 30.0;
  auto* env_cmd = app.add_subcommand("env", "Serve a dungeon scenario to a running agent");
  env_cmd->add_option("--scenario", scenario_path, "Scenario file or bundled name")->required();
  env_cmd->add_option("--data", data_dir, "Game asset directory");
  env_cmd->add_option("--host", env_host, "Agent bridge host");
  env_cmd->add_option("--port", env_port, "Agent bridge port");
  env_cmd->add_option("--retry", env_retry, "Seconds to keep retrying the connection");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*show_cmd) {
      std::cout << persona::to_env_text(load(config_path, overrides));
      return kExitOk;
    }

    if (*env_cmd) {
      auto world = std::make_shared<persona::refenv::DungeonWorld>(
          load_scenario_arg(scenario_path, data_dir));
      persona::refenv::ReferenceEnvironment env(world, &std::cerr);
      env.run(env_host, env_port, persona::Seconds(env_retry));
      return kExitOk;
    }

    auto cfg = load(config_path, overrides);
    persona::RunDependencies deps;
    deps.assets.data_dir = data_dir;
    if (!templates_dir.empty()) deps.assets.templates = templates_dir;
    if (!skills_dir.empty()) deps.assets.skills = skills_dir;
    if (!personalities_dir.empty()) deps.assets.custom_personalities = personalities_dir;
    if (!quiet) deps.log = &std::cerr;

    std::thread env_thread;
    std::shared_ptr<persona::refenv::ReferenceEnvironment> env;
    if (!scenario_path.empty()) {
      auto world = std::make_shared<persona::refenv::DungeonWorld>(
          load_scenario_arg(scenario_path, data_dir));
      deps.code_executors["dungeon"] = std::make_shared<persona::refenv::DslExecutor>(world);
      env = std::make_shared<persona::refenv::ReferenceEnvironment>(world,
                                                                    quiet ? nullptr : &std::cerr);
      deps.on_listening = [&, host = cfg.bridge_host](int port) {
        env_thread = std::thread([env, host, port] {
          try {
            env->run(host, port);
          } catch (const std::exception& e) {
            std::cerr << "[env] " << e.what() << std::endl;
          }
        });
      };
    }

    auto report = persona::run(cfg, std::move(deps));
    if (env_thread.joinable()) env_thread.join();
    if (!report_path.empty()) persona::write_report(report, report_path);
    std::cout << "stop_reason=" << persona::to_string(report.stop_reason)
              << " iterations=" << report.iterations.size()
              << " memories=" << report.memories_at_end << " skills=" << report.skills_at_end
              << std::endl;
    bool ok = report.stop_reason == persona::StopReason::kDurationElapsed ||
              report.stop_reason == persona::StopReason::kIterationLimit;
    return ok ? kExitOk : kExitStopped;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitSetup;
  }
}
