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

#include <fmt/format.h>

#include "json.hpp"
#include "persona/personality.h"
#include "persona/planner.h"
#include "persona/summarizer.h"
#include "persona/templates.h"
#include "util/strings.h"

namespace persona {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kDurationElapsed: return "duration_elapsed";
    case StopReason::kIterationLimit: return "iteration_limit";
    case StopReason::kEnvDisconnect: return "env_disconnect";
    case StopReason::kFatalError: return "fatal_error";
  }
  return "unknown";
}

std::optional<StopReason> parse_stop_reason(std::string_view text) {
  for (auto r : {StopReason::kDurationElapsed, StopReason::kIterationLimit,
                 StopReason::kEnvDisconnect, StopReason::kFatalError}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

bool stop_check(std::chrono::steady_clock::time_point started,
                std::chrono::milliseconds exp_duration,
                std::chrono::steady_clock::time_point now) {
  return now - started >= exp_duration;
}

std::string report_to_jsonl(const RunReport& report) {
  std::string out;
  for (const auto& it : report.iterations) {
    ordered_json j;
    j["type"] = "iteration";
    j["index"] = it.index;
    j["mode"] = it.mode;
    j["plan"] = it.plan;
    j["outcome"] = to_string(it.outcome);
    j["memory_id"] = it.memory_id;
    j["latency_ms"] = it.latency.count();
    j["gateway_calls"] = it.gateway_calls;
    j["timed_out"] = it.timed_out;
    j["skill"] = it.skill ? json(*it.skill) : json(nullptr);
    j["faults"] = it.faults;
    out += j.dump() + "\n";
  }
  ordered_json f;
  f["type"] = "summary";
  f["agent_name"] = report.agent_name;
  f["personality"] = report.personality;
  f["game_subject"] = report.game_subject;
  f["started_ms"] = report.started.time_since_epoch().count();
  f["ended_ms"] = report.ended.time_since_epoch().count();
  f["stop_reason"] = to_string(report.stop_reason);
  f["message"] = report.message;
  f["iterations"] = report.iterations.size();
  f["memories_at_start"] = report.memories_at_start;
  f["memories_at_end"] = report.memories_at_end;
  f["skills_at_end"] = report.skills_at_end;
  out += f.dump() + "\n";
  return out;
}

RunReport report_from_jsonl(std::string_view text) {
  RunReport report;
  bool footer = false;
  int line_no = 0;
  for (const auto& line : util::split_lines(text)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    auto fail = [&](const std::string& why) {
      throw Error(fmt::format("report line {}: {}", line_no, why));
    };
    if (footer) fail("content after the summary line");
    json j;
    try {
      j = json::parse(line);
      if (j.at("type") == "iteration") {
        IterationRecord it;
        it.index = j.at("index").get<std::int64_t>();
        it.mode = j.at("mode").get<std::string>();
        it.plan = j.at("plan").get<std::string>();
        auto outcome = parse_outcome(j.at("outcome").get<std::string>());
        if (!outcome) fail("bad outcome");
        it.outcome = *outcome;
        it.memory_id = j.at("memory_id").get<std::string>();
        it.latency = std::chrono::milliseconds(j.at("latency_ms").get<std::int64_t>());
        it.gateway_calls = j.at("gateway_calls").get<std::int64_t>();
        it.timed_out = j.at("timed_out").get<bool>();
        if (!j.at("skill").is_null()) it.skill = j.at("skill").get<std::string>();
        it.faults = j.at("faults").get<std::vector<std::string>>();
        report.iterations.push_back(std::move(it));
      } else if (j.at("type") == "summary") {
        footer = true;
        report.agent_name = j.at("agent_name").get<std::string>();
        report.personality = j.at("personality").get<std::string>();
        report.game_subject = j.at("game_subject").get<std::string>();
        report.started = Timestamp(std::chrono::milliseconds(j.at("started_ms").get<std::int64_t>()));
        report.ended = Timestamp(std::chrono::milliseconds(j.at("ended_ms").get<std::int64_t>()));
        auto reason = parse_stop_reason(j.at("stop_reason").get<std::string>());
        if (!reason) fail("bad stop_reason");
        report.stop_reason = *reason;
        report.message = j.at("message").get<std::string>();
        report.memories_at_start = j.at("memories_at_start").get<std::int64_t>();
        report.memories_at_end = j.at("memories_at_end").get<std::int64_t>();
        report.skills_at_end = j.at("skills_at_end").get<std::int64_t>();
        if (j.at("iterations").get<std::size_t>() != report.iterations.size()) {
          fail("summary iteration count disagrees with the iteration lines");
        }
      } else {
        fail("unknown record type");
      }
    } catch (const json::exception& e) {
      fail(e.what());
    }
  }
  if (!footer) throw Error("report has no summary line");
  return report;
}

void write_report(const RunReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  util::write_file_atomic(path, report_to_jsonl(report));
}

RunReport read_report(const std::filesystem::path& path) {
  return report_from_jsonl(util::read_file(path));
}

std::filesystem::path AssetPaths::personalities_dir() const { return data_dir / "personalities"; }
std::filesystem::path AssetPaths::entities_file() const { return data_dir / "entities.tsv"; }
std::filesystem::path AssetPaths::game_dir(const std::string& game) const {
  return data_dir / "games" / game;
}
std::filesystem::path AssetPaths::templates_root() const {
  return templates.value_or(data_dir / "templates");
}
std::filesystem::path AssetPaths::skills_dir(const std::string& game) const {
  return skills.value_or(data_dir / "skills" / game);
}

int seed_basic_skills(MemoryStore& store, const Embedder& embedder,
                      const std::filesystem::path& dir) {
  auto manifest = dir / "manifest.tsv";
  std::error_code ec;
  if (!std::filesystem::is_regular_file(manifest, ec)) return 0;
  int added = 0;
  int line_no = 0;
  for (const auto& raw : util::split_lines(util::read_file(manifest))) {
    ++line_no;
    auto line = util::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto fields = util::split(line, '\t');
    if (fields.size() < 2) {
      throw MemoryError(fmt::format("{}:{}: expected name<TAB>description", manifest.string(),
                                    line_no));
    }
    SkillRecord skill;
    skill.name = util::trim(fields[0]);
    if (store.skill(skill.name)) continue;
    skill.description = util::trim(fields[1]);
    skill.body = util::read_file(dir / (skill.name + ".dsl"));
    skill.origin = SkillOrigin::kBasic;
    if (fields.size() > 2) {
      for (const auto& d : util::split(fields[2], ',')) {
        if (auto dep = util::trim(d); !dep.empty()) skill.dependencies.push_back(dep);
      }
    }
    skill.description_embedding = embed(skill.description, embedder);
    store.store_skill(skill);
    ++added;
  }
  return added;
}

namespace {

// Everything the loop needs, resolved before the environment connects.
struct Session {
  PersonalityProfile profile;  // prompt_text already has entities mapped
  TemplateSet templates;
  ActionSchema schema;
  std::string game_spec;
  std::shared_ptr<CodeExecutor> executor;
  Translator translator;
};

Session prepare(const RunConfig& cfg, const RunDependencies& deps) {
  const auto& a = deps.assets;
  Session s;
  PersonalityLibrary library(a.personalities_dir(), a.custom_personalities);
  validate_config(cfg, library.available());

  auto registry = EntityRegistry::load(a.entities_file());
  auto game = a.game_dir(cfg.game_subject);
  auto mapping = EntityMapping::load(game / "entity_mapping.tsv", cfg.game_subject, registry);
  s.profile = library.load_profile(cfg.personality);
  s.profile.prompt_text = map_entities(s.profile, mapping);

  s.templates = TemplateSet::load(a.templates_root(), cfg.game_subject);
  std::vector<PromptRole> needed = {PromptRole::kPlan, PromptRole::kRevise,
                                    PromptRole::kActionSummary,
                                    PromptRole::kPreferenceSummary};
  if (cfg.objective()) needed.push_back(PromptRole::kDecompose);
  if (cfg.is_plan_to_code) {
    needed.insert(needed.end(), {PromptRole::kCodeGeneration, PromptRole::kCodeRefinement,
                                 PromptRole::kSkillDescription});
  }
  for (auto role : needed) s.templates.get(role);

  if (!cfg.is_plan_to_code) s.schema = ActionSchema::load(game / "capabilities.tsv");
  std::error_code ec;
  if (std::filesystem::is_regular_file(game / "game_spec.txt", ec)) {
    s.game_spec = util::read_file(game / "game_spec.txt");
  }

  if (!deps.translators.contains(cfg.translator)) {
    deps.translators.resolve(cfg.translator);  // throws with the registered names
  }
  if (cfg.is_plan_to_code) {
    auto it = deps.code_executors.find(cfg.code_executor);
    if (it == deps.code_executors.end() || !it->second) {
      std::vector<std::string> names;
      for (const auto& [n, e] : deps.code_executors) names.push_back(n);
      throw ConfigError(fmt::format("no code executor named '{}'; available: {}",
                                    cfg.code_executor,
                                    names.empty() ? "(none)" : fmt::format("{}", fmt::join(names, ", "))));
    }
    s.executor = it->second;
  } else if (cfg.translator == kPlanToParameters) {
    std::optional<PayloadMapping> mapping;
    if (std::filesystem::is_regular_file(game / "payload_mapping.tsv", ec)) {
      mapping = PayloadMapping::load(game / "payload_mapping.tsv");
    }
    s.translator = [mapping](const ActionPlan& plan) {
      return translate_to_parameters(plan, mapping ? &*mapping : nullptr);
    };
  } else {
    s.translator = deps.translators.resolve(cfg.translator);
  }
  return s;
}

std::vector<RetrievedMemory> resolve_hits(const MemoryStore& store,
                                          const std::vector<RetrievalHit>& hits) {
  std::vector<RetrievedMemory> out;
  for (const auto& h : hits) {
    if (auto rec = store.memory(h.id)) out.push_back({std::move(*rec), h.score});
  }
  return out;
}

class Loop {
 public:
  Loop(const RunConfig& cfg, Session& session, MemoryStore& store,
       const Embedder& embedder, LlmGateway& gateway, BridgeServer& bridge)
      : cfg_(cfg),
        s_(session),
        store_(store),
        embedder_(embedder),
        gateway_(gateway),
        bridge_(bridge),
        planner_(session.templates, session.schema, planner_options(cfg)),
        summarizer_(session.templates, SummarizerOptions::from(cfg.tuning)) {}

  // Runs one iteration and stores its memory. Bridge disconnects and store
  // failures propagate; everything else fails only this iteration.
  IterationRecord iterate(std::int64_t index) {
    IterationRecord rec;
    rec.index = index;
    auto t0 = std::chrono::steady_clock::now();
    auto calls0 = static_cast<std::int64_t>(gateway_.calls());

    std::string state_before;
    try {
      state_before = bridge_.get_status();
    } catch (const BridgeError& e) {
      if (e.kind() == BridgeErrorKind::kConnection) throw;
      rec.faults.push_back(e.what());
      state_before = "(state unavailable)";
    }

    std::optional<ActionPlan> plan;
    ExecutionSummary summary;
    ExecutionFeedback fb;
    std::string state_after = state_before;
    if (rec.faults.empty()) {
      try {
        plan = make_plan(index, state_before, rec);
        fb = execute(*plan, rec);
        state_after = fb.post_state.value_or(state_before);
        rec.timed_out = fb.timed_out;
        try {
          summary = summarizer_.summarize_execution(*plan, fb, state_before, state_after, gateway_);
        } catch (const SummarizerError& e) {
          rec.faults.push_back(e.what());
          summary = e.fallback();
        }
      } catch (const BridgeError& e) {
        if (e.kind() == BridgeErrorKind::kConnection) throw;
        rec.faults.push_back(e.what());
      } catch (const HungExecutorError&) {
        throw;
      } catch (const Error& e) {
        rec.faults.push_back(e.what());
      }
    }
    if (plan) rec.plan = to_json_text(*plan);
    if (summary.description.empty()) {
      // Planning or execution failed before a summary existed.
      summary.outcome = Outcome::kFailure;
      summary.description = "iteration failed: " + rec.faults.front();
      summary.plan_summary = plan ? describe_plan(*plan) : "(no plan)";
      summary.context = fmt::format("{} fault(s)", rec.faults.size());
    }
    rec.outcome = summary.outcome;

    std::string preference;
    try {
      preference = summarizer_.preference_summary(summary, s_.profile, gateway_);
    } catch (const Error& e) {
      rec.faults.push_back(e.what());
      preference = fmt::format("outcome {} under trait {}", to_string(summary.outcome),
                               s_.profile.name);
    }

    MemoryRecord mem;
    mem.id = store_.next_memory_id();
    mem.agent_name = cfg_.agent_name;
    mem.iteration = index;
    mem.plan_summary = summary.plan_summary;
    mem.outcome = summary.outcome;
    mem.context = summary.context.empty() ? summary.description
                                          : summary.description + "\n" + summary.context;
    mem.game_state_snapshot = state_before;
    mem.preference_summary = preference;
    mem.state_embedding = embed(state_before, embedder_);
    mem.preference_embedding = embed(preference, embedder_);
    mem.created_at = now_ms();
    rec.memory_id = store_.store_memory(mem);

    if (live(decomposition_)) {
      auto update = update_progress(*decomposition_, summary.outcome, failure_streak_);
      decomposition_ = std::move(update.decomposition);
      failure_streak_ = update.failure_streak;
    } else {
      failure_streak_ = summary.outcome == Outcome::kFailure ? failure_streak_ + 1 : 0;
    }

    rec.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - t0);
    rec.gateway_calls = static_cast<std::int64_t>(gateway_.calls()) - calls0;
    return rec;
  }

 private:
  static PlannerOptions planner_options(const RunConfig& cfg) {
    auto o = PlannerOptions::from(cfg.tuning);
    o.restrict_actions = !cfg.is_plan_to_code;
    return o;
  }

  ActionPlan make_plan(std::int64_t index, const std::string& state, IterationRecord& rec) {
    PlannerContext ctx;
    ctx.iteration = index;
    ctx.current_state = state;
    ctx.objective = cfg_.objective();
    ctx.personality_prompt = s_.profile.prompt_text;
    ctx.preferred_memories = resolve_hits(
        store_, retrieve_preferred(store_, embedder_, s_.profile.prompt_text, cfg_.retrieval_k));
    ctx.related_memories =
        resolve_hits(store_, retrieve_related(store_, embedder_, state, cfg_.retrieval_k));
    if (cfg_.is_plan_to_code) {
      for (const auto& sk : store_.skills()) ctx.capabilities.push_back(sk.name);
    } else {
      ctx.capabilities = s_.schema.action_names();
    }
    ctx.failure_streak = failure_streak_;
    ctx.decomposition = decomposition_;

    planner_.begin_iteration();
    auto mode = planner_.choose_mode(ctx);
    rec.mode = std::string(to_string(mode));
    if (mode == PlanningMode::kTopDown) {
      decomposition_ = planner_.decompose(ctx, gateway_);
      failure_streak_ = 0;
      ctx.decomposition = decomposition_;
      ctx.failure_streak = 0;
      ctx.fresh_decomposition = true;
    }
    auto plan = planner_.plan_next(ctx, gateway_);
    auto report = planner_.validate_plan(plan, ctx);
    if (report.verdict == Verdict::kRevise) {
      plan = planner_.revise_plan(plan, report, ctx, gateway_);
    }
    return plan;
  }

  ExecutionFeedback execute(const ActionPlan& plan, IterationRecord& rec) {
    if (!cfg_.is_plan_to_code) return execute_plan(s_.translator(plan), bridge_);
    auto result = synthesize_skill(plan, store_, embedder_, s_.game_spec, s_.executor,
                                   s_.templates, gateway_, SynthesisOptions::from(cfg_));
    if (result.skill) rec.skill = result.skill->name;
    auto fb = result.feedback;
    if (!result.succeeded()) {
      // Keep the whole refinement history, not just the last run.
      fb.errors = result.error_history;
      if (fb.errors.empty()) fb.errors.push_back("skill synthesis failed");
      if (!fb.post_state) fb.post_state = bridge_.get_status();
    }
    return fb;
  }

  const RunConfig& cfg_;
  Session& s_;
  MemoryStore& store_;
  const Embedder& embedder_;
  LlmGateway& gateway_;
  BridgeServer& bridge_;
  Planner planner_;
  Summarizer summarizer_;
  std::optional<TaskDecomposition> decomposition_;
  int failure_streak_ = 0;
};

}  // namespace

RunReport run(const RunConfig& cfg, RunDependencies deps) {
  auto say = [&](const std::string& line) {
    if (deps.log) *deps.log << "[agent] " << line << std::endl;
  };
  RunReport report;
  report.agent_name = cfg.agent_name;
  report.personality = cfg.personality;
  report.game_subject = cfg.game_subject;
  report.started = now_ms();
  const auto started = std::chrono::steady_clock::now();

  Session session = prepare(cfg, deps);
  std::shared_ptr<Embedder> embedder = deps.embedder;
  if (!embedder) {
    if (cfg.embedding_model) {
      embedder = std::make_shared<HttpEmbedder>(
          *cfg.embedding_model, static_cast<std::size_t>(cfg.tuning.embedding_dim),
          cfg.tuning.llm_timeout);
    } else {
      embedder = std::make_shared<HashEmbedder>(static_cast<std::size_t>(cfg.tuning.embedding_dim));
    }
  }
  if (!cfg.is_continued && delete_collection(cfg.memory_root, cfg.agent_name)) {
    say(fmt::format("fresh session: removed stored data of '{}'", cfg.agent_name));
  }
  auto store = MemoryStore::open(cfg.memory_root, cfg.agent_name, embedder->dimension());
  report.memories_at_start = static_cast<std::int64_t>(store->memory_count());
  if (cfg.is_plan_to_code) {
    seed_basic_skills(*store, *embedder, deps.assets.skills_dir(cfg.game_subject));
  }

  auto instruction = deps.instruction_backend
                         ? deps.instruction_backend
                         : make_backend(cfg.instruction_model, cfg.tuning.llm_timeout);
  std::shared_ptr<LlmBackend> code = deps.code_backend;
  if (!code && cfg.code_model) code = make_backend(*cfg.code_model, cfg.tuning.llm_timeout);
  auto settings = GatewaySettings::from(cfg.tuning);
  if (deps.retry_sleep) settings.retry.sleep = deps.retry_sleep;
  LlmGateway gateway(instruction, code, settings);

  BridgeServer bridge(BridgeTimeouts::from(cfg.tuning));
  if (deps.transcript) bridge.set_transcript(deps.transcript);
  bridge.serve(cfg.bridge_host, cfg.bridge_port);
  say(fmt::format("listening on {}:{} as '{}' ({})", cfg.bridge_host, bridge.port(),
                  cfg.agent_name, cfg.personality));
  if (deps.on_listening) deps.on_listening(bridge.port());

  auto finish = [&](StopReason reason, std::string message) {
    report.stop_reason = reason;
    report.message = std::move(message);
    report.memories_at_end = static_cast<std::int64_t>(store->memory_count());
    report.skills_at_end = static_cast<std::int64_t>(store->skill_count());
    report.ended = std::max(now_ms(), report.started);
    bridge.close();
    say(fmt::format("stopped: {} after {} iteration(s){}", to_string(reason),
                    report.iterations.size(), report.message.empty() ? "" : ": " + report.message));
    return report;
  };

  try {
    bridge.accept_environment(deps.connect_timeout);
    while (bridge.get_command() != "b") {
    }
  } catch (const BridgeError& e) {
    return finish(StopReason::kEnvDisconnect, e.what());
  }
  say("start signal received");

  Loop loop(cfg, session, *store, *embedder, gateway, bridge);
  for (std::int64_t index = 1;; ++index) {
    if (stop_check(started, cfg.exp_duration, std::chrono::steady_clock::now())) {
      return finish(StopReason::kDurationElapsed, {});
    }
    if (cfg.tuning.max_iterations > 0 && index > cfg.tuning.max_iterations) {
      return finish(StopReason::kIterationLimit, {});
    }
    IterationRecord rec;
    try {
      rec = loop.iterate(index);
    } catch (const BridgeError& e) {
      return finish(StopReason::kEnvDisconnect, e.what());
    } catch (const std::exception& e) {
      return finish(StopReason::kFatalError, e.what());
    }
    say(fmt::format("iteration {}: {} -> {}{}", index, rec.plan.empty() ? "(no plan)" : rec.plan,
                    to_string(rec.outcome),
                    rec.faults.empty() ? "" : fmt::format(" [{}]", rec.faults.front())));
    report.iterations.push_back(rec);
    if (deps.on_iteration) deps.on_iteration(rec);
  }
}

}  // namespace persona
