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

#include "persona/executor.h"

#include <algorithm>
#include <cctype>
#include <future>
#include <thread>

#include <fmt/format.h>

#include "json.hpp"
#include "util/extract.h"
#include "util/strings.h"

namespace persona {

using nlohmann::ordered_json;

PayloadMapping PayloadMapping::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = util::read_file(path);
  } catch (const std::exception& e) {
    throw ExecutorError(fmt::format("cannot read payload mapping: {}", e.what()));
  }
  return parse(text, path.string());
}

PayloadMapping PayloadMapping::parse(std::string_view text, std::string_view source) {
  PayloadMapping m;
  int line_no = 0;
  for (const auto& raw : util::split_lines(text)) {
    ++line_no;
    auto line = util::trim(raw);
    if (line.empty() || line[0] == '#') continue;
    auto fields = util::split(line, '\t');
    if (fields.size() != 2 || util::trim(fields[1]).empty()) {
      throw ExecutorError(fmt::format("{}:{}: expected <field><TAB><new name>", source, line_no));
    }
    auto from = util::trim(fields[0]);
    auto to = util::trim(fields[1]);
    if (from == "action") {
      m.action_key_ = to;
    } else if (from == "parameters") {
      m.parameters_key_ = to;
    } else if (from.rfind("parameters.", 0) == 0 && from.size() > 11) {
      m.parameter_keys_[from.substr(11)] = to;
    } else {
      throw ExecutorError(fmt::format("{}:{}: unknown payload field '{}'", source, line_no, from));
    }
  }
  return m;
}

bool PayloadMapping::empty() const {
  return !action_key_ && !parameters_key_ && parameter_keys_.empty();
}

std::string translate_to_parameters(const ActionPlan& plan, const PayloadMapping* mapping) {
  if (plan.action.empty()) throw ExecutorError("cannot serialize a plan without an action");
  if (!plan.parameters.is_object()) throw ExecutorError("plan parameters are not an object");
  ordered_json params = ordered_json::object();
  for (const auto& [key, value] : plan.parameters.items()) {
    std::string name = key;
    if (mapping) {
      if (auto it = mapping->parameter_keys_.find(key); it != mapping->parameter_keys_.end()) {
        name = it->second;
      }
    }
    params[name] = value;
  }
  ordered_json payload;
  payload[mapping && mapping->action_key_ ? *mapping->action_key_ : "action"] = plan.action;
  payload[mapping && mapping->parameters_key_ ? *mapping->parameters_key_ : "parameters"] =
      std::move(params);
  try {
    return payload.dump();
  } catch (const nlohmann::json::exception& e) {
    throw ExecutorError(fmt::format("cannot serialize plan: {}", e.what()));
  }
}

TranslatorRegistry::TranslatorRegistry() {
  translators_.emplace(kPlanToParameters,
                       [](const ActionPlan& plan) { return translate_to_parameters(plan); });
}

void TranslatorRegistry::register_custom_translator(const std::string& name, Translator handler) {
  if (name.empty() || !handler) throw ExecutorError("translator needs a name and a handler");
  if (name == kPlanToCode || translators_.contains(name)) {
    throw ExecutorError(fmt::format("translator '{}' is already registered", name));
  }
  translators_.emplace(name, std::move(handler));
}

bool TranslatorRegistry::contains(const std::string& name) const {
  return name == kPlanToCode || translators_.contains(name);
}

const Translator& TranslatorRegistry::resolve(const std::string& name) const {
  auto it = translators_.find(name);
  if (it == translators_.end()) {
    throw ExecutorError(fmt::format("unknown translator '{}'; registered: {}", name,
                                    fmt::join(names(), ", ")));
  }
  return it->second;
}

std::vector<std::string> TranslatorRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, fn] : translators_) out.push_back(name);
  out.emplace_back(kPlanToCode);
  std::sort(out.begin(), out.end());
  return out;
}

ExecutionFeedback execute_plan(const std::string& payload, BridgeServer& bridge) {
  try {
    auto fb = bridge.act_and_feedback(payload);
    fb.post_state = bridge.get_status();
    return fb;
  } catch (const BridgeError& e) {
    if (e.kind() == BridgeErrorKind::kConnection) throw;
    throw ExecutorError(fmt::format("action failed: {}", e.what()));
  }
}

namespace {

bool mentions_timeout(const std::vector<std::string>& errors) {
  return std::any_of(errors.begin(), errors.end(),
                     [](const std::string& e) { return util::contains_ci(e, "timeout"); });
}

}  // namespace

ExecutionFeedback run_and_feedback(const std::string& code,
                                   const std::vector<HelperProgram>& programs,
                                   Seconds timeout, std::shared_ptr<CodeExecutor> executor,
                                   Seconds grace) {
  if (!executor) throw ExecutorError("no code executor registered");
  auto promise = std::make_shared<std::promise<CodeRunResult>>();
  auto result = promise->get_future();
  // The worker owns copies of everything so it can outlive a hung call.
  std::thread worker([promise, executor, code, programs, timeout] {
    try {
      promise->set_value(executor->run(code, programs, timeout));
    } catch (...) {
      promise->set_exception(std::current_exception());
    }
  });
  auto limit = std::chrono::duration_cast<std::chrono::steady_clock::duration>(timeout + grace);
  if (result.wait_for(limit) != std::future_status::ready) {
    worker.detach();
    throw HungExecutorError(fmt::format(
        "code executor did not return within {:.1f}s (timeout {:.1f}s + grace {:.1f}s)",
        (timeout + grace).count(), timeout.count(), grace.count()));
  }
  worker.join();
  CodeRunResult run;
  try {
    run = result.get();
  } catch (const std::exception& e) {
    throw ExecutorError(fmt::format("code executor failed: {}", e.what()));
  }
  if (run.observation.empty()) throw ExecutorError("code executor returned no observation");

  ExecutionFeedback fb;
  fb.logs = std::move(run.metadata.logs);
  fb.errors = std::move(run.metadata.errors);
  fb.timed_out = run.metadata.timed_out;
  if (fb.timed_out && !mentions_timeout(fb.errors)) {
    fb.errors.push_back(fmt::format("timeout: execution exceeded {:.1f}s", timeout.count()));
  }
  fb.post_state = std::move(run.observation);
  return fb;
}

namespace {

std::string format_skills(const std::vector<SkillRecord>& skills) {
  if (skills.empty()) return "(none)";
  std::string out;
  for (const auto& s : skills) {
    out += fmt::format("### {}\n{}\n```\n{}\n```\n", s.name, s.description, s.body);
  }
  return out;
}

std::string skill_names(const std::vector<SkillRecord>& skills) {
  if (skills.empty()) return "(none)";
  std::vector<std::string> names;
  for (const auto& s : skills) names.push_back(s.name);
  return fmt::format("{}", fmt::join(names, ", "));
}

constexpr std::string_view kCodeShape =
    "Reply with the program inside a single fenced code block (```).";

// Draws corrective re-prompts from `budget`, which callers may share
// across several generations.
std::string generate_code(const std::string& prompt, LlmGateway& gateway, int& budget) {
  std::string current = prompt;
  int attempts = 0;
  while (true) {
    ++attempts;
    auto reply = gateway.complete(ModelRole::kCode, current, "code").text;
    if (auto code = util::extract_fenced_block(reply)) return *code;
    if (budget <= 0) {
      throw ExecutorError(fmt::format(
          "code model reply had no code block after {} attempt(s); last reply: {}", attempts,
          reply));
    }
    --budget;
    current = fmt::format("{}\n\nYour previous reply contained no code block. {}", prompt,
                          kCodeShape);
  }
}

TemplateVars code_vars(const ActionPlan& plan, const std::vector<SkillRecord>& skills,
                       const std::string& game_spec) {
  return {
      {"plan", to_json_text(plan)},
      {"plan_description", describe_plan(plan)},
      {"skills", format_skills(skills)},
      {"skill_names", skill_names(skills)},
      {"game_spec", game_spec},
      {"postcondition", plan.postcondition.value_or("(none)")},
  };
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

bool mentions_word(std::string_view text, std::string_view word) {
  for (auto pos = text.find(word); pos != std::string_view::npos;
       pos = text.find(word, pos + 1)) {
    bool left = pos == 0 || !is_word_char(text[pos - 1]);
    auto end = pos + word.size();
    bool right = end == text.size() || !is_word_char(text[end]);
    if (left && right) return true;
  }
  return false;
}

}  // namespace

std::string translate_to_code(const ActionPlan& plan,
                              const std::vector<SkillRecord>& related_skills,
                              const std::string& game_spec, const TemplateSet& templates,
                              LlmGateway& gateway, CodeGenOptions options) {
  if (!gateway.has_code_model()) throw ExecutorError("plan_to_code needs a code model");
  auto prompt = templates.get(PromptRole::kCodeGeneration)
                    .render(code_vars(plan, related_skills, game_spec));
  int budget = options.reparse_attempts;
  return generate_code(prompt, gateway, budget);
}

SynthesisOptions SynthesisOptions::from(const RunConfig& cfg) {
  SynthesisOptions o;
  o.max_rounds = cfg.tuning.skill_max_rounds;
  o.retrieval_k = cfg.retrieval_k;
  o.reparse_attempts = cfg.tuning.reparse_attempts;
  o.code_timeout = cfg.tuning.code_timeout;
  o.grace = cfg.tuning.executor_grace;
  return o;
}

std::string skill_name_for(const ActionPlan& plan) {
  std::string raw = plan.action;
  for (const auto& [key, value] : plan.parameters.items()) {
    raw += "_" + (value.is_string() ? value.get<std::string>() : value.dump());
  }
  std::string name;
  for (char c : util::to_lower(raw)) {
    bool ok = std::isalnum(static_cast<unsigned char>(c));
    if (ok) {
      name += c;
    } else if (!name.empty() && name.back() != '_') {
      name += '_';
    }
    if (name.size() >= 48) break;
  }
  while (!name.empty() && name.back() == '_') name.pop_back();
  return name.empty() ? "skill" : name;
}

SynthesisResult synthesize_skill(const ActionPlan& plan, MemoryStore& store,
                                 const Embedder& embedder, const std::string& game_spec,
                                 std::shared_ptr<CodeExecutor> executor,
                                 const TemplateSet& templates, LlmGateway& gateway,
                                 const SynthesisOptions& options) {
  if (options.max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
  if (!gateway.has_code_model()) throw ExecutorError("plan_to_code needs a code model");

  SynthesisResult result;
  std::vector<SkillRecord> related;
  for (const auto& hit : retrieve_skills(store, embedder, describe_plan(plan),
                                         options.retrieval_k)) {
    if (auto s = store.skill(hit.id)) {
      result.retrieved_skills.push_back(s->name);
      related.push_back(std::move(*s));
    }
  }
  auto all_skills = store.skills();
  std::vector<HelperProgram> programs;
  for (const auto& s : all_skills) programs.push_back({s.name, s.body});

  auto vars = code_vars(plan, related, game_spec);
  int budget = options.reparse_attempts;
  for (int round = 1; round <= options.max_rounds; ++round) {
    result.rounds = round;
    std::string prompt;
    if (round == 1) {
      prompt = templates.get(PromptRole::kCodeGeneration).render(vars);
    } else {
      auto refine = vars;
      refine["previous_code"] = result.last_code;
      std::string errors;
      for (const auto& e : result.error_history) errors += "- " + e + "\n";
      refine["errors"] = errors;
      prompt = templates.get(PromptRole::kCodeRefinement).render(refine);
    }
    try {
      result.last_code = generate_code(prompt, gateway, budget);
    } catch (const ExecutorError& e) {
      result.error_history.push_back(fmt::format("round {}: {}", round, e.what()));
      break;
    }

    result.feedback = run_and_feedback(result.last_code, programs, options.code_timeout,
                                       executor, options.grace);
    const auto& fb = result.feedback;
    bool clean = fb.errors.empty() && !fb.timed_out;
    if (clean && plan.postcondition &&
        fb.post_state->find(*plan.postcondition) == std::string::npos) {
      result.error_history.push_back(fmt::format(
          "round {}: postcondition '{}' not met by the observation", round, *plan.postcondition));
      continue;
    }
    if (!clean) {
      for (const auto& e : fb.errors) {
        result.error_history.push_back(fmt::format("round {}: {}", round, e));
      }
      continue;
    }

    SkillRecord skill;
    skill.name = skill_name_for(plan);
    if (auto existing = store.skill(skill.name);
        existing && existing->origin == SkillOrigin::kBasic) {
      skill.name += "_custom";
    }
    skill.body = result.last_code;
    skill.origin = SkillOrigin::kSynthesized;
    skill.refinement_count = round - 1;
    TemplateVars dvars = {{"plan_description", describe_plan(plan)},
                          {"code", skill.body},
                          {"skill_name", skill.name}};
    auto description = util::trim(
        gateway
            .complete(ModelRole::kInstruction,
                      templates.get(PromptRole::kSkillDescription).render(dvars),
                      "skill_description")
            .text);
    skill.description = description.empty() ? describe_plan(plan) : description;
    skill.description_embedding = embed(skill.description, embedder);
    for (const auto& s : all_skills) {
      if (s.name != skill.name && mentions_word(skill.body, s.name)) {
        skill.dependencies.push_back(s.name);
      }
    }
    store.store_skill(skill);
    result.skill = store.skill(skill.name);
    return result;
  }
  return result;
}

}  // namespace persona
