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

#include "persona/memory.h"

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "persona/error.h"
#include "util/strings.h"

namespace persona {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kMemoriesFile = "memories.log";
constexpr const char* kSkillsDir = "skills";
constexpr const char* kManifestFile = "manifest.jsonl";

bool valid_name(std::string_view name) {
  if (name.empty() || name == "." || name == "..") return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
           c == '.';
  });
}

std::filesystem::path collection_dir(const std::filesystem::path& root,
                                     const std::string& agent_name) {
  if (!valid_name(agent_name)) {
    throw MemoryError(fmt::format(
        "agent name '{}' is not usable as a collection name", agent_name));
  }
  return root / agent_name;
}

SkillOrigin parse_skill_origin(const std::string& s) {
  if (s == "basic") return SkillOrigin::kBasic;
  if (s == "synthesized") return SkillOrigin::kSynthesized;
  throw MemoryError("unknown skill origin '" + s + "'");
}

// Exhaustive scan, highest score first, earlier index first on ties.
template <typename Records, typename VectorOf>
std::vector<RetrievalHit> rank(const Records& records, VectorOf vector_of,
                               const EmbeddingVector& query, int k,
                               auto id_of) {
  if (k < 1) throw std::invalid_argument("retrieval k must be >= 1");
  std::vector<double> scores(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    scores[i] = cosine(vector_of(records[i]), query);
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  std::vector<RetrievalHit> hits;
  hits.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    hits.push_back({id_of(records[order[i]]), scores[order[i]]});
  }
  return hits;
}

ordered_json encode_skill(const SkillRecord& s) {
  ordered_json j;
  j["name"] = s.name;
  j["description"] = s.description;
  j["dependencies"] = s.dependencies;
  j["origin"] = to_string(s.origin);
  j["refinement_count"] = s.refinement_count;
  j["body_file"] = s.name + ".skill";
  j["description_embedding"] = s.description_embedding.values;
  return j;
}

}  // namespace

std::string_view to_string(SkillOrigin origin) {
  return origin == SkillOrigin::kBasic ? "basic" : "synthesized";
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::kSuccess: return "success";
    case Outcome::kPartial: return "partial";
    case Outcome::kFailure: return "failure";
  }
  return "failure";
}

std::optional<Outcome> parse_outcome(std::string_view text) {
  std::string s = util::to_lower(util::trim(text));
  if (s == "success") return Outcome::kSuccess;
  if (s == "partial") return Outcome::kPartial;
  if (s == "failure") return Outcome::kFailure;
  return std::nullopt;
}

Timestamp now_ms() {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(
      std::chrono::system_clock::now());
}

std::string encode_memory_line(const MemoryRecord& rec) {
  ordered_json j;
  j["id"] = rec.id;
  j["agent_name"] = rec.agent_name;
  j["iteration"] = rec.iteration;
  j["plan_summary"] = rec.plan_summary;
  j["outcome"] = to_string(rec.outcome);
  j["context"] = rec.context;
  j["game_state_snapshot"] = rec.game_state_snapshot;
  j["preference_summary"] = rec.preference_summary;
  j["state_embedding"] = rec.state_embedding.values;
  j["preference_embedding"] = rec.preference_embedding.values;
  j["created_at"] = rec.created_at.time_since_epoch().count();
  return j.dump();
}

MemoryRecord decode_memory_line(std::string_view line) {
  auto j = ordered_json::parse(line);
  MemoryRecord rec;
  rec.id = j.at("id").get<std::string>();
  rec.agent_name = j.at("agent_name").get<std::string>();
  rec.iteration = j.at("iteration").get<std::int64_t>();
  rec.plan_summary = j.at("plan_summary").get<std::string>();
  auto outcome = parse_outcome(j.at("outcome").get<std::string>());
  if (!outcome) throw MemoryError("unknown outcome in memory record " + rec.id);
  rec.outcome = *outcome;
  rec.context = j.at("context").get<std::string>();
  rec.game_state_snapshot = j.at("game_state_snapshot").get<std::string>();
  rec.preference_summary = j.at("preference_summary").get<std::string>();
  rec.state_embedding.values = j.at("state_embedding").get<std::vector<double>>();
  rec.preference_embedding.values =
      j.at("preference_embedding").get<std::vector<double>>();
  rec.created_at = Timestamp(std::chrono::milliseconds(j.at("created_at").get<std::int64_t>()));
  return rec;
}

MemoryStore::MemoryStore(std::filesystem::path dir, std::string agent_name,
                         std::size_t dimension)
    : dir_(std::move(dir)), agent_name_(std::move(agent_name)), dimension_(dimension) {}

MemoryStore::~MemoryStore() {
  if (log_fd_ >= 0) ::close(log_fd_);
}

std::unique_ptr<MemoryStore> MemoryStore::open(const std::filesystem::path& root,
                                               const std::string& agent_name,
                                               std::size_t dimension) {
  if (dimension == 0) throw std::invalid_argument("embedding dimension must be positive");
  auto dir = collection_dir(root, agent_name);
  std::error_code ec;
  std::filesystem::create_directories(dir / kSkillsDir, ec);
  if (ec) {
    throw MemoryError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  }
  std::unique_ptr<MemoryStore> store(new MemoryStore(dir, agent_name, dimension));
  store->load_memories();
  store->load_skills();
  return store;
}

void MemoryStore::load_memories() {
  auto path = dir_ / kMemoriesFile;
  log_fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (log_fd_ < 0) {
    throw MemoryError(fmt::format("cannot open {}: {}", path.string(), std::strerror(errno)));
  }
  std::string data;
  try {
    data = util::read_file(path);
  } catch (const std::exception& e) {
    throw MemoryError(e.what());
  }
  // Anything after the last newline is a record whose append was cut short.
  auto last_nl = data.rfind('\n');
  std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
  if (complete != data.size()) {
    if (::ftruncate(log_fd_, static_cast<off_t>(complete)) != 0) {
      throw MemoryError(fmt::format("cannot truncate torn record in {}: {}",
                                    path.string(), std::strerror(errno)));
    }
    data.resize(complete);
  }
  int line_no = 0;
  for (const auto& line : util::split_lines(data)) {
    ++line_no;
    if (line.empty()) continue;
    MemoryRecord rec;
    try {
      rec = decode_memory_line(line);
    } catch (const std::exception& e) {
      throw MemoryError(
          fmt::format("{}: line {}: corrupt record: {}", path.string(), line_no, e.what()));
    }
    check_vector(rec.state_embedding, "state_embedding");
    check_vector(rec.preference_embedding, "preference_embedding");
    memories_.push_back(std::move(rec));
  }
}

void MemoryStore::load_skills() {
  auto manifest = dir_ / kSkillsDir / kManifestFile;
  std::error_code ec;
  if (!std::filesystem::exists(manifest, ec)) return;
  std::string data;
  try {
    data = util::read_file(manifest);
  } catch (const std::exception& e) {
    throw MemoryError(e.what());
  }
  for (const auto& line : util::split_lines(data)) {
    if (line.empty()) continue;
    try {
      auto j = ordered_json::parse(line);
      SkillRecord s;
      s.name = j.at("name").get<std::string>();
      s.description = j.at("description").get<std::string>();
      s.dependencies = j.at("dependencies").get<std::vector<std::string>>();
      s.origin = parse_skill_origin(j.at("origin").get<std::string>());
      s.refinement_count = j.at("refinement_count").get<int>();
      s.description_embedding.values =
          j.at("description_embedding").get<std::vector<double>>();
      s.body = util::read_file(dir_ / kSkillsDir / j.at("body_file").get<std::string>());
      check_vector(s.description_embedding, "description_embedding");
      skills_.push_back(std::move(s));
    } catch (const MemoryError&) {
      throw;
    } catch (const std::exception& e) {
      throw MemoryError(fmt::format("{}: corrupt skill entry: {}", manifest.string(), e.what()));
    }
  }
}

void MemoryStore::check_vector(const EmbeddingVector& v, std::string_view what) const {
  if (v.dimension() != dimension_) {
    throw MemoryError(fmt::format("{} has dimension {}, collection uses {}", what,
                                  v.dimension(), dimension_));
  }
  bool nonzero = false;
  for (double x : v.values) {
    if (!std::isfinite(x)) throw MemoryError(fmt::format("{} has a non-finite component", what));
    nonzero = nonzero || x != 0.0;
  }
  if (!nonzero) throw MemoryError(fmt::format("{} is all zeros", what));
}

std::string MemoryStore::store_memory(const MemoryRecord& rec) {
  if (rec.id.empty()) throw MemoryError("memory id is empty");
  if (rec.agent_name != agent_name_) {
    throw MemoryError(fmt::format("memory for agent '{}' stored in collection '{}'",
                                  rec.agent_name, agent_name_));
  }
  if (util::trim(rec.preference_summary).empty()) {
    throw MemoryError("memory " + rec.id + " has an empty preference summary");
  }
  check_vector(rec.state_embedding, "state_embedding");
  check_vector(rec.preference_embedding, "preference_embedding");

  std::unique_lock lock(mu_);
  for (const auto& m : memories_) {
    if (m.id == rec.id) throw MemoryError("duplicate memory id " + rec.id);
  }
  std::string line = encode_memory_line(rec) + "\n";
  std::size_t off = 0;
  while (off < line.size()) {
    ssize_t n = ::write(log_fd_, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw MemoryError(fmt::format("cannot append to {}: {}",
                                    (dir_ / kMemoriesFile).string(), std::strerror(errno)));
    }
    off += static_cast<std::size_t>(n);
  }
  if (::fsync(log_fd_) != 0) {
    throw MemoryError(fmt::format("cannot sync {}: {}", (dir_ / kMemoriesFile).string(),
                                  std::strerror(errno)));
  }
  memories_.push_back(rec);
  return rec.id;
}

std::string MemoryStore::store_skill(const SkillRecord& rec) {
  if (!valid_name(rec.name)) {
    throw MemoryError(fmt::format("invalid skill name '{}'", rec.name));
  }
  check_vector(rec.description_embedding, "description_embedding");

  std::unique_lock lock(mu_);
  auto find = [&](const std::string& name) {
    return std::find_if(skills_.begin(), skills_.end(),
                        [&](const SkillRecord& s) { return s.name == name; });
  };
  std::vector<std::string> deps;
  for (const auto& dep : rec.dependencies) {
    if (std::find(deps.begin(), deps.end(), dep) != deps.end()) continue;
    if (dep == rec.name) {
      throw MemoryError(fmt::format("skill '{}' depends on itself", rec.name));
    }
    if (find(dep) == skills_.end()) {
      throw MemoryError(fmt::format("skill '{}' depends on unknown skill '{}'", rec.name, dep));
    }
    deps.push_back(dep);
  }

  // The graph was acyclic before, so a new cycle has to pass through rec.
  std::set<std::string> seen;
  std::vector<std::string> stack(deps.begin(), deps.end());
  while (!stack.empty()) {
    std::string cur = stack.back();
    stack.pop_back();
    if (cur == rec.name) {
      throw MemoryError(fmt::format("storing skill '{}' would create a dependency cycle",
                                    rec.name));
    }
    if (!seen.insert(cur).second) continue;
    auto it = find(cur);
    if (it != skills_.end()) {
      stack.insert(stack.end(), it->dependencies.begin(), it->dependencies.end());
    }
  }

  SkillRecord next = rec;
  next.dependencies = deps;
  auto existing = find(rec.name);
  if (existing != skills_.end()) next.refinement_count = existing->refinement_count + 1;

  try {
    util::write_file_atomic(dir_ / kSkillsDir / (rec.name + ".skill"), next.body);
  } catch (const std::exception& e) {
    throw MemoryError(e.what());
  }
  SkillRecord previous;
  if (existing != skills_.end()) {
    previous = *existing;
    *existing = next;
  } else {
    skills_.push_back(next);
  }
  try {
    write_manifest();
  } catch (...) {
    if (existing != skills_.end()) {
      *existing = previous;
    } else {
      skills_.pop_back();
    }
    throw;
  }
  return rec.name;
}

void MemoryStore::write_manifest() const {
  std::string out;
  for (const auto& s : skills_) out += encode_skill(s).dump() + "\n";
  try {
    util::write_file_atomic(dir_ / kSkillsDir / kManifestFile, out);
  } catch (const std::exception& e) {
    throw MemoryError(e.what());
  }
}

std::optional<MemoryRecord> MemoryStore::memory(const std::string& id) const {
  std::shared_lock lock(mu_);
  for (const auto& m : memories_) {
    if (m.id == id) return m;
  }
  return std::nullopt;
}

std::optional<SkillRecord> MemoryStore::skill(const std::string& name) const {
  std::shared_lock lock(mu_);
  for (const auto& s : skills_) {
    if (s.name == name) return s;
  }
  return std::nullopt;
}

std::vector<MemoryRecord> MemoryStore::memories() const {
  std::shared_lock lock(mu_);
  return memories_;
}

std::vector<SkillRecord> MemoryStore::skills() const {
  std::shared_lock lock(mu_);
  return skills_;
}

std::size_t MemoryStore::memory_count() const {
  std::shared_lock lock(mu_);
  return memories_.size();
}

std::size_t MemoryStore::skill_count() const {
  std::shared_lock lock(mu_);
  return skills_.size();
}

std::string MemoryStore::next_memory_id() const {
  std::shared_lock lock(mu_);
  std::set<std::string> used;
  for (const auto& m : memories_) used.insert(m.id);
  for (std::size_t n = memories_.size() + 1;; ++n) {
    auto id = fmt::format("{}-{:06d}", agent_name_, n);
    if (!used.contains(id)) return id;
  }
}

std::vector<RetrievalHit> MemoryStore::top_k_memories(const EmbeddingVector& query,
                                                      MemoryChannel channel,
                                                      int k) const {
  std::shared_lock lock(mu_);
  return rank(
      memories_,
      [channel](const MemoryRecord& m) -> const EmbeddingVector& {
        return channel == MemoryChannel::kPreference ? m.preference_embedding
                                                     : m.state_embedding;
      },
      query, k, [](const MemoryRecord& m) { return m.id; });
}

std::vector<RetrievalHit> MemoryStore::top_k_skills(const EmbeddingVector& query,
                                                    int k) const {
  std::shared_lock lock(mu_);
  return rank(
      skills_,
      [](const SkillRecord& s) -> const EmbeddingVector& { return s.description_embedding; },
      query, k, [](const SkillRecord& s) { return s.name; });
}

std::unique_ptr<MemoryStore> load_collection(const std::filesystem::path& root,
                                             const std::string& agent_name,
                                             std::size_t dimension) {
  return MemoryStore::open(root, agent_name, dimension);
}

bool delete_collection(const std::filesystem::path& root, const std::string& agent_name) {
  auto dir = collection_dir(root, agent_name);
  std::error_code ec;
  if (!std::filesystem::exists(dir, ec)) return false;
  bool had_content = false;
  for (auto it = std::filesystem::recursive_directory_iterator(dir, ec);
       !ec && it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
    if (it->is_regular_file() && it->file_size() > 0) {
      had_content = true;
      break;
    }
  }
  std::filesystem::remove_all(dir, ec);
  if (ec) {
    throw MemoryError(fmt::format("cannot delete {}: {}", dir.string(), ec.message()));
  }
  return had_content;
}

namespace {

std::vector<RetrievalHit> query_memories(const MemoryStore& store, const Embedder& embedder,
                                         std::string_view text, MemoryChannel channel,
                                         int k) {
  if (k < 1) throw std::invalid_argument("retrieval k must be >= 1");
  if (store.memory_count() == 0) return {};
  return store.top_k_memories(embed(text, embedder), channel, k);
}

}  // namespace

std::vector<RetrievalHit> retrieve_preferred(const MemoryStore& store,
                                             const Embedder& embedder,
                                             std::string_view personality_prompt, int k) {
  return query_memories(store, embedder, personality_prompt, MemoryChannel::kPreference, k);
}

std::vector<RetrievalHit> retrieve_related(const MemoryStore& store, const Embedder& embedder,
                                           std::string_view current_state, int k) {
  return query_memories(store, embedder, current_state, MemoryChannel::kState, k);
}

std::vector<RetrievalHit> retrieve_skills(const MemoryStore& store, const Embedder& embedder,
                                          std::string_view plan_description, int k) {
  if (k < 1) throw std::invalid_argument("retrieval k must be >= 1");
  if (store.skill_count() == 0) return {};
  return store.top_k_skills(embed(plan_description, embedder), k);
}

}  // namespace persona
