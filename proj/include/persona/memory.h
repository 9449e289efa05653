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

// Per-agent persistent store for Memories and Skills.
//
// On disk a collection is `<root>/<agent_name>/`:
//   memories.log          one JSON record per line, appended and fsync'd
//   skills/manifest.jsonl one JSON line per skill, rewritten atomically
//   skills/<name>.skill   skill body
//
// Retrieval is an exhaustive cosine scan. Equal scores keep insertion
// order, so results are reproducible across reopen.

#ifndef PERSONA_MEMORY_H_
#define PERSONA_MEMORY_H_

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "persona/embedding.h"

namespace persona {

enum class Outcome { kSuccess, kPartial, kFailure };

std::string_view to_string(Outcome outcome);
std::optional<Outcome> parse_outcome(std::string_view text);

using Timestamp = std::chrono::time_point<std::chrono::system_clock,
                                          std::chrono::milliseconds>;

Timestamp now_ms();

struct MemoryRecord {
  std::string id;
  std::string agent_name;
  std::int64_t iteration = 0;
  std::string plan_summary;
  Outcome outcome = Outcome::kFailure;
  std::string context;
  std::string game_state_snapshot;
  std::string preference_summary;
  EmbeddingVector state_embedding;
  EmbeddingVector preference_embedding;
  Timestamp created_at{};

  bool operator==(const MemoryRecord&) const = default;
};

enum class SkillOrigin { kBasic, kSynthesized };

std::string_view to_string(SkillOrigin origin);

struct SkillRecord {
  std::string name;
  std::string description;
  std::string body;
  std::vector<std::string> dependencies;
  SkillOrigin origin = SkillOrigin::kSynthesized;
  int refinement_count = 0;
  EmbeddingVector description_embedding;

  bool operator==(const SkillRecord&) const = default;
};

struct RetrievalHit {
  std::string id;  // memory id or skill name
  double score = 0.0;

  bool operator==(const RetrievalHit&) const = default;
};

enum class MemoryChannel { kPreference, kState };

class MemoryStore {
 public:
  MemoryStore(const MemoryStore&) = delete;
  MemoryStore& operator=(const MemoryStore&) = delete;
  ~MemoryStore();

  // Opens or creates `<root>/<agent_name>`. A torn final line left by a
  // crash is discarded.
  static std::unique_ptr<MemoryStore> open(const std::filesystem::path& root,
                                           const std::string& agent_name,
                                           std::size_t dimension);

  std::string store_memory(const MemoryRecord& rec);

  // Inserts a skill, or replaces an existing one of the same name and
  // increments its refinement_count. Rejects dangling or cyclic
  // dependencies.
  std::string store_skill(const SkillRecord& rec);

  std::optional<MemoryRecord> memory(const std::string& id) const;
  std::optional<SkillRecord> skill(const std::string& name) const;
  std::vector<MemoryRecord> memories() const;
  std::vector<SkillRecord> skills() const;
  std::size_t memory_count() const;
  std::size_t skill_count() const;

  // An id not used by any stored memory.
  std::string next_memory_id() const;

  std::vector<RetrievalHit> top_k_memories(const EmbeddingVector& query,
                                           MemoryChannel channel, int k) const;
  std::vector<RetrievalHit> top_k_skills(const EmbeddingVector& query,
                                         int k) const;

  std::size_t dimension() const { return dimension_; }
  const std::string& agent_name() const { return agent_name_; }
  const std::filesystem::path& directory() const { return dir_; }

 private:
  MemoryStore(std::filesystem::path dir, std::string agent_name,
              std::size_t dimension);

  void load_memories();
  void load_skills();
  void write_manifest() const;
  void check_vector(const EmbeddingVector& v, std::string_view what) const;

  std::filesystem::path dir_;
  std::string agent_name_;
  std::size_t dimension_;
  int log_fd_ = -1;

  mutable std::shared_mutex mu_;
  std::vector<MemoryRecord> memories_;
  std::vector<SkillRecord> skills_;
};

std::unique_ptr<MemoryStore> load_collection(const std::filesystem::path& root,
                                             const std::string& agent_name,
                                             std::size_t dimension);

// Removes every memory and skill of the agent. Returns whether anything
// existed.
bool delete_collection(const std::filesystem::path& root,
                       const std::string& agent_name);

// The three retrieval channels. k must be >= 1; an empty collection yields
// an empty list.
std::vector<RetrievalHit> retrieve_preferred(const MemoryStore& store,
                                             const Embedder& embedder,
                                             std::string_view personality_prompt,
                                             int k);
std::vector<RetrievalHit> retrieve_related(const MemoryStore& store,
                                           const Embedder& embedder,
                                           std::string_view current_state, int k);
std::vector<RetrievalHit> retrieve_skills(const MemoryStore& store,
                                          const Embedder& embedder,
                                          std::string_view plan_description,
                                          int k);

// Record <-> line codecs for the on-disk formats.
std::string encode_memory_line(const MemoryRecord& rec);
MemoryRecord decode_memory_line(std::string_view line);

}  // namespace persona

#endif  // PERSONA_MEMORY_H_
