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

#ifndef PERSONA_EMBEDDING_H_
#define PERSONA_EMBEDDING_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "persona/config.h"

namespace persona {

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dimension() const = 0;
  virtual EmbeddingVector embed_text(std::string_view text) const = 0;
};

// Seeded hash-bag over whitespace tokens: each distinct token contributes a
// fixed pseudo-random direction, the sum is L2-normalised. Deterministic and
// insensitive to token order.
class HashEmbedder : public Embedder {
 public:
  static constexpr std::uint64_t kDefaultSeed = 0x5eed0fba6ULL;

  explicit HashEmbedder(std::size_t dimension = 64,
                        std::uint64_t seed = kDefaultSeed);

  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed_text(std::string_view text) const override;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

// OpenAI-style /v1/embeddings client.
class HttpEmbedder : public Embedder {
 public:
  HttpEmbedder(ModelEndpoint endpoint, std::size_t dimension, Seconds timeout);

  std::size_t dimension() const override { return dimension_; }
  EmbeddingVector embed_text(std::string_view text) const override;

 private:
  ModelEndpoint endpoint_;
  std::size_t dimension_;
  Seconds timeout_;
};

// Checks the text precondition and the embedder's output. Failures carry a
// hash of the text, never the text.
EmbeddingVector embed(std::string_view text, const Embedder& embedder);

// dot(a, b) / (|a| |b|), clamped to [-1, 1]. Throws EmbeddingError on a
// dimension mismatch or an all-zero vector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace persona

#endif  // PERSONA_EMBEDDING_H_
