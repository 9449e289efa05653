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

#include "persona/embedding.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "persona/error.h"
#include "util/strings.h"

namespace persona {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension_ == 0) throw std::invalid_argument("embedding dimension must be positive");
}

EmbeddingVector HashEmbedder::embed_text(std::string_view text) const {
  EmbeddingVector v{std::vector<double>(dimension_, 0.0)};
  for (const auto& token : util::split_whitespace(text)) {
    std::uint64_t state = util::fnv1a(token, splitmix64(seed_));
    for (std::size_t i = 0; i < dimension_; ++i) {
      state = splitmix64(state);
      // Top 53 bits as a uniform value in [-1, 1).
      v.values[i] += static_cast<double>(state >> 11) * 0x1.0p-52 - 1.0;
    }
  }
  double norm = 0.0;
  for (double x : v.values) norm += x * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& x : v.values) x /= norm;
  }
  return v;
}

EmbeddingVector embed(std::string_view text, const Embedder& embedder) {
  if (util::trim(text).empty()) {
    throw std::invalid_argument("cannot embed empty text");
  }
  auto text_id = [&] { return fmt::format("{:016x}", util::fnv1a(text)); };
  EmbeddingVector v;
  try {
    v = embedder.embed_text(text);
  } catch (const std::exception& e) {
    throw EmbeddingError(
        fmt::format("embedding failed for text #{}: {}", text_id(), e.what()));
  }
  if (v.dimension() != embedder.dimension()) {
    throw EmbeddingError(fmt::format(
        "embedder returned dimension {} for text #{}, expected {}",
        v.dimension(), text_id(), embedder.dimension()));
  }
  if (!std::all_of(v.values.begin(), v.values.end(),
                   [](double x) { return std::isfinite(x); })) {
    throw EmbeddingError(
        fmt::format("embedder returned non-finite values for text #{}", text_id()));
  }
  return v;
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw EmbeddingError(fmt::format("cosine of vectors with dimensions {} and {}",
                                     a.dimension(), b.dimension()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) throw EmbeddingError("cosine of an all-zero vector");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace persona
