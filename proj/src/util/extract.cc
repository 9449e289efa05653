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

#include "util/extract.h"

namespace persona::util {

std::optional<nlohmann::json> extract_json_object(std::string_view text,
                                                  std::string* why) {
  std::string last_error = "reply contains no JSON object";
  for (std::size_t start = text.find('{'); start != std::string_view::npos;
       start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string_view::npos;
    for (std::size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          end = i;
          break;
        }
      }
    }
    if (end == std::string_view::npos) {
      last_error = "unbalanced braces in reply";
      break;
    }
    auto parsed = nlohmann::json::parse(text.substr(start, end - start + 1),
                                        nullptr, /*allow_exceptions=*/false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    last_error = "reply contains malformed JSON";
  }
  if (why) *why = last_error;
  return std::nullopt;
}

std::optional<std::string> extract_fenced_block(std::string_view text) {
  auto open = text.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto body = text.find('\n', open);
  if (body == std::string_view::npos) return std::nullopt;
  ++body;
  auto close = text.find("```", body);
  std::string block(text.substr(body, close == std::string_view::npos
                                          ? std::string_view::npos
                                          : close - body));
  if (block.find_first_not_of(" \t\r\n") == std::string::npos) return std::nullopt;
  return block;
}

}  // namespace persona::util
