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

// Pulling structured content out of free-form model replies.

#ifndef PERSONA_UTIL_EXTRACT_H_
#define PERSONA_UTIL_EXTRACT_H_

#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace persona::util {

// The first balanced `{...}` in `text` that parses as a JSON object. On
// failure returns nullopt and describes why in `*why`.
std::optional<nlohmann::json> extract_json_object(std::string_view text,
                                                  std::string* why = nullptr);

// Contents of the first ``` fenced block, without the fence lines or the
// language tag. nullopt when there is no fence or the block is blank.
std::optional<std::string> extract_fenced_block(std::string_view text);

}  // namespace persona::util

#endif  // PERSONA_UTIL_EXTRACT_H_
