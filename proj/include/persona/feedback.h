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

#ifndef PERSONA_FEEDBACK_H_
#define PERSONA_FEEDBACK_H_

#include <optional>
#include <string>
#include <vector>

namespace persona {

// What the environment reported after carrying out a plan or a script.
// timed_out implies a timeout entry in errors.
struct ExecutionFeedback {
  std::vector<std::string> logs;
  std::vector<std::string> errors;
  bool timed_out = false;
  std::optional<std::string> post_state;

  bool operator==(const ExecutionFeedback&) const = default;
};

}  // namespace persona

#endif  // PERSONA_FEEDBACK_H_
