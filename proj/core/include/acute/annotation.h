// Copyright 2026 The Acute Eval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ACUTE_ANNOTATION_H_
#define ACUTE_ANNOTATION_H_

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "acute/corpus.h"
#include "acute/pairing.h"

namespace acute {

// One worker's binary judgment on one matchup.
struct Annotation {
  std::string annotation_id;
  std::string matchup_id;
  std::string worker_id;
  Side chosen_side = Side::kLeft;
  AgentId chosen_agent;  // agent placed on chosen_side
  std::string justification;
  double elapsed_seconds = 0.0;
  int64_t submitted_at_ms = 0;  // unix epoch milliseconds

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

void to_json(nlohmann::json& j, const Annotation& a);
void from_json(const nlohmann::json& j, Annotation& a);

}  // namespace acute

#endif  // ACUTE_ANNOTATION_H_
