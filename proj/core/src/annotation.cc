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

#include "acute/annotation.h"

#include "acute/errors.h"

namespace acute {

using nlohmann::json;

void to_json(json& j, const Annotation& a) {
  j = json{{"annotation_id", a.annotation_id},
           {"matchup_id", a.matchup_id},
           {"worker_id", a.worker_id},
           {"chosen_side", ToString(a.chosen_side)},
           {"chosen_agent", a.chosen_agent},
           {"justification", a.justification},
           {"elapsed_seconds", a.elapsed_seconds},
           {"submitted_at_ms", a.submitted_at_ms}};
}

void from_json(const json& j, Annotation& a) {
  a.annotation_id = j.value("annotation_id", std::string());
  a.matchup_id = j.at("matchup_id").get<std::string>();
  a.worker_id = j.at("worker_id").get<std::string>();
  a.chosen_side = ParseSide(j.at("chosen_side").get<std::string>());
  if (auto it = j.find("chosen_agent"); it != j.end() && !it->is_null()) {
    a.chosen_agent = it->get<AgentId>();
  }
  a.justification = j.value("justification", std::string());
  a.elapsed_seconds = j.value("elapsed_seconds", 0.0);
  if (a.elapsed_seconds < 0) {
    Fail(ErrorCode::kInvalidArgument, "elapsed_seconds must be nonnegative");
  }
  a.submitted_at_ms = j.value("submitted_at_ms", int64_t{0});
}

}  // namespace acute
