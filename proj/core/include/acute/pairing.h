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

#ifndef ACUTE_PAIRING_H_
#define ACUTE_PAIRING_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "acute/corpus.h"
#include "acute/questions.h"

namespace acute {

enum class Side { kLeft, kRight };

std::string_view ToString(Side side);
Side ParseSide(std::string_view s);
inline Side OtherSide(Side side) {
  return side == Side::kLeft ? Side::kRight : Side::kLeft;
}

// One pairwise trial. `comparison` indexes Plan::comparisons; QC matchups
// use -1.
struct Matchup {
  std::string matchup_id;
  std::string left_conv;
  std::string right_conv;
  std::string question_id;
  AgentId left_agent;
  AgentId right_agent;
  bool is_qc = false;
  std::optional<Side> gold_side;
  int comparison = -1;

  const AgentId& AgentOn(Side side) const {
    return side == Side::kLeft ? left_agent : right_agent;
  }
  const std::string& ConvOn(Side side) const {
    return side == Side::kLeft ? left_conv : right_conv;
  }

  friend bool operator==(const Matchup&, const Matchup&) = default;
};

// One model-vs-model comparison. With `self_check` set the comparison is an
// A/A test: agent_b must equal agent_a and both sides are drawn from the
// same agent's conversations.
struct ComparisonSpec {
  AgentId agent_a;
  AgentId agent_b;
  std::string question_id;
  int target_annotations = 1;
  Provenance provenance = Provenance::kHumanModel;
  bool self_check = false;

  friend bool operator==(const ComparisonSpec&, const ComparisonSpec&) = default;
};

struct QcSpec {
  AgentId weak_agent;
  std::string question_id;
};

enum class DiversityRegime {
  // Every conversation appears in at most one matchup of the comparison.
  kConversationUnique,
  // Only unordered conversation pairs are unique.
  kPairUnique,
};

std::string_view ToString(DiversityRegime regime);

struct Plan {
  std::string run_id;
  uint64_t rng_seed = 0;
  std::vector<ComparisonSpec> comparisons;
  std::vector<DiversityRegime> regimes;  // parallel to comparisons
  std::vector<Matchup> matchups;
  std::vector<Matchup> qc_pool;

  // Searches matchups, then the QC pool. Linear.
  const Matchup* Find(std::string_view matchup_id) const;

  friend bool operator==(const Plan&, const Plan&) = default;
};

// Builds the static matchup plan. Pure function of its arguments.
// Throws kNotFound for unknown agents/questions, kFailedPrecondition when an
// agent has no conversations of the requested provenance or when
// target_annotations exceeds the number of distinct conversation pairs,
// kInvalidArgument for a malformed spec.
Plan BuildPlan(const Corpus& corpus, const QuestionRegistry& questions,
               std::span<const ComparisonSpec> specs, uint64_t seed,
               std::string run_id = "",
               const std::optional<QcSpec>& qc = std::nullopt);

// Weak-baseline-vs-human conversations paired against human-human ones,
// gold side on the human-human conversation. No conversation is reused;
// size is min(#weak, #human-human).
std::vector<Matchup> MakeQcPool(const Corpus& corpus, const AgentId& weak_agent,
                                std::string_view question_id, uint64_t seed);

struct PlanSummaryRow {
  int comparison = 0;
  AgentId agent_a;
  AgentId agent_b;
  std::string question_id;
  int target_annotations = 0;
  int matchups = 0;
  int conversations_used = 0;
  bool pair_reuse = false;
  // Some conversation appears in more than one matchup of the comparison.
  bool conversation_reuse = false;
  DiversityRegime regime = DiversityRegime::kConversationUnique;
};

std::vector<PlanSummaryRow> PlanSummary(const Plan& plan);
void WritePlanSummaryTsv(std::ostream& out, std::span<const PlanSummaryRow> rows);

void to_json(nlohmann::json& j, const Matchup& m);
void from_json(const nlohmann::json& j, Matchup& m);
void to_json(nlohmann::json& j, const ComparisonSpec& s);
void from_json(const nlohmann::json& j, ComparisonSpec& s);
void to_json(nlohmann::json& j, const Plan& p);
void from_json(const nlohmann::json& j, Plan& p);

// Line-delimited form: a header record, then one record per matchup and
// per QC matchup.
void WritePlan(std::ostream& out, const Plan& plan);
Plan ReadPlan(std::istream& in);

}  // namespace acute

#endif  // ACUTE_PAIRING_H_
