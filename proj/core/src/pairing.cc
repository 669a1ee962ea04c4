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

#include "acute/pairing.h"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <unordered_set>
#include <utility>

#include <fmt/format.h>

#include "acute/errors.h"
#include "acute/random.h"

namespace acute {
namespace {

using nlohmann::json;
using IndexPair = std::pair<size_t, size_t>;

constexpr uint64_t kQcStream = 0xffffffffULL;
constexpr uint64_t kOrderStream = 0xfffffffeULL;

std::string MatchupId(uint64_t seed, uint64_t group, uint64_t index) {
  return fmt::format("m{:016x}", Mix64(DeriveSeed(seed, (group << 32) | index)));
}

// Uniform random subset of size `count` from [0, total) (Floyd's algorithm).
std::vector<uint64_t> SampleDistinct(uint64_t total, uint64_t count, Rng& rng) {
  std::vector<uint64_t> picked;
  std::unordered_set<uint64_t> seen;
  picked.reserve(count);
  for (uint64_t j = total - count; j < total; ++j) {
    uint64_t t = rng.Below(j + 1);
    if (seen.contains(t)) t = j;
    seen.insert(t);
    picked.push_back(t);
  }
  rng.Shuffle(std::span<uint64_t>(picked));
  return picked;
}

// Index k of the unordered pairs {i < j} over n items, row-major.
IndexPair DecodeUnorderedPair(uint64_t k, uint64_t n) {
  uint64_t i = 0;
  while (k >= n - 1 - i) {
    k -= n - 1 - i;
    ++i;
  }
  return {i, i + 1 + k};
}

std::vector<size_t> ShuffledIndices(size_t n, Rng& rng) {
  std::vector<size_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = i;
  rng.Shuffle(std::span<size_t>(idx));
  return idx;
}

struct SampledComparison {
  std::vector<IndexPair> pairs;
  DiversityRegime regime;
};

SampledComparison SampleCrossPairs(size_t na, size_t nb, size_t target, Rng& rng) {
  if (std::min(na, nb) >= target) {
    const auto a = ShuffledIndices(na, rng);
    const auto b = ShuffledIndices(nb, rng);
    SampledComparison out{{}, DiversityRegime::kConversationUnique};
    for (size_t i = 0; i < target; ++i) out.pairs.emplace_back(a[i], b[i]);
    return out;
  }
  SampledComparison out{{}, DiversityRegime::kPairUnique};
  for (uint64_t k : SampleDistinct(uint64_t{na} * nb, target, rng)) {
    out.pairs.emplace_back(k / nb, k % nb);
  }
  return out;
}

SampledComparison SampleSelfPairs(size_t n, size_t target, Rng& rng) {
  if (n >= 2 * target) {
    const auto idx = ShuffledIndices(n, rng);
    SampledComparison out{{}, DiversityRegime::kConversationUnique};
    for (size_t i = 0; i < target; ++i) out.pairs.emplace_back(idx[2 * i], idx[2 * i + 1]);
    return out;
  }
  SampledComparison out{{}, DiversityRegime::kPairUnique};
  for (uint64_t k : SampleDistinct(uint64_t{n} * (n - 1) / 2, target, rng)) {
    out.pairs.push_back(DecodeUnorderedPair(k, n));
  }
  return out;
}

std::vector<const Conversation*> RequireConversations(
    const Corpus& corpus, const AgentId& agent, Provenance provenance) {
  if (!corpus.HasAgent(agent)) {
    Fail(ErrorCode::kNotFound, fmt::format("unknown agent {}", agent.Key()));
  }
  auto convs = corpus.ConversationsOf(agent, provenance);
  if (convs.empty()) {
    Fail(ErrorCode::kFailedPrecondition,
         fmt::format("agent {} has no {} conversations", agent.Key(),
                     ToString(provenance)));
  }
  return convs;
}

const json& Require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    Fail(ErrorCode::kInvalidArgument, fmt::format("missing field \"{}\"", key));
  }
  return *it;
}

DiversityRegime ParseRegime(std::string_view s) {
  if (s == "CONVERSATION_UNIQUE") return DiversityRegime::kConversationUnique;
  if (s == "PAIR_UNIQUE") return DiversityRegime::kPairUnique;
  Fail(ErrorCode::kInvalidArgument, fmt::format("unknown regime \"{}\"", s));
}

}  // namespace

std::string_view ToString(Side side) {
  return side == Side::kLeft ? "LEFT" : "RIGHT";
}

Side ParseSide(std::string_view s) {
  if (s == "LEFT") return Side::kLeft;
  if (s == "RIGHT") return Side::kRight;
  Fail(ErrorCode::kInvalidArgument, fmt::format("unknown side \"{}\"", s));
}

std::string_view ToString(DiversityRegime regime) {
  return regime == DiversityRegime::kConversationUnique ? "CONVERSATION_UNIQUE"
                                                        : "PAIR_UNIQUE";
}

const Matchup* Plan::Find(std::string_view matchup_id) const {
  for (const Matchup& m : matchups) {
    if (m.matchup_id == matchup_id) return &m;
  }
  for (const Matchup& m : qc_pool) {
    if (m.matchup_id == matchup_id) return &m;
  }
  return nullptr;
}

std::vector<Matchup> MakeQcPool(const Corpus& corpus, const AgentId& weak_agent,
                                std::string_view question_id, uint64_t seed) {
  const auto weak = corpus.ConversationsOf(weak_agent, Provenance::kHumanModel);
  if (weak.empty()) {
    Fail(ErrorCode::kFailedPrecondition,
         fmt::format("no weak-baseline conversations for {}", weak_agent.Key()));
  }
  const auto human = corpus.WithProvenance(Provenance::kHumanHuman);
  if (human.empty()) {
    Fail(ErrorCode::kFailedPrecondition, "no human-human conversations");
  }

  Rng rng(seed);
  const size_t size = std::min(weak.size(), human.size());
  const auto weak_order = ShuffledIndices(weak.size(), rng);
  const auto human_order = ShuffledIndices(human.size(), rng);
  std::vector<Matchup> pool;
  pool.reserve(size);
  for (size_t i = 0; i < size; ++i) {
    const Conversation& w = *weak[weak_order[i]];
    const Conversation& h = *human[human_order[i]];
    const Side gold = rng.Below(2) == 0 ? Side::kLeft : Side::kRight;
    Matchup m;
    m.matchup_id = MatchupId(seed, kQcStream, i);
    m.question_id = std::string(question_id);
    m.is_qc = true;
    m.gold_side = gold;
    if (gold == Side::kLeft) {
      m.left_conv = h.conv_id;
      m.left_agent = h.evaluated_agent;
      m.right_conv = w.conv_id;
      m.right_agent = w.evaluated_agent;
    } else {
      m.left_conv = w.conv_id;
      m.left_agent = w.evaluated_agent;
      m.right_conv = h.conv_id;
      m.right_agent = h.evaluated_agent;
    }
    pool.push_back(std::move(m));
  }
  return pool;
}

Plan BuildPlan(const Corpus& corpus, const QuestionRegistry& questions,
               std::span<const ComparisonSpec> specs, uint64_t seed,
               std::string run_id, const std::optional<QcSpec>& qc) {
  Plan plan;
  plan.run_id = std::move(run_id);
  plan.rng_seed = seed;

  for (size_t c = 0; c < specs.size(); ++c) {
    const ComparisonSpec& spec = specs[c];
    if (spec.target_annotations < 1) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("comparison {}: target_annotations must be >= 1", c));
    }
    if (spec.self_check != (spec.agent_a == spec.agent_b)) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("comparison {}: agents {} and {} must {}", c,
                       spec.agent_a.Key(), spec.agent_b.Key(),
                       spec.self_check ? "be identical for a self check"
                                       : "differ"));
    }
    questions.Get(spec.question_id);

    Rng rng(DeriveSeed(seed, c));
    const size_t target = static_cast<size_t>(spec.target_annotations);
    const auto convs_a = RequireConversations(corpus, spec.agent_a, spec.provenance);
    const auto convs_b =
        spec.self_check ? convs_a
                        : RequireConversations(corpus, spec.agent_b, spec.provenance);
    const uint64_t available =
        spec.self_check ? uint64_t{convs_a.size()} * (convs_a.size() - 1) / 2
                        : uint64_t{convs_a.size()} * convs_b.size();
    if (target > available) {
      Fail(ErrorCode::kFailedPrecondition,
           fmt::format("insufficient conversation pairs for comparison {} ({} vs "
                       "{}): target {} exceeds {} distinct pairs",
                       c, spec.agent_a.Key(), spec.agent_b.Key(), target,
                       available));
    }

    SampledComparison sampled =
        spec.self_check ? SampleSelfPairs(convs_a.size(), target, rng)
                        : SampleCrossPairs(convs_a.size(), convs_b.size(), target, rng);
    plan.comparisons.push_back(spec);
    plan.regimes.push_back(sampled.regime);

    for (size_t i = 0; i < sampled.pairs.size(); ++i) {
      const Conversation& a = *convs_a[sampled.pairs[i].first];
      const Conversation& b = *convs_b[sampled.pairs[i].second];
      const bool a_left = rng.Below(2) == 0;
      const Conversation& left = a_left ? a : b;
      const Conversation& right = a_left ? b : a;
      Matchup m;
      m.matchup_id = MatchupId(seed, c, i);
      m.left_conv = left.conv_id;
      m.right_conv = right.conv_id;
      m.question_id = spec.question_id;
      m.left_agent = left.evaluated_agent;
      m.right_agent = right.evaluated_agent;
      m.comparison = static_cast<int>(c);
      plan.matchups.push_back(std::move(m));
    }
  }

  // Interleave comparisons so each worker's few assignments are spread
  // across the whole run rather than drawn from the first comparison.
  Rng order_rng(DeriveSeed(seed, kOrderStream));
  order_rng.Shuffle(std::span<Matchup>(plan.matchups));

  if (qc) {
    questions.Get(qc->question_id);
    if (!corpus.HasAgent(qc->weak_agent)) {
      Fail(ErrorCode::kNotFound,
           fmt::format("unknown weak-baseline agent {}", qc->weak_agent.Key()));
    }
    plan.qc_pool = MakeQcPool(corpus, qc->weak_agent, qc->question_id,
                              DeriveSeed(seed, kQcStream));
  }

  std::set<std::string> ids;
  for (const auto* list : {&plan.matchups, &plan.qc_pool}) {
    for (const Matchup& m : *list) {
      if (!ids.insert(m.matchup_id).second) {
        Fail(ErrorCode::kFailedPrecondition,
             fmt::format("matchup id collision {}; choose another seed", m.matchup_id));
      }
    }
  }
  return plan;
}

std::vector<PlanSummaryRow> PlanSummary(const Plan& plan) {
  std::vector<PlanSummaryRow> rows;
  std::vector<std::set<std::pair<std::string, std::string>>> pairs(plan.comparisons.size());
  std::vector<std::map<std::string, int>> uses(plan.comparisons.size());
  for (size_t c = 0; c < plan.comparisons.size(); ++c) {
    const ComparisonSpec& spec = plan.comparisons[c];
    PlanSummaryRow row;
    row.comparison = static_cast<int>(c);
    row.agent_a = spec.agent_a;
    row.agent_b = spec.agent_b;
    row.question_id = spec.question_id;
    row.target_annotations = spec.target_annotations;
    row.regime = c < plan.regimes.size() ? plan.regimes[c]
                                         : DiversityRegime::kConversationUnique;
    rows.push_back(std::move(row));
  }
  for (const Matchup& m : plan.matchups) {
    if (m.comparison < 0 || static_cast<size_t>(m.comparison) >= rows.size()) continue;
    const size_t c = static_cast<size_t>(m.comparison);
    PlanSummaryRow& row = rows[c];
    ++row.matchups;
    auto key = std::minmax(m.left_conv, m.right_conv);
    if (!pairs[c].emplace(key.first, key.second).second) row.pair_reuse = true;
    for (const std::string* conv : {&m.left_conv, &m.right_conv}) {
      if (++uses[c][*conv] > 1) row.conversation_reuse = true;
    }
  }
  for (size_t c = 0; c < rows.size(); ++c) {
    rows[c].conversations_used = static_cast<int>(uses[c].size());
  }
  return rows;
}

void WritePlanSummaryTsv(std::ostream& out, std::span<const PlanSummaryRow> rows) {
  out << "comparison\tagent_a\tagent_b\tquestion\ttarget\tmatchups\t"
         "conversations_used\tpair_reuse\tconversation_reuse\tregime\n";
  for (const PlanSummaryRow& r : rows) {
    out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.comparison,
                       r.agent_a.Key(), r.agent_b.Key(), r.question_id,
                       r.target_annotations, r.matchups, r.conversations_used,
                       r.pair_reuse, r.conversation_reuse, ToString(r.regime));
  }
}

void to_json(json& j, const Matchup& m) {
  j = json{{"matchup_id", m.matchup_id},
           {"left_conv", m.left_conv},
           {"right_conv", m.right_conv},
           {"question", m.question_id},
           {"left_agent", m.left_agent},
           {"right_agent", m.right_agent},
           {"is_qc", m.is_qc},
           {"gold_side", m.gold_side ? json(ToString(*m.gold_side)) : json(nullptr)},
           {"comparison", m.comparison}};
}

void from_json(const json& j, Matchup& m) {
  m.matchup_id = Require(j, "matchup_id").get<std::string>();
  m.left_conv = Require(j, "left_conv").get<std::string>();
  m.right_conv = Require(j, "right_conv").get<std::string>();
  m.question_id = Require(j, "question").get<std::string>();
  m.left_agent = Require(j, "left_agent").get<AgentId>();
  m.right_agent = Require(j, "right_agent").get<AgentId>();
  m.is_qc = Require(j, "is_qc").get<bool>();
  const json& gold = Require(j, "gold_side");
  m.gold_side = gold.is_null() ? std::nullopt
                               : std::optional<Side>(ParseSide(gold.get<std::string>()));
  m.comparison = j.value("comparison", -1);
  if (m.left_conv == m.right_conv) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("matchup {} pairs a conversation with itself", m.matchup_id));
  }
  if (m.is_qc != m.gold_side.has_value()) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("matchup {}: gold_side must be set iff is_qc", m.matchup_id));
  }
}

void to_json(json& j, const ComparisonSpec& s) {
  j = json{{"agent_a", s.agent_a},
           {"agent_b", s.agent_b},
           {"question", s.question_id},
           {"target_annotations", s.target_annotations},
           {"provenance", ToString(s.provenance)},
           {"self_check", s.self_check}};
}

void from_json(const json& j, ComparisonSpec& s) {
  s.agent_a = Require(j, "agent_a").get<AgentId>();
  s.self_check = j.value("self_check", false);
  s.agent_b = s.self_check && !j.contains("agent_b")
                  ? s.agent_a
                  : Require(j, "agent_b").get<AgentId>();
  s.question_id = Require(j, "question").get<std::string>();
  s.target_annotations = Require(j, "target_annotations").get<int>();
  s.provenance = ParseProvenance(j.value("provenance", std::string("HUMAN_MODEL")));
}

void to_json(json& j, const Plan& p) {
  json regimes = json::array();
  for (DiversityRegime r : p.regimes) regimes.push_back(ToString(r));
  j = json{{"run_id", p.run_id},          {"rng_seed", p.rng_seed},
           {"comparisons", p.comparisons}, {"regimes", regimes},
           {"matchups", p.matchups},       {"qc_pool", p.qc_pool}};
}

void from_json(const json& j, Plan& p) {
  p.run_id = j.value("run_id", std::string());
  p.rng_seed = j.value("rng_seed", uint64_t{0});
  p.comparisons = Require(j, "comparisons").get<std::vector<ComparisonSpec>>();
  p.regimes.clear();
  for (const json& r : j.value("regimes", json::array())) {
    p.regimes.push_back(ParseRegime(r.get<std::string>()));
  }
  p.matchups = Require(j, "matchups").get<std::vector<Matchup>>();
  p.qc_pool = j.value("qc_pool", json::array()).get<std::vector<Matchup>>();
}

void WritePlan(std::ostream& out, const Plan& plan) {
  json header = plan;
  header.erase("matchups");
  header.erase("qc_pool");
  header["record"] = "plan";
  out << header.dump() << '\n';
  for (const Matchup& m : plan.matchups) {
    json r = m;
    r["record"] = "matchup";
    out << r.dump() << '\n';
  }
  for (const Matchup& m : plan.qc_pool) {
    json r = m;
    r["record"] = "qc";
    out << r.dump() << '\n';
  }
}

Plan ReadPlan(std::istream& in) {
  Plan plan;
  bool have_header = false;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (Trim(line).empty()) continue;
    try {
      json r = json::parse(line);
      const std::string kind = Require(r, "record").get<std::string>();
      if (kind == "plan") {
        r["matchups"] = json::array();
        Plan header = r.get<Plan>();
        plan.run_id = header.run_id;
        plan.rng_seed = header.rng_seed;
        plan.comparisons = std::move(header.comparisons);
        plan.regimes = std::move(header.regimes);
        have_header = true;
      } else if (kind == "matchup") {
        plan.matchups.push_back(r.get<Matchup>());
      } else if (kind == "qc") {
        plan.qc_pool.push_back(r.get<Matchup>());
      } else {
        Fail(ErrorCode::kInvalidArgument, fmt::format("unknown record \"{}\"", kind));
      }
    } catch (const json::exception& e) {
      Fail(ErrorCode::kInvalidArgument, fmt::format("plan line {}: {}", line_number, e.what()));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("plan line {}: {}", line_number, e.what()));
    }
  }
  if (!have_header) Fail(ErrorCode::kInvalidArgument, "plan has no header record");
  return plan;
}

}  // namespace acute
