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

#include "fixtures.h"

#include <stdlib.h>

#include <fmt/format.h>

#include "acute/errors.h"
#include "acute/random.h"

namespace acute::testing {

TempDir::TempDir() {
  std::string pattern = (std::filesystem::temp_directory_path() / "acute-XXXXXX").string();
  if (mkdtemp(pattern.data()) == nullptr) Fail(ErrorCode::kIo, "mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

Conversation MakeConversation(const std::string& conv_id, const AgentId& evaluated,
                              Provenance provenance, int turns_per_speaker,
                              SpeakerSlot evaluated_slot) {
  Conversation c;
  c.conv_id = conv_id;
  c.evaluated_agent = evaluated;
  c.evaluated_slot = evaluated_slot;
  c.provenance = provenance;
  c.partner_agent = provenance == Provenance::kSelfChat ? evaluated : AgentId::Human();
  const uint64_t tag = HashString(conv_id);
  for (int i = 0; i < 2 * turns_per_speaker; ++i) {
    c.utterances.push_back({i, i % 2 == 0 ? SpeakerSlot::kFirst : SpeakerSlot::kSecond,
                            fmt::format("line {} of dialogue {:016x}", i, tag)});
  }
  return c;
}

Corpus SyntheticCorpus(const CorpusSpec& spec) {
  Corpus corpus;
  for (const std::string& model : spec.models) {
    for (int i = 0; i < spec.per_model; ++i) {
      corpus.Add(MakeConversation(fmt::format("{}-{:04}", model, i), AgentId::Model(model)));
    }
  }
  for (int i = 0; i < spec.weak_conversations; ++i) {
    corpus.Add(MakeConversation(fmt::format("{}-{:04}", spec.weak_model, i),
                                AgentId::Model(spec.weak_model)));
  }
  for (int i = 0; i < spec.human_human; ++i) {
    corpus.Add(MakeConversation(fmt::format("hh-{:04}", i), AgentId::Human(),
                                Provenance::kHumanHuman));
  }
  return corpus;
}

RunSetup SyntheticSetup(const SetupSpec& spec) {
  const Corpus corpus = SyntheticCorpus(spec.corpus);
  const AgentId first = AgentId::Model(spec.corpus.models.at(0));
  ComparisonSpec comparison;
  comparison.agent_a = first;
  comparison.agent_b = spec.self_check ? first : AgentId::Model(spec.corpus.models.at(1));
  comparison.question_id = "engagingness";
  comparison.target_annotations = spec.target;
  comparison.self_check = spec.self_check;
  std::optional<QcSpec> qc;
  if (spec.qc) qc = QcSpec{AgentId::Model(spec.corpus.weak_model), "engagingness"};
  const auto questions = QuestionRegistry::WithBuiltins();
  Plan plan = BuildPlan(corpus, questions, {&comparison, 1}, spec.seed, spec.run_id, qc);
  RunConfig config;
  config.run_id = spec.run_id;
  config.policy = spec.policy;
  config.sync_events = false;
  return MakeRunSetup(std::move(config), std::move(plan), corpus, questions);
}

std::string WorkerName(int index) { return fmt::format("w{:05}", index); }

bool IsFraudulent(const Crowd& crowd, int worker_index) {
  const uint64_t h = Mix64(DeriveSeed(crowd.seed, 0x66726175ULL) ^ worker_index);
  return static_cast<double>(h >> 11) * 0x1.0p-53 < crowd.fraud_rate;
}

Side Decide(const Crowd& crowd, int worker_index, const Matchup& m) {
  const uint64_t h = Mix64(DeriveSeed(crowd.seed, HashString(m.matchup_id)) ^
                           Mix64(static_cast<uint64_t>(worker_index)));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  const bool fraud = IsFraudulent(crowd, worker_index);
  if (m.is_qc) {
    const Side gold = m.gold_side.value_or(Side::kLeft);
    return fraud ? OtherSide(gold) : gold;
  }
  if (fraud) return u < 0.5 ? Side::kLeft : Side::kRight;
  if (m.left_agent == crowd.preferred && m.right_agent != crowd.preferred) {
    return u < crowd.preference ? Side::kLeft : Side::kRight;
  }
  if (m.right_agent == crowd.preferred && m.left_agent != crowd.preferred) {
    return u < crowd.preference ? Side::kRight : Side::kLeft;
  }
  return u < 0.5 ? Side::kLeft : Side::kRight;
}

SimTrace DriveRun(Run& run, const Crowd& crowd,
                  const std::function<void(const SimStep&)>& on_step) {
  SimTrace trace;
  const Plan& plan = run.setup().plan;
  int step = 0;
  for (int w = 0; w < crowd.max_workers; ++w) {
    const RunStatus status = run.Status();
    if (status.remaining_matchups == 0 && status.active_assignments == 0) break;
    const std::string worker = WorkerName(w);
    ++trace.workers;
    for (;;) {
      if (on_step) on_step({step, SimStep::kFetch});
      ++step;
      auto task = run.FetchTask(worker);
      if (!task) break;
      trace.payloads.push_back(ToJson(*task).dump());
      const Matchup* m = plan.Find(task->matchup_id);
      if (m == nullptr) Fail(ErrorCode::kNotFound, "payload names an unknown matchup");
      SubmitRequest request;
      request.worker_id = worker;
      request.matchup_id = task->matchup_id;
      request.chosen_side = Decide(crowd, w, *m);
      request.justification = "seemed more engaging";
      request.elapsed_seconds = 30.0;
      if (on_step) on_step({step, SimStep::kSubmit});
      ++step;
      run.Submit(request);
    }
  }
  trace.steps = step;
  return trace;
}

}  // namespace acute::testing
