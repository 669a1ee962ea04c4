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

#ifndef ACUTE_TESTS_SUPPORT_FIXTURES_H_
#define ACUTE_TESTS_SUPPORT_FIXTURES_H_

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "acute/corpus.h"
#include "acute/pairing.h"
#include "acute/run.h"

namespace acute::testing {

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Alternating FIRST/SECOND utterances; texts are unique per conversation and
// never contain agent names.
Conversation MakeConversation(const std::string& conv_id, const AgentId& evaluated,
                              Provenance provenance = Provenance::kHumanModel,
                              int turns_per_speaker = 3,
                              SpeakerSlot evaluated_slot = SpeakerSlot::kFirst);

struct CorpusSpec {
  std::vector<std::string> models = {"polyencoder_v7", "kvmemnet_x2"};
  int per_model = 100;
  std::string weak_model;  // adds HUMAN_MODEL logs for QC when nonempty
  int weak_conversations = 0;
  int human_human = 0;
};

Corpus SyntheticCorpus(const CorpusSpec& spec);

struct SetupSpec {
  CorpusSpec corpus;
  int target = 100;
  uint64_t seed = 1;
  std::string run_id = "sim";
  bool qc = true;           // needs corpus.weak_model and human_human logs
  bool self_check = false;  // models[0] against itself
  AssignmentPolicy policy;
};

// First model against the second (or itself) on engagingness.
RunSetup SyntheticSetup(const SetupSpec& spec);

class FakeClock {
 public:
  explicit FakeClock(int64_t start_ms = 1'700'000'000'000)
      : now_(std::make_shared<std::atomic<int64_t>>(start_ms)) {}

  Clock clock() const {
    return [now = now_] { return now->load(); };
  }
  void Advance(int64_t ms) { *now_ += ms; }
  int64_t now() const { return *now_; }

 private:
  std::shared_ptr<std::atomic<int64_t>> now_;
};

// Synthetic annotators. Honest workers pass QC, prefer `preferred` with
// probability `preference` and always justify; fraudulent workers always
// pick the weak-baseline side of a QC matchup and choose at random
// elsewhere. Decisions depend only on (seed, worker, matchup).
struct Crowd {
  uint64_t seed = 0;
  AgentId preferred;
  double preference = 0.5;
  double fraud_rate = 0.0;
  int max_workers = 100000;
};

std::string WorkerName(int index);
bool IsFraudulent(const Crowd& crowd, int worker_index);
Side Decide(const Crowd& crowd, int worker_index, const Matchup& m);

// One simulated action on a run, for crash-point selection.
struct SimStep {
  int index = 0;
  enum Kind { kFetch, kSubmit } kind = kFetch;
};

struct SimTrace {
  int steps = 0;
  int workers = 0;
  std::vector<std::string> payloads;  // serialized TaskPayloads
};

// Registers workers in order until the plan has no free matchup. Re-running
// on a recovered run resumes where the log stopped: finished workers get no
// task and a worker holding an assignment receives it again.
SimTrace DriveRun(Run& run, const Crowd& crowd,
                  const std::function<void(const SimStep&)>& on_step = {});

}  // namespace acute::testing

#endif  // ACUTE_TESTS_SUPPORT_FIXTURES_H_
