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

#ifndef ACUTE_RUN_H_
#define ACUTE_RUN_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "acute/annotation.h"
#include "acute/corpus.h"
#include "acute/event_log.h"
#include "acute/pairing.h"
#include "acute/questions.h"
#include "acute/stats.h"
#include "acute/workers.h"

namespace acute {

// Unix epoch milliseconds.
using Clock = std::function<int64_t()>;
Clock SystemClock();

inline constexpr std::string_view kEventLogName = "events.jsonl";

struct RunConfig {
  std::string run_id;
  AssignmentPolicy policy;
  double alpha = kDefaultAlpha;
  bool justification_required = false;
  bool sync_events = true;  // fdatasync every event
};

// Everything a run needs, self-contained so the event log alone can rebuild
// the run: the plan plus the conversations and questions it references.
struct RunSetup {
  RunConfig config;
  Plan plan;
  std::vector<Conversation> conversations;
  std::vector<Question> questions;  // empty = built-in registry
};

nlohmann::json ToJson(const RunConfig& config);
RunConfig RunConfigFromJson(const nlohmann::json& j);
nlohmann::json ToJson(const RunSetup& setup);
RunSetup RunSetupFromJson(const nlohmann::json& j);

// Keeps only the conversations the plan references.
RunSetup MakeRunSetup(RunConfig config, Plan plan, const Corpus& corpus,
                      const QuestionRegistry& questions);

enum class DisplayRole { kEvaluated, kPartner };

struct DisplayUtterance {
  DisplayRole role = DisplayRole::kPartner;
  std::string text;
};

struct TranscriptView {
  std::string speaker_label;  // "Speaker 1" (left) or "Speaker 2" (right)
  std::vector<DisplayUtterance> utterances;
};

// What an annotator sees. Carries no agent identity, conversation id or QC
// marker.
struct TaskPayload {
  std::string matchup_id;
  std::string prompt_text;
  std::string left_choice_text;
  std::string right_choice_text;
  TranscriptView left;
  TranscriptView right;
  bool justification_required = false;
};

nlohmann::json ToJson(const TaskPayload& payload);

struct SubmitRequest {
  std::string worker_id;
  std::string matchup_id;
  Side chosen_side = Side::kLeft;
  std::string justification;
  double elapsed_seconds = 0.0;
};

SubmitRequest SubmitRequestFromJson(const nlohmann::json& j);

struct RunStatus {
  std::string run_id;
  bool open = true;
  int matchups_total = 0;
  int matchups_completed = 0;
  int active_assignments = 0;
  int remaining_matchups = 0;
  int workers = 0;
  int annotations = 0;
  uint64_t last_seq = 0;
};

nlohmann::json ToJson(const RunStatus& status);

struct AaReportRow {
  int comparison = 0;
  AgentId agent;
  AaResult result;
};

struct RunReport {
  std::string run_id;
  WinMatrix matrix;
  GatingReport gating;
  std::vector<AaReportRow> aa_checks;
  std::vector<AgreementResult> agreement;  // pairs with >= 2 annotations
  RunStatus progress;
};

// Excludes timestamps, so equal event logs give byte-identical dumps.
nlohmann::json ToJson(const RunReport& report);

// Gating then per-comparison statistics; shared by live runs and offline
// analysis.
RunReport BuildReport(const Plan& plan, std::span<const Worker> workers,
                      std::span<const Annotation> annotations, double alpha,
                      RunStatus progress);

// One evaluation run: the plan, its assignment book and the event log that
// makes it durable. All mutations are serialized on an internal mutex, which
// makes FetchTask/Submit linearizable; Status and Report copy a snapshot
// under the lock and compute outside it.
class Run {
 public:
  // Creates `<root>/<run_id>/events.jsonl` with the setup as first record.
  // Throws kAlreadyExists for an existing run, kIo if the directory is not
  // writable, kInvalidArgument for an inconsistent setup.
  static std::unique_ptr<Run> Start(const std::filesystem::path& root,
                                    RunSetup setup, Clock clock = SystemClock());

  // Replays `<run_dir>/events.jsonl` and continues appending to it.
  static std::unique_ptr<Run> Open(const std::filesystem::path& run_dir,
                                   Clock clock = SystemClock());

  // Replays without opening the log for writing. Mutations throw.
  static std::unique_ptr<Run> Load(const std::filesystem::path& run_dir);

  // No persistence; for simulations.
  static std::unique_ptr<Run> InMemory(RunSetup setup, Clock clock = SystemClock());

  // Registers the worker on first contact. Returns nullopt when the worker
  // has nothing left to do. Throws kFailedPrecondition once closed.
  std::optional<TaskPayload> FetchTask(std::string_view worker_id);

  // Throws Error as AssignmentBook::RecordSubmission does.
  Annotation Submit(const SubmitRequest& request);

  // Appends the final gating decision and closes the plan. Idempotent.
  void Close();

  RunStatus Status() const;
  RunReport Report() const;

  const std::string& run_id() const { return setup_.config.run_id; }
  const RunSetup& setup() const { return setup_; }
  std::vector<Annotation> Annotations() const;
  std::vector<Worker> Workers() const;

 private:
  Run(RunSetup setup, Clock clock);

  void Persist(const Transition& t);
  void Replay(const std::vector<LogRecord>& records);
  TaskPayload MakePayload(const Matchup& m) const;
  RunStatus StatusLocked() const;

  RunSetup setup_;
  std::shared_ptr<const Plan> plan_;
  QuestionRegistry questions_;
  std::unordered_map<std::string, const Conversation*> conversations_;
  Clock clock_;
  std::optional<EventLog> log_;
  bool read_only_ = false;
  uint64_t last_seq_ = 0;

  mutable std::mutex mu_;
  AssignmentBook book_;
};

}  // namespace acute

#endif  // ACUTE_RUN_H_
