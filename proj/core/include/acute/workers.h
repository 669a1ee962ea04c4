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

#ifndef ACUTE_WORKERS_H_
#define ACUTE_WORKERS_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "acute/annotation.h"
#include "acute/pairing.h"

namespace acute {

enum class QcResult { kPending, kPassed, kFailed };
enum class RemovalReason { kQcFail, kNoReasons };

std::string_view ToString(QcResult result);
std::string_view ToString(RemovalReason reason);

struct Worker {
  std::string worker_id;
  std::vector<std::string> completed_matchups;  // submission order
  QcResult qc_result = QcResult::kPending;
  int reasons_given_count = 0;
  int cap = 1;  // non-QC annotations
  int qc_completed = 0;
  int registration_index = 0;

  int non_qc_completed() const {
    return static_cast<int>(completed_matchups.size()) - qc_completed;
  }
};

struct AssignmentPolicy {
  // Non-QC annotations per worker; 0 means "number of comparisons in the
  // plan", the default rule.
  int worker_cap = 0;
  int qc_per_worker = 1;
  int64_t assignment_timeout_ms = 30 * 60 * 1000;
  int annotations_per_matchup = 1;
};

struct Assignment {
  std::string worker_id;
  std::string matchup_id;
  int64_t deadline_ms = 0;
  bool is_qc = false;
};

// State transitions. Every mutation of an AssignmentBook is one of these, so
// a log of transitions replays to an identical book.
struct WorkerRegistered {
  std::string worker_id;
};
struct MatchupAssigned {
  std::string worker_id;
  std::string matchup_id;
  int64_t deadline_ms = 0;
};
struct AssignmentExpired {
  std::string worker_id;
  std::string matchup_id;
};
struct AnnotationSubmitted {
  Annotation annotation;
};
struct PlanClosed {};

using Transition = std::variant<WorkerRegistered, MatchupAssigned,
                                AssignmentExpired, AnnotationSubmitted, PlanClosed>;

// Invoked with each transition before it is applied. Throwing aborts the
// operation with the book unchanged by that transition.
using TransitionHook = std::function<void(const Transition&)>;

// Assignment and submission bookkeeping for one plan: QC-first ordering,
// per-worker caps, deadlines and duplicate detection. Not internally
// synchronized; callers serialize mutations.
class AssignmentBook {
 public:
  AssignmentBook(std::shared_ptr<const Plan> plan, AssignmentPolicy policy);

  const Plan& plan() const { return *plan_; }
  const AssignmentPolicy& policy() const { return policy_; }
  int effective_cap() const { return cap_; }
  bool closed() const { return closed_; }

  // No-op for a known worker.
  void Register(std::string_view worker_id, const TransitionHook& hook = {});

  // QC matchup first, then unassigned non-QC matchups in plan order up to the
  // cap. A worker holding an unexpired assignment gets it again. Expired
  // assignments (of any worker) are returned to the pool first. Throws
  // kNotFound for an unknown worker and kFailedPrecondition once closed.
  std::optional<Matchup> NextAssignment(std::string_view worker_id, int64_t now_ms,
                                        const TransitionHook& hook = {});

  // Validates and applies a submission. chosen_agent is filled from the
  // matchup when empty. Throws kFailedPrecondition (not assigned / closed),
  // kAlreadyExists (duplicate), kDeadlineExceeded (late; the matchup returns
  // to the pool), kNotFound (unknown worker or matchup) and kInvalidArgument
  // (chosen_agent inconsistent with the side).
  const Worker& RecordSubmission(Annotation annotation, int64_t now_ms,
                                 const TransitionHook& hook = {});

  void Close(const TransitionHook& hook = {});

  // Applies a transition without validation (replay path).
  void Apply(const Transition& t);

  const Worker* FindWorker(std::string_view worker_id) const;
  const std::vector<Worker>& workers() const { return workers_; }
  const std::vector<Annotation>& annotations() const { return annotations_; }
  std::optional<Assignment> Outstanding(std::string_view worker_id) const;
  std::vector<Assignment> ExpiredAt(int64_t now_ms) const;

  int completed_matchups() const;  // non-QC matchups with all annotations in
  int active_assignments() const;
  int remaining_matchups() const;  // non-QC matchups with free slots

 private:
  struct MatchupState {
    std::map<std::string, int64_t> active;  // worker -> deadline
    std::set<std::string> completed_by;
  };
  struct WorkerState {
    std::optional<Assignment> outstanding;
    std::set<std::string> seen;
  };

  void Emit(const Transition& t, const TransitionHook& hook);
  const Matchup* Choose(const Worker& worker, const WorkerState& state) const;
  Worker& MutableWorker(std::string_view worker_id);
  const Matchup& MatchupOrThrow(std::string_view matchup_id) const;

  std::shared_ptr<const Plan> plan_;
  AssignmentPolicy policy_;
  int cap_ = 1;
  bool closed_ = false;
  std::unordered_map<std::string, const Matchup*> matchup_index_;
  std::unordered_map<std::string, MatchupState> matchup_state_;
  std::vector<Worker> workers_;
  std::unordered_map<std::string, size_t> worker_index_;
  std::vector<WorkerState> worker_state_;
  std::vector<Annotation> annotations_;
  size_t first_open_ = 0;  // plan.matchups before this index are saturated
};

struct GatingReport {
  std::map<std::string, RemovalReason> removed_workers;
  std::vector<Annotation> surviving;  // non-QC annotations of kept workers
  int surviving_count = 0;
  int removed_count = 0;      // non-QC annotations of removed workers
  int qc_excluded_count = 0;  // QC annotations, always excluded

  friend bool operator==(const GatingReport&, const GatingReport&) = default;
};

// Removes every annotation of workers who failed QC or never gave a
// justification, and every QC annotation. Pure.
GatingReport GateWorkers(std::span<const Worker> workers,
                         std::span<const Annotation> annotations, const Plan& plan);

void WriteGatingTsv(std::ostream& out, std::span<const Worker> workers,
                    const GatingReport& report);

nlohmann::json ToJson(const GatingReport& report);

}  // namespace acute

#endif  // ACUTE_WORKERS_H_
