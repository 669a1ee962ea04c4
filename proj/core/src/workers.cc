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

#include "acute/workers.h"

#include <algorithm>
#include <ostream>
#include <unordered_map>

#include <fmt/format.h>

#include "acute/errors.h"

namespace acute {

std::string_view ToString(QcResult result) {
  switch (result) {
    case QcResult::kPending:
      return "PENDING";
    case QcResult::kPassed:
      return "PASSED";
    case QcResult::kFailed:
      return "FAILED";
  }
  return "PENDING";
}

std::string_view ToString(RemovalReason reason) {
  return reason == RemovalReason::kQcFail ? "QC_FAIL" : "NO_REASONS";
}

AssignmentBook::AssignmentBook(std::shared_ptr<const Plan> plan,
                               AssignmentPolicy policy)
    : plan_(std::move(plan)), policy_(policy) {
  if (!plan_) Fail(ErrorCode::kInvalidArgument, "null plan");
  if (policy_.annotations_per_matchup < 1 || policy_.qc_per_worker < 0 ||
      policy_.worker_cap < 0 || policy_.assignment_timeout_ms <= 0) {
    Fail(ErrorCode::kInvalidArgument, "invalid assignment policy");
  }
  cap_ = policy_.worker_cap > 0
             ? policy_.worker_cap
             : std::max<int>(1, static_cast<int>(plan_->comparisons.size()));
  for (const auto* list : {&plan_->matchups, &plan_->qc_pool}) {
    for (const Matchup& m : *list) matchup_index_.emplace(m.matchup_id, &m);
  }
}

void AssignmentBook::Emit(const Transition& t, const TransitionHook& hook) {
  if (hook) hook(t);
  Apply(t);
}

void AssignmentBook::Register(std::string_view worker_id,
                              const TransitionHook& hook) {
  if (worker_id.empty()) Fail(ErrorCode::kInvalidArgument, "empty worker id");
  if (FindWorker(worker_id) != nullptr) return;
  Emit(WorkerRegistered{std::string(worker_id)}, hook);
}

const Worker* AssignmentBook::FindWorker(std::string_view worker_id) const {
  auto it = worker_index_.find(std::string(worker_id));
  return it == worker_index_.end() ? nullptr : &workers_[it->second];
}

Worker& AssignmentBook::MutableWorker(std::string_view worker_id) {
  auto it = worker_index_.find(std::string(worker_id));
  if (it == worker_index_.end()) {
    Fail(ErrorCode::kNotFound, fmt::format("unknown worker \"{}\"", worker_id));
  }
  return workers_[it->second];
}

const Matchup& AssignmentBook::MatchupOrThrow(std::string_view matchup_id) const {
  auto it = matchup_index_.find(std::string(matchup_id));
  if (it == matchup_index_.end()) {
    Fail(ErrorCode::kNotFound, fmt::format("unknown matchup \"{}\"", matchup_id));
  }
  return *it->second;
}

std::optional<Assignment> AssignmentBook::Outstanding(
    std::string_view worker_id) const {
  auto it = worker_index_.find(std::string(worker_id));
  if (it == worker_index_.end()) return std::nullopt;
  return worker_state_[it->second].outstanding;
}

std::vector<Assignment> AssignmentBook::ExpiredAt(int64_t now_ms) const {
  std::vector<Assignment> out;
  for (const WorkerState& s : worker_state_) {
    if (s.outstanding && now_ms > s.outstanding->deadline_ms) {
      out.push_back(*s.outstanding);
    }
  }
  return out;
}

const Matchup* AssignmentBook::Choose(const Worker& worker,
                                      const WorkerState& state) const {
  const auto& qc_pool = plan_->qc_pool;
  if (!qc_pool.empty() && worker.qc_completed < policy_.qc_per_worker) {
    const size_t slot = static_cast<size_t>(worker.registration_index) *
                            static_cast<size_t>(policy_.qc_per_worker) +
                        static_cast<size_t>(worker.qc_completed);
    return &qc_pool[slot % qc_pool.size()];
  }
  if (worker.non_qc_completed() >= cap_) return nullptr;

  const size_t limit = static_cast<size_t>(policy_.annotations_per_matchup);
  const auto& matchups = plan_->matchups;
  for (size_t i = first_open_; i < matchups.size(); ++i) {
    const Matchup& m = matchups[i];
    auto it = matchup_state_.find(m.matchup_id);
    if (it != matchup_state_.end()) {
      const MatchupState& ms = it->second;
      if (ms.active.size() + ms.completed_by.size() >= limit) continue;
      if (ms.completed_by.contains(worker.worker_id)) continue;
    }
    if (state.seen.contains(m.matchup_id)) continue;
    return &m;
  }
  return nullptr;
}

std::optional<Matchup> AssignmentBook::NextAssignment(std::string_view worker_id,
                                                      int64_t now_ms,
                                                      const TransitionHook& hook) {
  if (closed_) Fail(ErrorCode::kFailedPrecondition, "plan closed");
  const Worker& worker = MutableWorker(worker_id);
  for (const Assignment& a : ExpiredAt(now_ms)) {
    Emit(AssignmentExpired{a.worker_id, a.matchup_id}, hook);
  }
  const size_t index = worker_index_.at(worker.worker_id);
  if (const auto& held = worker_state_[index].outstanding) {
    return MatchupOrThrow(held->matchup_id);
  }
  const Matchup* next = Choose(worker, worker_state_[index]);
  if (next == nullptr) return std::nullopt;
  Emit(MatchupAssigned{worker.worker_id, next->matchup_id,
                       now_ms + policy_.assignment_timeout_ms},
       hook);
  return *next;
}

const Worker& AssignmentBook::RecordSubmission(Annotation annotation,
                                               int64_t now_ms,
                                               const TransitionHook& hook) {
  if (closed_) Fail(ErrorCode::kFailedPrecondition, "plan closed");
  const Worker& worker = MutableWorker(annotation.worker_id);
  const Matchup& matchup = MatchupOrThrow(annotation.matchup_id);
  const auto& done = worker.completed_matchups;
  if (std::find(done.begin(), done.end(), matchup.matchup_id) != done.end()) {
    Fail(ErrorCode::kAlreadyExists,
         fmt::format("duplicate submission by \"{}\" for matchup {}",
                     worker.worker_id, matchup.matchup_id));
  }
  const WorkerState& state = worker_state_[worker_index_.at(worker.worker_id)];
  if (!state.outstanding || state.outstanding->matchup_id != matchup.matchup_id) {
    if (state.seen.contains(matchup.matchup_id)) {
      Fail(ErrorCode::kDeadlineExceeded,
           fmt::format("assignment of matchup {} to \"{}\" expired",
                       matchup.matchup_id, worker.worker_id));
    }
    Fail(ErrorCode::kFailedPrecondition,
         fmt::format("matchup {} is not assigned to \"{}\"", matchup.matchup_id,
                     worker.worker_id));
  }
  if (now_ms > state.outstanding->deadline_ms) {
    Emit(AssignmentExpired{worker.worker_id, matchup.matchup_id}, hook);
    Fail(ErrorCode::kDeadlineExceeded,
         fmt::format("submission for matchup {} arrived after its deadline",
                     matchup.matchup_id));
  }
  const AgentId& expected = matchup.AgentOn(annotation.chosen_side);
  if (annotation.chosen_agent.name.empty()) {
    annotation.chosen_agent = expected;
  } else if (annotation.chosen_agent != expected) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("chosen_agent {} is not on side {}",
                     annotation.chosen_agent.Key(), ToString(annotation.chosen_side)));
  }
  if (annotation.elapsed_seconds < 0) {
    Fail(ErrorCode::kInvalidArgument, "elapsed_seconds must be nonnegative");
  }
  const std::string worker_id = worker.worker_id;
  Emit(AnnotationSubmitted{std::move(annotation)}, hook);
  return *FindWorker(worker_id);
}

void AssignmentBook::Close(const TransitionHook& hook) {
  if (closed_) return;
  Emit(PlanClosed{}, hook);
}

void AssignmentBook::Apply(const Transition& t) {
  const size_t limit = static_cast<size_t>(policy_.annotations_per_matchup);
  auto saturated = [&](const Matchup& m) {
    auto it = matchup_state_.find(m.matchup_id);
    return it != matchup_state_.end() &&
           it->second.active.size() + it->second.completed_by.size() >= limit;
  };
  auto advance = [&] {
    while (first_open_ < plan_->matchups.size() &&
           saturated(plan_->matchups[first_open_])) {
      ++first_open_;
    }
  };

  if (const auto* reg = std::get_if<WorkerRegistered>(&t)) {
    if (FindWorker(reg->worker_id) != nullptr) return;
    Worker w;
    w.worker_id = reg->worker_id;
    w.cap = cap_;
    w.registration_index = static_cast<int>(workers_.size());
    worker_index_.emplace(w.worker_id, workers_.size());
    workers_.push_back(std::move(w));
    worker_state_.emplace_back();
  } else if (const auto* as = std::get_if<MatchupAssigned>(&t)) {
    const Matchup& m = MatchupOrThrow(as->matchup_id);
    WorkerState& s = worker_state_[worker_index_.at(as->worker_id)];
    s.outstanding = Assignment{as->worker_id, as->matchup_id, as->deadline_ms, m.is_qc};
    s.seen.insert(as->matchup_id);
    if (!m.is_qc) {
      matchup_state_[m.matchup_id].active[as->worker_id] = as->deadline_ms;
      advance();
    }
  } else if (const auto* ex = std::get_if<AssignmentExpired>(&t)) {
    WorkerState& s = worker_state_[worker_index_.at(ex->worker_id)];
    if (s.outstanding && s.outstanding->matchup_id == ex->matchup_id) {
      s.outstanding.reset();
    }
    auto it = matchup_state_.find(ex->matchup_id);
    if (it != matchup_state_.end() && it->second.active.erase(ex->worker_id) > 0) {
      const auto& ms = plan_->matchups;
      for (size_t i = 0; i < std::min(first_open_, ms.size()); ++i) {
        if (ms[i].matchup_id == ex->matchup_id) {
          first_open_ = i;
          break;
        }
      }
    }
  } else if (const auto* sub = std::get_if<AnnotationSubmitted>(&t)) {
    const Annotation& a = sub->annotation;
    const Matchup& m = MatchupOrThrow(a.matchup_id);
    const size_t index = worker_index_.at(a.worker_id);
    Worker& w = workers_[index];
    WorkerState& s = worker_state_[index];
    w.completed_matchups.push_back(a.matchup_id);
    if (!Trim(a.justification).empty()) ++w.reasons_given_count;
    if (m.is_qc) {
      ++w.qc_completed;
      if (m.gold_side && a.chosen_side != *m.gold_side) {
        w.qc_result = QcResult::kFailed;
      } else if (w.qc_result == QcResult::kPending) {
        w.qc_result = QcResult::kPassed;
      }
    } else {
      MatchupState& ms = matchup_state_[m.matchup_id];
      ms.active.erase(a.worker_id);
      ms.completed_by.insert(a.worker_id);
    }
    if (s.outstanding && s.outstanding->matchup_id == a.matchup_id) {
      s.outstanding.reset();
    }
    annotations_.push_back(a);
    advance();
  } else if (std::holds_alternative<PlanClosed>(t)) {
    closed_ = true;
  }
}

int AssignmentBook::completed_matchups() const {
  const size_t limit = static_cast<size_t>(policy_.annotations_per_matchup);
  int n = 0;
  for (const Matchup& m : plan_->matchups) {
    auto it = matchup_state_.find(m.matchup_id);
    if (it != matchup_state_.end() && it->second.completed_by.size() >= limit) ++n;
  }
  return n;
}

int AssignmentBook::active_assignments() const {
  int n = 0;
  for (const WorkerState& s : worker_state_) n += s.outstanding ? 1 : 0;
  return n;
}

int AssignmentBook::remaining_matchups() const {
  const size_t limit = static_cast<size_t>(policy_.annotations_per_matchup);
  int n = 0;
  for (const Matchup& m : plan_->matchups) {
    auto it = matchup_state_.find(m.matchup_id);
    if (it == matchup_state_.end() ||
        it->second.active.size() + it->second.completed_by.size() < limit) {
      ++n;
    }
  }
  return n;
}

GatingReport GateWorkers(std::span<const Worker> workers,
                         std::span<const Annotation> annotations,
                         const Plan& plan) {
  std::unordered_map<std::string, const Matchup*> index;
  for (const auto* list : {&plan.matchups, &plan.qc_pool}) {
    for (const Matchup& m : *list) index.emplace(m.matchup_id, &m);
  }

  GatingReport report;
  for (const Worker& w : workers) {
    if (w.qc_result == QcResult::kFailed) {
      report.removed_workers.emplace(w.worker_id, RemovalReason::kQcFail);
    } else if (w.reasons_given_count == 0 && !w.completed_matchups.empty()) {
      report.removed_workers.emplace(w.worker_id, RemovalReason::kNoReasons);
    }
  }
  for (const Annotation& a : annotations) {
    auto it = index.find(a.matchup_id);
    if (it == index.end()) {
      Fail(ErrorCode::kNotFound,
           fmt::format("annotation {} references unknown matchup {}",
                       a.annotation_id, a.matchup_id));
    }
    if (it->second->is_qc) {
      ++report.qc_excluded_count;
    } else if (report.removed_workers.contains(a.worker_id)) {
      ++report.removed_count;
    } else {
      ++report.surviving_count;
      report.surviving.push_back(a);
    }
  }
  return report;
}

void WriteGatingTsv(std::ostream& out, std::span<const Worker> workers,
                    const GatingReport& report) {
  out << "worker_id\tcompleted\tnon_qc_completed\tqc_result\treasons_given\t"
         "removed\treason\n";
  for (const Worker& w : workers) {
    auto it = report.removed_workers.find(w.worker_id);
    const bool removed = it != report.removed_workers.end();
    out << fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", w.worker_id,
                       w.completed_matchups.size(), w.non_qc_completed(),
                       ToString(w.qc_result), w.reasons_given_count, removed,
                       removed ? ToString(it->second) : "");
  }
}

nlohmann::json ToJson(const GatingReport& report) {
  nlohmann::json removed = nlohmann::json::object();
  for (const auto& [worker, reason] : report.removed_workers) {
    removed[worker] = ToString(reason);
  }
  return {{"removed_workers", removed},
          {"surviving_count", report.surviving_count},
          {"removed_count", report.removed_count},
          {"qc_excluded_count", report.qc_excluded_count}};
}

}  // namespace acute
