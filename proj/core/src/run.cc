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

#include "acute/run.h"

#include <chrono>
#include <set>
#include <system_error>

#include <fmt/format.h>

#include "acute/errors.h"

namespace acute {
namespace {

using nlohmann::json;

void CheckRunId(const std::string& run_id) {
  if (run_id.empty() || run_id == "." || run_id == "..") {
    Fail(ErrorCode::kInvalidArgument, "run_id must be a nonempty name");
  }
  for (char c : run_id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    if (!ok) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("run_id \"{}\" may only contain [A-Za-z0-9._-]", run_id));
    }
  }
}

std::string_view ToString(DisplayRole role) {
  return role == DisplayRole::kEvaluated ? "EVALUATED" : "PARTNER";
}

std::pair<std::string, json> Encode(const Transition& t) {
  if (const auto* r = std::get_if<WorkerRegistered>(&t)) {
    return {"worker_registered", {{"worker_id", r->worker_id}}};
  }
  if (const auto* a = std::get_if<MatchupAssigned>(&t)) {
    return {"assigned",
            {{"worker_id", a->worker_id},
             {"matchup_id", a->matchup_id},
             {"deadline_ms", a->deadline_ms}}};
  }
  if (const auto* e = std::get_if<AssignmentExpired>(&t)) {
    return {"expired", {{"worker_id", e->worker_id}, {"matchup_id", e->matchup_id}}};
  }
  if (const auto* s = std::get_if<AnnotationSubmitted>(&t)) {
    return {"annotation", s->annotation};
  }
  return {"closed", json::object()};
}

std::optional<Transition> Decode(const LogRecord& r) {
  const json& d = r.data;
  if (r.type == "worker_registered") {
    return WorkerRegistered{d.at("worker_id").get<std::string>()};
  }
  if (r.type == "assigned") {
    return MatchupAssigned{d.at("worker_id").get<std::string>(),
                           d.at("matchup_id").get<std::string>(),
                           d.at("deadline_ms").get<int64_t>()};
  }
  if (r.type == "expired") {
    return AssignmentExpired{d.at("worker_id").get<std::string>(),
                             d.at("matchup_id").get<std::string>()};
  }
  if (r.type == "annotation") return AnnotationSubmitted{d.get<Annotation>()};
  if (r.type == "closed") return PlanClosed{};
  if (r.type == "gating") return std::nullopt;
  Fail(ErrorCode::kDataLoss, fmt::format("unknown event type \"{}\" at seq {}", r.type, r.seq));
}

json ToJson(const TranscriptView& view) {
  json utterances = json::array();
  for (const DisplayUtterance& u : view.utterances) {
    utterances.push_back({{"role", ToString(u.role)}, {"text", u.text}});
  }
  return {{"speaker_label", view.speaker_label}, {"utterances", utterances}};
}

}  // namespace

Clock SystemClock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

json ToJson(const RunConfig& c) {
  return {{"run_id", c.run_id},
          {"worker_cap", c.policy.worker_cap},
          {"qc_per_worker", c.policy.qc_per_worker},
          {"assignment_timeout_ms", c.policy.assignment_timeout_ms},
          {"annotations_per_matchup", c.policy.annotations_per_matchup},
          {"alpha", c.alpha},
          {"justification_required", c.justification_required},
          {"sync_events", c.sync_events}};
}

RunConfig RunConfigFromJson(const json& j) {
  RunConfig c;
  c.run_id = j.value("run_id", std::string());
  c.policy.worker_cap = j.value("worker_cap", 0);
  c.policy.qc_per_worker = j.value("qc_per_worker", 1);
  c.policy.assignment_timeout_ms =
      j.value("assignment_timeout_ms", c.policy.assignment_timeout_ms);
  c.policy.annotations_per_matchup = j.value("annotations_per_matchup", 1);
  c.alpha = j.value("alpha", kDefaultAlpha);
  c.justification_required = j.value("justification_required", false);
  c.sync_events = j.value("sync_events", true);
  return c;
}

json ToJson(const RunSetup& s) {
  return {{"config", ToJson(s.config)},
          {"plan", s.plan},
          {"conversations", s.conversations},
          {"questions", s.questions}};
}

RunSetup RunSetupFromJson(const json& j) {
  RunSetup s;
  try {
    s.config = RunConfigFromJson(j.value("config", json::object()));
    s.plan = j.at("plan").get<Plan>();
    for (const json& c : j.value("conversations", json::array())) {
      s.conversations.push_back(ConversationFromJson(c));
    }
    s.questions = j.value("questions", json::array()).get<std::vector<Question>>();
  } catch (const json::exception& e) {
    Fail(ErrorCode::kInvalidArgument, fmt::format("malformed run setup: {}", e.what()));
  }
  return s;
}

RunSetup MakeRunSetup(RunConfig config, Plan plan, const Corpus& corpus,
                      const QuestionRegistry& questions) {
  RunSetup s;
  if (config.run_id.empty()) config.run_id = plan.run_id;
  plan.run_id = config.run_id;
  std::set<std::string> convs;
  std::set<std::string> question_ids;
  for (const auto* list : {&plan.matchups, &plan.qc_pool}) {
    for (const Matchup& m : *list) {
      convs.insert(m.left_conv);
      convs.insert(m.right_conv);
      question_ids.insert(m.question_id);
    }
  }
  for (const Conversation& c : corpus.conversations()) {
    if (convs.contains(c.conv_id)) s.conversations.push_back(c);
  }
  for (const Question& q : questions.all()) {
    if (question_ids.contains(q.question_id)) s.questions.push_back(q);
  }
  s.config = std::move(config);
  s.plan = std::move(plan);
  return s;
}

json ToJson(const TaskPayload& p) {
  return {{"matchup_id", p.matchup_id},
          {"prompt_text", p.prompt_text},
          {"choices", {{"LEFT", p.left_choice_text}, {"RIGHT", p.right_choice_text}}},
          {"left", ToJson(p.left)},
          {"right", ToJson(p.right)},
          {"justification_required", p.justification_required}};
}

SubmitRequest SubmitRequestFromJson(const json& j) {
  SubmitRequest r;
  try {
    r.worker_id = j.at("worker_id").get<std::string>();
    r.matchup_id = j.at("matchup_id").get<std::string>();
    r.chosen_side = ParseSide(j.at("chosen_side").get<std::string>());
    r.justification = j.value("justification", std::string());
    r.elapsed_seconds = j.value("elapsed_seconds", 0.0);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kInvalidArgument, fmt::format("malformed submission: {}", e.what()));
  }
  if (r.elapsed_seconds < 0) {
    Fail(ErrorCode::kInvalidArgument, "elapsed_seconds must be nonnegative");
  }
  return r;
}

json ToJson(const RunStatus& s) {
  return {{"run_id", s.run_id},
          {"open", s.open},
          {"matchups_total", s.matchups_total},
          {"matchups_completed", s.matchups_completed},
          {"active_assignments", s.active_assignments},
          {"remaining_matchups", s.remaining_matchups},
          {"workers", s.workers},
          {"annotations", s.annotations},
          {"last_seq", s.last_seq}};
}

json ToJson(const RunReport& r) {
  json aa = json::array();
  for (const AaReportRow& row : r.aa_checks) {
    aa.push_back({{"comparison", row.comparison},
                  {"agent", row.agent.Key()},
                  {"n", row.result.n},
                  {"left_wins", row.result.left_wins},
                  {"left_rate", row.result.left_rate},
                  {"p_value", row.result.p_value},
                  {"position_bias_warning", row.result.position_bias_warning}});
  }
  json agreement = json::array();
  for (const AgreementResult& a : r.agreement) {
    agreement.push_back({{"question", a.question_id},
                         {"conv_a", a.conv_a},
                         {"conv_b", a.conv_b},
                         {"n", a.n_annotations},
                         {"majority", a.majority_count},
                         {"agreement_rate", a.agreement_rate},
                         {"p_value", a.p_value},
                         {"significant", a.significant}});
  }
  return {{"run_id", r.run_id},
          {"win_matrix", ToJson(r.matrix)},
          {"gating", ToJson(r.gating)},
          {"aa_checks", aa},
          {"agreement", agreement},
          {"progress", ToJson(r.progress)}};
}

RunReport BuildReport(const Plan& plan, std::span<const Worker> workers,
                      std::span<const Annotation> annotations, double alpha,
                      RunStatus progress) {
  RunReport report;
  report.run_id = progress.run_id;
  report.gating = GateWorkers(workers, annotations, plan);

  std::unordered_map<std::string, int> comparison_of;
  for (const Matchup& m : plan.matchups) comparison_of.emplace(m.matchup_id, m.comparison);
  auto is_self = [&plan](int c) {
    return c >= 0 && static_cast<size_t>(c) < plan.comparisons.size() &&
           plan.comparisons[c].self_check;
  };

  std::vector<Annotation> pairwise;
  std::map<int, std::vector<Annotation>> self_checks;
  for (const Annotation& a : report.gating.surviving) {
    const int c = comparison_of.at(a.matchup_id);
    if (is_self(c)) {
      self_checks[c].push_back(a);
    } else {
      pairwise.push_back(a);
    }
  }
  report.matrix = ComputeWinMatrix(pairwise, plan, alpha);
  for (const auto& [c, group] : self_checks) {
    report.aa_checks.push_back({c, plan.comparisons[c].agent_a, AaCheck(group, plan, alpha)});
  }
  report.agreement = AgreementTable(pairwise, plan, 2, alpha);
  report.progress = std::move(progress);
  return report;
}

Run::Run(RunSetup setup, Clock clock)
    : setup_(std::move(setup)),
      plan_(std::make_shared<const Plan>(setup_.plan)),
      clock_(std::move(clock)),
      book_(plan_, setup_.config.policy) {
  CheckRunId(setup_.config.run_id);
  if (!clock_) clock_ = SystemClock();
  if (setup_.questions.empty()) {
    questions_ = QuestionRegistry::WithBuiltins();
  } else {
    for (const Question& q : setup_.questions) questions_.Register(q);
  }
  for (const Conversation& c : setup_.conversations) {
    const auto violations = ValidateConversation(c);
    if (!violations.empty()) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("conversation {} is invalid: {}", c.conv_id,
                       violations.front().invariant));
    }
    if (!conversations_.emplace(c.conv_id, &c).second) {
      Fail(ErrorCode::kInvalidArgument, fmt::format("duplicate conversation {}", c.conv_id));
    }
  }
  for (const auto* list : {&plan_->matchups, &plan_->qc_pool}) {
    for (const Matchup& m : *list) {
      for (const std::string* conv : {&m.left_conv, &m.right_conv}) {
        if (!conversations_.contains(*conv)) {
          Fail(ErrorCode::kInvalidArgument,
               fmt::format("matchup {} references missing conversation {}",
                           m.matchup_id, *conv));
        }
      }
      questions_.Get(m.question_id);
    }
  }
}

std::unique_ptr<Run> Run::Start(const std::filesystem::path& root, RunSetup setup,
                                Clock clock) {
  if (setup.config.run_id.empty()) setup.config.run_id = setup.plan.run_id;
  setup.plan.run_id = setup.config.run_id;
  std::unique_ptr<Run> run(new Run(std::move(setup), std::move(clock)));
  const std::filesystem::path dir = root / run->run_id();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    Fail(ErrorCode::kIo, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  }
  run->log_ = EventLog::Create(dir / kEventLogName, run->setup_.config.sync_events);
  run->last_seq_ = run->log_->Append("run_started", ToJson(run->setup_));
  return run;
}

namespace {

RunSetup SetupFromRecords(const std::vector<LogRecord>& records,
                          const std::filesystem::path& run_dir) {
  if (records.empty() || records.front().type != "run_started") {
    Fail(ErrorCode::kDataLoss,
         fmt::format("{} has no run_started record", run_dir.string()));
  }
  return RunSetupFromJson(records.front().data);
}

}  // namespace

std::unique_ptr<Run> Run::Open(const std::filesystem::path& run_dir, Clock clock) {
  std::vector<LogRecord> records;
  const std::filesystem::path path = run_dir / kEventLogName;
  if (!std::filesystem::exists(path)) {
    Fail(ErrorCode::kNotFound, fmt::format("no event log at {}", path.string()));
  }
  EventLog log = EventLog::Open(path, true, &records);
  RunSetup setup = SetupFromRecords(records, run_dir);
  const bool sync = setup.config.sync_events;
  std::unique_ptr<Run> run(new Run(std::move(setup), std::move(clock)));
  run->Replay(records);
  log = EventLog::Open(path, sync, nullptr);
  run->log_ = std::move(log);
  return run;
}

std::unique_ptr<Run> Run::Load(const std::filesystem::path& run_dir) {
  const std::filesystem::path path = run_dir / kEventLogName;
  if (!std::filesystem::exists(path)) {
    Fail(ErrorCode::kNotFound, fmt::format("no event log at {}", path.string()));
  }
  const auto records = EventLog::Read(path);
  std::unique_ptr<Run> run(new Run(SetupFromRecords(records, run_dir), SystemClock()));
  run->Replay(records);
  run->read_only_ = true;
  return run;
}

std::unique_ptr<Run> Run::InMemory(RunSetup setup, Clock clock) {
  if (setup.config.run_id.empty()) setup.config.run_id = setup.plan.run_id;
  if (setup.config.run_id.empty()) setup.config.run_id = "memory";
  setup.plan.run_id = setup.config.run_id;
  std::unique_ptr<Run> run(new Run(std::move(setup), std::move(clock)));
  run->last_seq_ = 1;  // the setup record a persisted run starts with
  return run;
}

void Run::Replay(const std::vector<LogRecord>& records) {
  for (size_t i = 1; i < records.size(); ++i) {
    try {
      if (auto t = Decode(records[i])) book_.Apply(*t);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      Fail(ErrorCode::kDataLoss,
           fmt::format("cannot replay seq {}: {}", records[i].seq, e.what()));
    }
  }
  last_seq_ = records.empty() ? 0 : records.back().seq;
}

void Run::Persist(const Transition& t) {
  if (read_only_) Fail(ErrorCode::kFailedPrecondition, "run was loaded read-only");
  auto [type, data] = Encode(t);
  last_seq_ = log_ ? log_->Append(type, data) : last_seq_ + 1;
}

TaskPayload Run::MakePayload(const Matchup& m) const {
  const Question& q = questions_.Get(m.question_id);
  TaskPayload p;
  p.matchup_id = m.matchup_id;
  p.prompt_text = q.prompt_text;
  p.left_choice_text = q.ChoiceText(1);
  p.right_choice_text = q.ChoiceText(2);
  p.justification_required = setup_.config.justification_required;
  auto transcript = [this](const std::string& conv_id, int number) {
    const Conversation& c = *conversations_.at(conv_id);
    TranscriptView view;
    view.speaker_label = fmt::format("Speaker {}", number);
    for (const Utterance& u : c.utterances) {
      view.utterances.push_back({u.speaker_slot == c.evaluated_slot
                                     ? DisplayRole::kEvaluated
                                     : DisplayRole::kPartner,
                                 u.text});
    }
    return view;
  };
  p.left = transcript(m.left_conv, 1);
  p.right = transcript(m.right_conv, 2);
  return p;
}

std::optional<TaskPayload> Run::FetchTask(std::string_view worker_id) {
  std::lock_guard lock(mu_);
  if (book_.closed()) Fail(ErrorCode::kFailedPrecondition, "run is closed");
  const TransitionHook hook = [this](const Transition& t) { Persist(t); };
  book_.Register(worker_id, hook);
  auto m = book_.NextAssignment(worker_id, clock_(), hook);
  if (!m) return std::nullopt;
  return MakePayload(*m);
}

Annotation Run::Submit(const SubmitRequest& request) {
  std::lock_guard lock(mu_);
  const TransitionHook hook = [this](const Transition& t) { Persist(t); };
  Annotation a;
  a.annotation_id = fmt::format("a{}", last_seq_ + 1);
  a.matchup_id = request.matchup_id;
  a.worker_id = request.worker_id;
  a.chosen_side = request.chosen_side;
  a.justification = request.justification;
  a.elapsed_seconds = request.elapsed_seconds;
  const int64_t now = clock_();
  a.submitted_at_ms = now;
  book_.RecordSubmission(std::move(a), now, hook);
  return book_.annotations().back();
}

void Run::Close() {
  std::lock_guard lock(mu_);
  if (book_.closed()) return;
  if (read_only_) Fail(ErrorCode::kFailedPrecondition, "run was loaded read-only");
  const GatingReport gating =
      GateWorkers(book_.workers(), book_.annotations(), *plan_);
  if (log_) {
    last_seq_ = log_->Append("gating", ToJson(gating));
  } else {
    ++last_seq_;
  }
  book_.Close([this](const Transition& t) { Persist(t); });
}

RunStatus Run::StatusLocked() const {
  RunStatus s;
  s.run_id = run_id();
  s.open = !book_.closed();
  s.matchups_total = static_cast<int>(plan_->matchups.size());
  s.matchups_completed = book_.completed_matchups();
  s.active_assignments = book_.active_assignments();
  s.remaining_matchups = book_.remaining_matchups();
  s.workers = static_cast<int>(book_.workers().size());
  s.annotations = static_cast<int>(book_.annotations().size());
  s.last_seq = last_seq_;
  return s;
}

RunStatus Run::Status() const {
  std::lock_guard lock(mu_);
  return StatusLocked();
}

RunReport Run::Report() const {
  std::vector<Worker> workers;
  std::vector<Annotation> annotations;
  RunStatus status;
  {
    std::lock_guard lock(mu_);
    workers = book_.workers();
    annotations = book_.annotations();
    status = StatusLocked();
  }
  return BuildReport(*plan_, workers, annotations, setup_.config.alpha, std::move(status));
}

std::vector<Annotation> Run::Annotations() const {
  std::lock_guard lock(mu_);
  return book_.annotations();
}

std::vector<Worker> Run::Workers() const {
  std::lock_guard lock(mu_);
  return book_.workers();
}

}  // namespace acute
