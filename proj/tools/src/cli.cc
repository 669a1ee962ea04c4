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

#include "acute_cli/cli.h"

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "acute/corpus.h"
#include "acute/http_service.h"
#include "acute/questions.h"
#include "acute/workers.h"

namespace acute::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

[[noreturn]] void BadConfig(const std::string& message) {
  Fail(ErrorCode::kInvalidArgument, fmt::format("config: {}", message));
}

void CheckKeys(const json& j, std::string_view where,
               std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) BadConfig(fmt::format("{} must be an object", where));
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      BadConfig(fmt::format("unknown key \"{}\" in {}", key, where));
    }
  }
}

AgentId AgentFromJson(const json& j) {
  if (j.is_string()) return AgentId::FromKey(j.get<std::string>());
  return j.get<AgentId>();
}

ComparisonSpec ComparisonFromJson(const json& j) {
  CheckKeys(j, "comparison",
            {"agent_a", "agent_b", "question", "target", "target_annotations",
             "provenance", "self_check"});
  ComparisonSpec s;
  s.agent_a = AgentFromJson(j.at("agent_a"));
  s.self_check = j.value("self_check", false);
  s.agent_b = j.contains("agent_b") ? AgentFromJson(j.at("agent_b")) : s.agent_a;
  s.question_id = j.value("question", std::string("engagingness"));
  s.target_annotations =
      j.contains("target") ? j.at("target").get<int>() : j.value("target_annotations", 100);
  s.provenance = ParseProvenance(j.value("provenance", std::string("HUMAN_MODEL")));
  return s;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json ReadJsonFile(const fs::path& path) {
  json j = json::parse(ReadFile(path), nullptr, false);
  if (j.is_discarded()) {
    Fail(ErrorCode::kInvalidArgument, fmt::format("{} is not valid JSON", path.string()));
  }
  return j;
}

std::vector<std::string> ReadLines(const fs::path& path) {
  std::istringstream in(ReadFile(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    std::string_view t = Trim(line);
    if (!t.empty()) lines.emplace_back(t);
  }
  return lines;
}

QuestionRegistry LoadRegistry(const CliConfig& config) {
  QuestionRegistry registry = QuestionRegistry::WithBuiltins();
  if (!config.questions_file.empty()) LoadQuestionFile(config.questions_file, registry);
  return registry;
}

template <typename F>
std::string Render(F write) {
  std::ostringstream out;
  write(out);
  return out.str();
}

std::string JsonLines(const std::vector<json>& records) {
  std::string s;
  for (const json& r : records) {
    s += r.dump();
    s += '\n';
  }
  return s;
}

}  // namespace

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kNotFound:
    case ErrorCode::kAlreadyExists:
    case ErrorCode::kFailedPrecondition:
    case ErrorCode::kDataLoss:
      return kExitData;
    case ErrorCode::kDeadlineExceeded:
    case ErrorCode::kUnavailable:
    case ErrorCode::kIo:
      return kExitRuntime;
  }
  return kExitRuntime;
}

CliConfig ConfigFromJson(const json& j) {
  CheckKeys(j, "config",
            {"run_id", "seed", "alpha", "questions_file", "comparisons", "qc",
             "worker_cap", "qc_per_worker", "assignment_timeout_ms",
             "annotations_per_matchup", "justification_required", "bootstrap",
             "seconds_per_annotation", "endpoint", "selfchat"});
  CliConfig c;
  try {
    c.run_id = j.value("run_id", c.run_id);
    c.seed = j.value("seed", c.seed);
    c.alpha = j.value("alpha", c.alpha);
    c.questions_file = j.value("questions_file", c.questions_file);
    for (const json& spec : j.value("comparisons", json::array())) {
      c.comparisons.push_back(ComparisonFromJson(spec));
    }
    if (j.contains("qc")) {
      const json& qc = j.at("qc");
      CheckKeys(qc, "qc", {"weak_agent", "question"});
      c.qc = QcSpec{AgentFromJson(qc.at("weak_agent")),
                    qc.value("question", std::string("engagingness"))};
    }
    c.policy.worker_cap = j.value("worker_cap", c.policy.worker_cap);
    c.policy.qc_per_worker = j.value("qc_per_worker", c.policy.qc_per_worker);
    c.policy.assignment_timeout_ms =
        j.value("assignment_timeout_ms", c.policy.assignment_timeout_ms);
    c.policy.annotations_per_matchup =
        j.value("annotations_per_matchup", c.policy.annotations_per_matchup);
    c.justification_required = j.value("justification_required", false);
    if (j.contains("bootstrap")) {
      const json& b = j.at("bootstrap");
      CheckKeys(b, "bootstrap", {"k", "trials", "seed", "unit", "threads"});
      if (b.contains("k")) c.bootstrap.sample_sizes = b.at("k").get<std::vector<int>>();
      c.bootstrap.trials = b.value("trials", c.bootstrap.trials);
      c.bootstrap.seed = b.value("seed", c.bootstrap.seed);
      c.bootstrap.threads = b.value("threads", c.bootstrap.threads);
      if (b.contains("unit")) {
        c.bootstrap.unit = ParseResampleUnit(b.at("unit").get<std::string>());
      }
    }
    c.seconds_per_annotation = j.value("seconds_per_annotation", 0.0);
    if (j.contains("endpoint")) {
      const json& e = j.at("endpoint");
      CheckKeys(e, "endpoint", {"agent", "transport", "address", "timeout_ms", "max_retries"});
      ModelEndpoint ep;
      ep.agent = AgentFromJson(e.at("agent"));
      ep.transport = ParseTransport(e.value("transport", std::string("HTTP")));
      ep.address = e.at("address").get<std::string>();
      ep.timeout = std::chrono::milliseconds(e.value("timeout_ms", int64_t{30000}));
      ep.max_retries = e.value("max_retries", ep.max_retries);
      c.endpoint = ep;
    }
    if (j.contains("selfchat")) {
      const json& s = j.at("selfchat");
      CheckKeys(s, "selfchat",
                {"num_conversations", "min_turns", "max_turns", "contexts_file",
                 "parallelism", "task"});
      c.selfchat.num_conversations = s.value("num_conversations", c.selfchat.num_conversations);
      c.selfchat.min_turns_per_speaker = s.value("min_turns", c.selfchat.min_turns_per_speaker);
      c.selfchat.max_turns_per_speaker = s.value("max_turns", c.selfchat.max_turns_per_speaker);
      c.selfchat.contexts_file = s.value("contexts_file", c.selfchat.contexts_file);
      c.selfchat.parallelism = s.value("parallelism", c.selfchat.parallelism);
      c.selfchat.task = s.value("task", c.selfchat.task);
    }
  } catch (const json::exception& e) {
    BadConfig(e.what());
  }
  return c;
}

CliConfig LoadConfigFile(const fs::path& path) {
  return ConfigFromJson(ReadJsonFile(path));
}

void ValidateConfig(const CliConfig& c) {
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) BadConfig("alpha must lie in (0, 1)");
  if (c.policy.worker_cap < 0) BadConfig("worker_cap must be >= 0");
  if (c.policy.qc_per_worker < 0) BadConfig("qc_per_worker must be >= 0");
  if (c.policy.assignment_timeout_ms <= 0) BadConfig("assignment_timeout_ms must be > 0");
  if (c.policy.annotations_per_matchup < 1) BadConfig("annotations_per_matchup must be >= 1");
  if (c.bootstrap.trials < 1) BadConfig("bootstrap trials must be >= 1");
  for (int k : c.bootstrap.sample_sizes) {
    if (k < 1) BadConfig("bootstrap k values must be >= 1");
  }
  if (c.seconds_per_annotation < 0) BadConfig("seconds_per_annotation must be >= 0");
  for (const ComparisonSpec& s : c.comparisons) {
    if (s.target_annotations < 1) BadConfig("comparison target must be >= 1");
  }
  if (!c.questions_file.empty() && !fs::exists(c.questions_file)) {
    Fail(ErrorCode::kNotFound, fmt::format("questions file {} not found", c.questions_file));
  }
}

void WriteFileAtomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) Fail(ErrorCode::kIo, fmt::format("cannot write {}", tmp.string()));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) Fail(ErrorCode::kIo, fmt::format("cannot write {}: {}", path.string(), ec.message()));
}

fs::path ResolveRunDir(const fs::path& dir, const std::string& run_id) {
  if (fs::exists(dir / kEventLogName)) return dir;
  if (!run_id.empty() && fs::exists(dir / run_id / kEventLogName)) return dir / run_id;
  if (run_id.empty() && fs::is_directory(dir)) {
    std::vector<fs::path> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && fs::exists(entry.path() / kEventLogName)) {
        found.push_back(entry.path());
      }
    }
    if (found.size() == 1) return found.front();
    if (found.size() > 1) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("{} holds several runs; pass --run-id", dir.string()));
    }
  }
  Fail(ErrorCode::kNotFound, fmt::format("no run found under {}", dir.string()));
}

void CmdIngest(const IngestOptions& o, std::ostream& out) {
  std::vector<std::pair<fs::path, Provenance>> inputs;
  for (const auto& f : o.files) inputs.emplace_back(f, o.provenance);
  for (const auto& f : o.self_chat_files) inputs.emplace_back(f, Provenance::kSelfChat);
  for (const auto& f : o.human_human_files) inputs.emplace_back(f, Provenance::kHumanHuman);
  if (inputs.empty()) Fail(ErrorCode::kInvalidArgument, "no input files");

  Corpus corpus;
  std::string rejects = "file\tline\treason\n";
  int reject_count = 0;
  for (const auto& [path, provenance] : inputs) {
    ParseResult parsed = ParseLogFile(path, provenance);
    corpus.Merge(parsed.corpus);
    for (const ParseReject& r : parsed.rejects) {
      rejects += fmt::format("{}\t{}\t{}\n", path.string(), r.line, r.reason);
      ++reject_count;
    }
  }

  std::map<std::pair<std::string, std::string>, int> counts;
  for (const Conversation& c : corpus.conversations()) {
    ++counts[{c.evaluated_agent.Key(), std::string(ToString(c.provenance))}];
  }
  std::string summary = "agent\tprovenance\tconversations\n";
  for (const auto& [key, n] : counts) {
    summary += fmt::format("{}\t{}\t{}\n", key.first, key.second, n);
  }

  fs::create_directories(o.run_dir);
  WriteFileAtomic(o.run_dir / kCorpusFile, Render([&](std::ostream& s) { WriteLog(s, corpus); }));
  WriteFileAtomic(o.run_dir / "ingest_summary.tsv", summary);
  WriteFileAtomic(o.run_dir / "ingest_rejects.tsv", rejects);
  out << summary;
  out << fmt::format("{} conversations, {} rejected lines\n", corpus.size(), reject_count);
}

void CmdPlan(const PlanOptions& o, std::ostream& out) {
  ValidateConfig(o.config);
  if (o.config.comparisons.empty()) {
    Fail(ErrorCode::kInvalidArgument, "config has no comparisons");
  }
  const fs::path corpus_path = o.corpus.empty() ? o.run_dir / kCorpusFile : o.corpus;
  if (!fs::exists(corpus_path)) {
    Fail(ErrorCode::kNotFound,
         fmt::format("corpus {} not found; run ingest first", corpus_path.string()));
  }
  const Corpus corpus = ParseLogFile(corpus_path, Provenance::kHumanModel).corpus;
  const QuestionRegistry questions = LoadRegistry(o.config);
  Plan plan = BuildPlan(corpus, questions, o.config.comparisons, o.config.seed,
                        o.config.run_id, o.config.qc);

  RunConfig run_config;
  run_config.run_id = o.config.run_id;
  run_config.policy = o.config.policy;
  run_config.alpha = o.config.alpha;
  run_config.justification_required = o.config.justification_required;
  const RunSetup setup = MakeRunSetup(run_config, plan, corpus, questions);

  const auto rows = PlanSummary(plan);
  const std::string summary = Render([&](std::ostream& s) { WritePlanSummaryTsv(s, rows); });
  fs::create_directories(o.run_dir);
  WriteFileAtomic(o.run_dir / kPlanFile, Render([&](std::ostream& s) { WritePlan(s, plan); }));
  WriteFileAtomic(o.run_dir / "plan_summary.tsv", summary);
  WriteFileAtomic(o.run_dir / kSetupFile, ToJson(setup).dump(1) + "\n");
  out << summary;
  out << fmt::format("{} matchups, {} QC matchups\n", plan.matchups.size(), plan.qc_pool.size());
}

void CmdSelfChat(const SelfChatOptions& o, std::ostream& out) {
  const CliConfig& c = o.config;
  if (!c.endpoint) Fail(ErrorCode::kInvalidArgument, "no endpoint configured");
  SelfChatConfig sc;
  sc.num_conversations = c.selfchat.num_conversations;
  sc.min_turns_per_speaker = c.selfchat.min_turns_per_speaker;
  sc.max_turns_per_speaker = c.selfchat.max_turns_per_speaker;
  sc.rng_seed = c.seed;
  sc.parallelism = c.selfchat.parallelism;
  sc.task = c.selfchat.task;
  if (!c.selfchat.contexts_file.empty()) sc.context_seeds = ReadLines(c.selfchat.contexts_file);

  const SelfChatResult result = RunSelfChats(*c.endpoint, sc);
  std::string failures = "conversation_index\treason\n";
  for (const SelfChatFailure& f : result.failures) {
    failures += fmt::format("{}\t{}\n", f.conversation_index, f.reason);
  }
  fs::create_directories(o.run_dir);
  WriteFileAtomic(o.run_dir / "selfchat_failures.tsv", failures);
  if (!result.probe_ok) {
    Fail(ErrorCode::kUnavailable,
         fmt::format("endpoint {} failed its health probe", c.endpoint->address));
  }
  const fs::path log = o.run_dir / fmt::format("selfchat-{}.jsonl", c.endpoint->agent.name);
  WriteFileAtomic(log, Render([&](std::ostream& s) { WriteLog(s, result.corpus); }));
  out << fmt::format("{} conversations written to {}, {} failed\n", result.corpus.size(),
                     log.string(), result.failures.size());
}

void CmdServe(const ServeOptions& o, std::ostream& out,
              const std::function<void(int)>& on_listening) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);

  RunHost host(o.run_dir);
  const int loaded = host.LoadExisting();
  if (o.start && fs::exists(o.run_dir / kSetupFile)) {
    RunSetup setup = RunSetupFromJson(ReadJsonFile(o.run_dir / kSetupFile));
    const auto ids = host.run_ids();
    if (std::find(ids.begin(), ids.end(), setup.config.run_id) == ids.end()) {
      host.Start(std::move(setup));
    }
  }
  HttpServer server(host);
  const int port = server.Bind(o.host, o.port);
  out << fmt::format("listening on http://{}:{} ({} runs recovered)", o.host, port, loaded)
      << std::endl;
  if (on_listening) on_listening(port);

  std::thread waiter([&server, signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.Stop();
  });
  server.Serve();
  waiter.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  out << "stopped" << std::endl;
}

namespace {

struct LoadedRun {
  fs::path dir;
  std::unique_ptr<Run> run;
};

LoadedRun LoadRun(const fs::path& run_dir, const std::string& run_id) {
  LoadedRun r;
  r.dir = ResolveRunDir(run_dir, run_id);
  r.run = Run::Load(r.dir);
  return r;
}

}  // namespace

void CmdAnalyze(const AnalyzeOptions& o, std::ostream& out) {
  const LoadedRun loaded = LoadRun(o.run_dir, o.run_id);
  const Run& run = *loaded.run;
  const RunReport report = run.Report();
  const Plan& plan = run.setup().plan;
  const fs::path& dir = loaded.dir;

  WriteFileAtomic(dir / "report.json", ToJson(report).dump(2) + "\n");
  WriteFileAtomic(dir / "win_matrix.tsv",
                  Render([&](std::ostream& s) { WriteWinMatrixTsv(s, report.matrix); }));
  WriteFileAtomic(dir / "win_cells.tsv",
                  Render([&](std::ostream& s) { WriteWinCellsTsv(s, report.matrix); }));
  const auto workers = run.Workers();
  WriteFileAtomic(dir / "gating.tsv",
                  Render([&](std::ostream& s) { WriteGatingTsv(s, workers, report.gating); }));
  WriteFileAtomic(dir / "agreement.tsv",
                  Render([&](std::ostream& s) { WriteAgreementTsv(s, report.agreement); }));
  std::string aa = "comparison\tagent\tn\tleft_wins\tleft_rate\tp_value\tposition_bias\n";
  for (const AaReportRow& row : report.aa_checks) {
    aa += fmt::format("{}\t{}\t{}\t{}\t{:.4f}\t{:.6g}\t{}\n", row.comparison, row.agent.Key(),
                      row.result.n, row.result.left_wins, row.result.left_rate,
                      row.result.p_value, row.result.position_bias_warning);
  }
  WriteFileAtomic(dir / "aa_checks.tsv", aa);

  if (!o.training_pairs.empty()) {
    Corpus self_chats;
    if (!o.self_chat_corpus.empty()) {
      self_chats = ParseLogFile(o.self_chat_corpus, Provenance::kSelfChat).corpus;
    } else {
      for (const Conversation& c : run.setup().conversations) {
        if (c.provenance == Provenance::kSelfChat) self_chats.Add(c);
      }
    }
    const OverlapReport overlap =
        TrainingOverlap(self_chats, LoadTrainingPairFile(o.training_pairs));
    WriteFileAtomic(dir / "overlap.tsv",
                    Render([&](std::ostream& s) { WriteOverlapTsv(s, overlap); }));
    const auto repetition = RepetitionReport(self_chats);
    WriteFileAtomic(dir / "repetition.tsv",
                    Render([&](std::ostream& s) { WriteRepetitionTsv(s, repetition); }));
    out << fmt::format("training overlap {:.4f} ({} of {} pairs)\n", overlap.fraction,
                       overlap.matched_pairs, overlap.total_pairs);
  }

  WriteWinMatrixTsv(out, report.matrix);
  out << fmt::format("{} surviving annotations, {} removed, {} QC; {} matchups in plan\n",
                     report.gating.surviving_count, report.gating.removed_count,
                     report.gating.qc_excluded_count, plan.matchups.size());
}

void CmdPower(const PowerOptions& o, std::ostream& out) {
  ValidateConfig(o.config);
  const LoadedRun loaded = LoadRun(o.run_dir, o.run_id);
  const Run& run = *loaded.run;
  const Plan& plan = run.setup().plan;
  const RunReport report = run.Report();

  AgentId first;
  AgentId second;
  if (!o.first.empty() || !o.second.empty()) {
    if (o.first.empty() || o.second.empty()) {
      Fail(ErrorCode::kInvalidArgument, "pass both --first and --second");
    }
    first = AgentId::FromKey(o.first);
    second = AgentId::FromKey(o.second);
  } else {
    std::set<std::pair<AgentId, AgentId>> pairs;
    for (const ComparisonSpec& s : plan.comparisons) {
      if (!s.self_check) pairs.insert(std::minmax(s.agent_a, s.agent_b));
    }
    if (pairs.size() != 1) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("run compares {} agent pairs; pass --first and --second", pairs.size()));
    }
    std::tie(first, second) = *pairs.begin();
  }

  const auto outcomes = PairOutcomes(report.gating.surviving, plan, first, second);
  std::vector<int> ks = o.config.bootstrap.sample_sizes;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  BootstrapOptions options;
  options.alpha = o.config.alpha;
  options.trials = o.config.bootstrap.trials;
  options.seed = o.config.bootstrap.seed;
  options.unit = o.config.bootstrap.unit;
  options.threads = o.config.bootstrap.threads;
  PowerCurve curve = BootstrapPowerCurve(outcomes, ks, options);
  if (o.config.seconds_per_annotation > 0) {
    curve = CostCurve(std::move(curve), o.config.seconds_per_annotation);
  }

  std::ostringstream table;
  table << "label\tk\tpower\tperson_hours\n";
  WritePowerCurveTsv(table, curve, fmt::format("{}_vs_{}", first.name, second.name));
  if (o.likert) {
    WritePowerCurveTsv(table, LikertPowerCurve(*o.likert, ks, o.config.alpha), "likert");
  }
  WriteFileAtomic(loaded.dir / "power.tsv", table.str());
  out << table.str();
}

void CmdExport(const ExportOptions& o, std::ostream& out) {
  const LoadedRun loaded = LoadRun(o.run_dir, o.run_id);
  const Run& run = *loaded.run;
  const RunReport report = run.Report();
  const auto annotations = run.Annotations();
  std::vector<json> all(annotations.begin(), annotations.end());
  std::vector<json> surviving(report.gating.surviving.begin(), report.gating.surviving.end());
  std::vector<json> conversations(run.setup().conversations.begin(),
                                  run.setup().conversations.end());
  WriteFileAtomic(loaded.dir / "annotations.jsonl", JsonLines(all));
  WriteFileAtomic(loaded.dir / "surviving.jsonl", JsonLines(surviving));
  WriteFileAtomic(loaded.dir / "conversations.jsonl", JsonLines(conversations));
  const auto workers = run.Workers();
  WriteFileAtomic(loaded.dir / "workers.tsv",
                  Render([&](std::ostream& s) { WriteGatingTsv(s, workers, report.gating); }));
  out << fmt::format("exported {} annotations ({} surviving) from {}\n", all.size(),
                     surviving.size(), loaded.dir.string());
}

namespace {

// Registers a flag that overrides a config field only when given.
template <typename T>
CLI::Option* Override(CLI::App* app, const std::string& name, std::optional<T>& slot,
                      const std::string& help) {
  return app->add_option(name, slot, help);
}

template <typename T>
void Apply(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

}  // namespace

int Main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pairwise multi-turn dialogue evaluation: ingest, plan, serve, analyze."};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "acute_eval 0.1.0");

  std::string config_file;
  std::string run_dir = ".";
  std::optional<std::string> run_id;
  std::optional<uint64_t> seed;
  std::optional<double> alpha;
  app.add_option("--config", config_file, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--run-dir", run_dir, "Directory for all outputs")->capture_default_str();
  Override(&app, "--run-id", run_id, "Run identifier");
  Override(&app, "--seed", seed, "Random seed");
  Override(&app, "--alpha", alpha, "Significance level")->check(CLI::Range(0.0, 1.0));

  // ingest
  IngestOptions ingest;
  std::string provenance = "HUMAN_MODEL";
  auto* cmd_ingest = app.add_subcommand("ingest", "Validate conversation logs into corpus.jsonl");
  cmd_ingest->add_option("files", ingest.files, "Conversation logs (JSONL)")
      ->check(CLI::ExistingFile);
  cmd_ingest->add_option("--provenance", provenance, "Provenance of positional files")
      ->check(CLI::IsMember({"HUMAN_MODEL", "SELF_CHAT", "HUMAN_HUMAN"}));
  cmd_ingest->add_option("--self-chat", ingest.self_chat_files, "Self-chat logs")
      ->check(CLI::ExistingFile);
  cmd_ingest->add_option("--human-human", ingest.human_human_files, "Human-human logs")
      ->check(CLI::ExistingFile);

  // plan
  std::string corpus_file;
  std::optional<int> worker_cap;
  std::optional<int> target;
  std::string qc_weak;
  std::string questions_file;
  auto* cmd_plan = app.add_subcommand("plan", "Build the matchup plan from corpus.jsonl");
  cmd_plan->add_option("--corpus", corpus_file, "Corpus file (default <run-dir>/corpus.jsonl)")
      ->check(CLI::ExistingFile);
  Override(cmd_plan, "--worker-cap", worker_cap, "Matchups per worker (0 = #comparisons)");
  Override(cmd_plan, "--target", target, "Annotations per comparison (all comparisons)");
  cmd_plan->add_option("--qc-weak", qc_weak, "Weak baseline agent for QC matchups");
  cmd_plan->add_option("--questions", questions_file, "Extra question definitions (JSONL)")
      ->check(CLI::ExistingFile);

  // selfchat
  std::string agent;
  std::string transport;
  std::string address;
  std::optional<int> num;
  std::optional<int> parallelism;
  std::optional<int64_t> timeout_ms;
  std::string contexts_file;
  auto* cmd_selfchat = app.add_subcommand("selfchat", "Generate self-chats from a model endpoint");
  cmd_selfchat->add_option("--agent", agent, "Model name");
  cmd_selfchat->add_option("--transport", transport, "HTTP or SUBPROCESS")
      ->check(CLI::IsMember({"HTTP", "SUBPROCESS"}));
  cmd_selfchat->add_option("--address", address, "URL or shell command");
  Override(cmd_selfchat, "--num", num, "Number of conversations");
  Override(cmd_selfchat, "--parallelism", parallelism, "Concurrent conversations");
  Override(cmd_selfchat, "--timeout-ms", timeout_ms, "Per-request timeout");
  cmd_selfchat->add_option("--contexts", contexts_file, "Context seeds, one per line")
      ->check(CLI::ExistingFile);

  // serve
  ServeOptions serve;
  bool no_start = false;
  auto* cmd_serve = app.add_subcommand("serve", "Host runs over HTTP until SIGINT/SIGTERM");
  cmd_serve->add_option("--host", serve.host, "Bind address")->capture_default_str();
  cmd_serve->add_option("--port", serve.port, "Port (0 = any free port)")
      ->check(CLI::Range(0, 65535))
      ->capture_default_str();
  cmd_serve->add_flag("--no-start", no_start, "Only recover existing runs");

  // analyze
  AnalyzeOptions analyze;
  auto* cmd_analyze = app.add_subcommand("analyze", "Gate workers and compute statistics");
  cmd_analyze->add_option("--training-pairs", analyze.training_pairs,
                          "Training call/response pairs for the overlap audit")
      ->check(CLI::ExistingFile);
  cmd_analyze->add_option("--self-chats", analyze.self_chat_corpus,
                          "Self-chat corpus to audit (default: the run's self-chats)")
      ->check(CLI::ExistingFile);

  // power
  PowerOptions power;
  std::vector<int> ks;
  std::optional<int> trials;
  std::optional<double> seconds;
  std::string unit;
  double likert_seconds = 0;
  double likert_diff = 0;
  double likert_var = 0;
  auto* cmd_power = app.add_subcommand("power", "Bootstrap power and cost curve");
  cmd_power->add_option("--first", power.first, "First agent");
  cmd_power->add_option("--second", power.second, "Second agent");
  cmd_power->add_option("--k", ks, "Sample sizes")->delimiter(',');
  Override(cmd_power, "--trials", trials, "Bootstrap trials");
  Override(cmd_power, "--seconds-per-annotation", seconds, "Cost per annotation");
  cmd_power->add_option("--unit", unit, "ANNOTATION or CONVERSATION")
      ->check(CLI::IsMember({"ANNOTATION", "CONVERSATION"}));
  auto* likert_opt =
      cmd_power->add_option("--likert-seconds", likert_seconds, "Seconds per Likert rating");
  cmd_power->add_option("--likert-diff", likert_diff, "Likert mean difference")
      ->needs(likert_opt);
  cmd_power->add_option("--likert-var", likert_var, "Likert score variance")
      ->needs(likert_opt);

  // export
  auto* cmd_export = app.add_subcommand("export", "Dump annotations and worker table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CliConfig config = config_file.empty() ? CliConfig{} : LoadConfigFile(config_file);
    Apply(run_id, config.run_id);
    Apply(seed, config.seed);
    Apply(alpha, config.alpha);
    const fs::path dir = run_dir;

    if (cmd_ingest->parsed()) {
      ingest.run_dir = dir;
      ingest.provenance = ParseProvenance(provenance);
      if (ingest.files.empty() && ingest.self_chat_files.empty() &&
          ingest.human_human_files.empty()) {
        err << "ingest: no input files\n" << cmd_ingest->help();
        return kExitUsage;
      }
      CmdIngest(ingest, out);
    } else if (cmd_plan->parsed()) {
      Apply(worker_cap, config.policy.worker_cap);
      if (target) {
        for (ComparisonSpec& s : config.comparisons) s.target_annotations = *target;
      }
      if (!qc_weak.empty()) {
        config.qc = QcSpec{AgentId::FromKey(qc_weak),
                           config.qc ? config.qc->question_id : std::string("engagingness")};
      }
      if (!questions_file.empty()) config.questions_file = questions_file;
      CmdPlan({dir, corpus_file, config}, out);
    } else if (cmd_selfchat->parsed()) {
      if (!address.empty() || !agent.empty() || !transport.empty()) {
        ModelEndpoint ep = config.endpoint.value_or(ModelEndpoint{});
        if (!agent.empty()) ep.agent = AgentId::FromKey(agent);
        if (!transport.empty()) ep.transport = ParseTransport(transport);
        if (!address.empty()) ep.address = address;
        config.endpoint = ep;
      }
      if (config.endpoint && timeout_ms) {
        config.endpoint->timeout = std::chrono::milliseconds(*timeout_ms);
      }
      if (!config.endpoint || config.endpoint->address.empty() ||
          config.endpoint->agent.name.empty()) {
        err << "selfchat: need --agent and --address (or an endpoint in --config)\n";
        return kExitUsage;
      }
      Apply(num, config.selfchat.num_conversations);
      Apply(parallelism, config.selfchat.parallelism);
      if (!contexts_file.empty()) config.selfchat.contexts_file = contexts_file;
      CmdSelfChat({dir, config}, out);
    } else if (cmd_serve->parsed()) {
      serve.run_dir = dir;
      serve.start = !no_start;
      CmdServe(serve, out);
    } else if (cmd_analyze->parsed()) {
      analyze.run_dir = dir;
      analyze.run_id = run_id.value_or("");
      CmdAnalyze(analyze, out);
    } else if (cmd_power->parsed()) {
      if (!ks.empty()) config.bootstrap.sample_sizes = ks;
      Apply(trials, config.bootstrap.trials);
      Apply(seconds, config.seconds_per_annotation);
      if (!unit.empty()) config.bootstrap.unit = ParseResampleUnit(unit);
      if (*likert_opt) power.likert = LikertProfile{likert_seconds, likert_diff, likert_var};
      power.run_dir = dir;
      power.run_id = run_id.value_or("");
      power.config = config;
      CmdPower(power, out);
    } else if (cmd_export->parsed()) {
      CmdExport({dir, run_id.value_or("")}, out);
    }
  } catch (const Error& e) {
    err << "error: " << ErrorCodeName(e.code()) << ": " << e.what() << '\n';
    return ExitCodeFor(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: IO: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace acute::cli
