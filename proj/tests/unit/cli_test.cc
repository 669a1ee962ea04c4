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

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <doctest.h>
#include <fmt/format.h>
#include <httplib.h>

#include "acute/errors.h"
#include "acute_cli/cli.h"
#include "fixtures.h"

namespace acute::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "acute_eval");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  Outcome o;
  o.code = Main(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void Write(const fs::path& p, const std::string& content) {
  std::ofstream(p, std::ios::binary) << content;
}

// Logs, a config and a planned workspace in `dir`.
struct Workspace {
  TempDir dir;
  fs::path config;

  explicit Workspace(int target = 20) {
    testing::CorpusSpec spec;
    spec.per_model = 30;
    spec.weak_model = "baseline_seq2seq";
    spec.weak_conversations = 10;
    spec.human_human = 10;
    WriteLogFile(dir / "logs.jsonl", testing::SyntheticCorpus(spec));
    config = dir / "config.json";
    Write(config, json{{"run_id", "trial"},
                       {"seed", 5},
                       {"comparisons",
                        {{{"agent_a", "polyencoder_v7"},
                          {"agent_b", "kvmemnet_x2"},
                          {"question", "engagingness"},
                          {"target", target}}}},
                       {"qc", {{"weak_agent", "baseline_seq2seq"}}},
                       {"seconds_per_annotation", 90},
                       {"bootstrap", {{"k", {10, 40}}, {"trials", 500}}}}
                      .dump());
  }

  std::vector<std::string> Base() const {
    return {"--run-dir", dir.path().string(), "--config", config.string()};
  }

  Outcome Run(std::vector<std::string> args) const {
    std::vector<std::string> all = Base();
    all.insert(all.end(), args.begin(), args.end());
    return Cli(all);
  }

  // Ingest, plan and drive a full synthetic crowd through the run.
  void Populate() const {
    REQUIRE(Run({"ingest", (dir / "logs.jsonl").string()}).code == 0);
    REQUIRE(Run({"plan"}).code == 0);
    const RunSetup setup = RunSetupFromJson(json::parse(Slurp(dir / kSetupFile)));
    auto run = acute::Run::Start(dir.path(), setup);
    testing::Crowd crowd;
    crowd.seed = 2;
    crowd.preferred = AgentId::Model("polyencoder_v7");
    crowd.preference = 0.8;
    crowd.fraud_rate = 0.1;
    testing::DriveRun(*run, crowd);
  }
};

TEST_CASE("exit code mapping") {
  CHECK(ExitCodeFor(ErrorCode::kInvalidArgument) == kExitData);
  CHECK(ExitCodeFor(ErrorCode::kNotFound) == kExitData);
  CHECK(ExitCodeFor(ErrorCode::kDataLoss) == kExitData);
  CHECK(ExitCodeFor(ErrorCode::kUnavailable) == kExitRuntime);
  CHECK(ExitCodeFor(ErrorCode::kIo) == kExitRuntime);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(Cli({}).code == kExitUsage);
  CHECK(Cli({"frobnicate"}).code == kExitUsage);
  CHECK(Cli({"power", "--bogus"}).code == kExitUsage);
  CHECK(Cli({"ingest"}).code == kExitUsage);
  CHECK(Cli({"selfchat"}).code == kExitUsage);
  const Outcome help = Cli({"--help"});
  CHECK(help.code == kExitOk);
  CHECK(help.out.find("ingest") != std::string::npos);
}

TEST_CASE("ingest writes the corpus and reports rejects") {
  Workspace ws;
  std::ofstream(ws.dir / "logs.jsonl", std::ios::app) << "{\"broken\": true}\n";
  const Outcome o = ws.Run({"ingest", (ws.dir / "logs.jsonl").string()});
  CHECK(o.code == 0);
  CHECK(o.out.find("80 conversations, 1 rejected lines") != std::string::npos);
  CHECK(fs::exists(ws.dir / kCorpusFile));
  CHECK(Slurp(ws.dir / "ingest_rejects.tsv").find("81") != std::string::npos);
  const auto parsed = ParseLogFile(ws.dir / kCorpusFile, Provenance::kHumanModel);
  CHECK(parsed.corpus.size() == 80);
  CHECK(parsed.rejects.empty());
  CHECK(ws.Run({"ingest", (ws.dir / "absent.jsonl").string()}).code == kExitUsage);
}

TEST_CASE("plan writes the plan, summary and setup") {
  Workspace ws;
  ws.Run({"ingest", (ws.dir / "logs.jsonl").string()});
  const Outcome o = ws.Run({"plan", "--target", "25"});
  REQUIRE(o.code == 0);
  CHECK(o.out.find("25 matchups, 10 QC matchups") != std::string::npos);
  std::ifstream plan_in(ws.dir / kPlanFile);
  const Plan plan = ReadPlan(plan_in);
  CHECK(plan.matchups.size() == 25);
  CHECK(plan.run_id == "trial");
  const RunSetup setup = RunSetupFromJson(json::parse(Slurp(ws.dir / kSetupFile)));
  CHECK(setup.plan == plan);
  CHECK(Slurp(ws.dir / "plan_summary.tsv").find("MODEL:polyencoder_v7") != std::string::npos);
  const Outcome again = ws.Run({"plan", "--target", "25"});
  CHECK(Slurp(ws.dir / kPlanFile) == [&] {
    std::ostringstream s;
    WritePlan(s, plan);
    return s.str();
  }());
  CHECK(again.code == 0);
  CHECK(ws.Run({"plan", "--target", "5000"}).code == kExitData);
}

TEST_CASE("config errors are data errors") {
  TempDir dir;
  Write(dir / "bad.json", R"({"run_id": "x", "colour": "blue"})");
  const Outcome unknown = Cli({"--config", (dir / "bad.json").string(), "plan"});
  CHECK(unknown.code == kExitData);
  CHECK(unknown.err.find("colour") != std::string::npos);
  Write(dir / "broken.json", "{");
  CHECK(Cli({"--config", (dir / "broken.json").string(), "plan"}).code == kExitData);
  CHECK(Cli({"--run-dir", dir.path().string(), "analyze"}).code == kExitData);
  CHECK(Cli({"--run-dir", dir.path().string(), "plan"}).code != kExitOk);
}

TEST_CASE("analyze is byte-identical across invocations") {
  Workspace ws;
  ws.Populate();
  const Outcome first = ws.Run({"analyze"});
  REQUIRE(first.code == 0);
  const fs::path run_dir = ws.dir / "trial";
  std::map<std::string, std::string> outputs;
  for (const char* f : {"report.json", "win_matrix.tsv", "win_cells.tsv", "gating.tsv",
                        "agreement.tsv", "aa_checks.tsv"}) {
    REQUIRE(fs::exists(run_dir / f));
    outputs[f] = Slurp(run_dir / f);
  }
  const Outcome second = Cli({"--run-dir", run_dir.string(), "analyze"});
  CHECK(second.code == 0);
  CHECK(second.out == first.out);
  for (const auto& [name, content] : outputs) CHECK(Slurp(run_dir / name) == content);

  const json report = json::parse(outputs["report.json"]);
  CHECK(report["run_id"] == "trial");
  CHECK(report["gating"]["surviving_count"].get<int>() +
            report["gating"]["removed_count"].get<int>() ==
        20);
  CHECK(outputs["win_matrix.tsv"].starts_with("loses\\wins\tpolyencoder_v7\tkvmemnet_x2\n"));
  CHECK(first.out.find("surviving annotations") != std::string::npos);
}

TEST_CASE("analyze audits self-chats against training pairs") {
  Workspace ws;
  ws.Populate();
  Corpus chats;
  Conversation c = testing::MakeConversation("sc-1", AgentId::Model("polyencoder_v7"),
                                             Provenance::kSelfChat, 3);
  chats.Add(c);
  WriteLogFile(ws.dir / "chats.jsonl", chats);
  Write(ws.dir / "pairs.jsonl",
        json{{"call", c.utterances[0].text}, {"response", c.utterances[1].text}}.dump() + "\n");
  const Outcome o = ws.Run({"analyze", "--training-pairs", (ws.dir / "pairs.jsonl").string(),
                            "--self-chats", (ws.dir / "chats.jsonl").string()});
  REQUIRE(o.code == 0);
  CHECK(o.out.find("training overlap 0.2000 (1 of 5 pairs)") != std::string::npos);
  CHECK(fs::exists(ws.dir / "trial" / "overlap.tsv"));
  CHECK(Slurp(ws.dir / "trial" / "repetition.tsv").find("sc-1\t6\t0\t0.0000") !=
        std::string::npos);
}

TEST_CASE("power writes a labelled curve with person-hours") {
  Workspace ws;
  ws.Populate();
  const Outcome o = ws.Run({"power"});
  REQUIRE(o.code == 0);
  const std::string tsv = Slurp(ws.dir / "trial" / "power.tsv");
  CHECK(tsv.starts_with("label\tk\tpower\tperson_hours\n"));
  CHECK(tsv.find("kvmemnet_x2_vs_polyencoder_v7\t10\t") != std::string::npos);
  CHECK(tsv.find("\t40\t") != std::string::npos);
  CHECK(tsv.find("\t1.0000\n") != std::string::npos);  // 40 * 90 s = 1 h
  CHECK(o.out == tsv);
  CHECK(ws.Run({"power"}).out == tsv);

  const Outcome likert = ws.Run({"power", "--k", "20,40", "--likert-seconds", "30",
                                 "--likert-diff", "0.3", "--likert-var", "1.0"});
  REQUIRE(likert.code == 0);
  CHECK(likert.out.find("likert\t40\t") != std::string::npos);
  CHECK(ws.Run({"power", "--k", "0"}).code == kExitData);
  CHECK(ws.Run({"power", "--first", "MODEL:nobody"}).code == kExitData);
}

TEST_CASE("export dumps annotations and the worker table") {
  Workspace ws;
  ws.Populate();
  REQUIRE(ws.Run({"export"}).code == 0);
  const fs::path d = ws.dir / "trial";
  std::istringstream lines(Slurp(d / "annotations.jsonl"));
  int n = 0;
  for (std::string line; std::getline(lines, line);) {
    Annotation a = json::parse(line).get<Annotation>();
    CHECK_FALSE(a.worker_id.empty());
    ++n;
  }
  CHECK(n > 20);
  CHECK(Slurp(d / "workers.tsv").starts_with("worker_id\t"));
  CHECK(fs::file_size(d / "conversations.jsonl") > 0);
  CHECK(fs::file_size(d / "surviving.jsonl") > 0);
}

TEST_CASE("selfchat drives a subprocess endpoint") {
  TempDir dir;
  Write(dir / "contexts.txt", "sailing\n\nknitting\n");
  const std::string command = fmt::format("'{}' echo", ACUTE_ECHO_ENDPOINT);
  const Outcome o = Cli({"--run-dir", dir.path().string(), "--seed", "3", "selfchat",
                         "--agent", "echo_bot", "--transport", "SUBPROCESS", "--address",
                         command, "--num", "4", "--contexts",
                         (dir / "contexts.txt").string()});
  REQUIRE(o.code == 0);
  const auto parsed = ParseLogFile(dir / "selfchat-echo_bot.jsonl", Provenance::kSelfChat);
  CHECK(parsed.corpus.size() == 4);
  CHECK(parsed.rejects.empty());
  for (const Conversation& c : parsed.corpus.conversations()) {
    CHECK(c.provenance == Provenance::kSelfChat);
    CHECK(c.utterances.size() >= 12);
    CHECK(c.utterances.size() <= 16);
    CHECK(c.utterances[0].text.find("about") != std::string::npos);
  }
  const Outcome dead = Cli({"--run-dir", dir.path().string(), "selfchat", "--agent", "mute",
                            "--transport", "SUBPROCESS", "--address",
                            fmt::format("'{}' silent", ACUTE_ECHO_ENDPOINT),
                            "--timeout-ms", "100", "--num", "2"});
  CHECK(dead.code == kExitRuntime);
  CHECK(dead.err.find("UNAVAILABLE") != std::string::npos);
}

#ifdef ACUTE_CLI_BINARY
TEST_CASE("serve hosts the planned run until SIGTERM") {
  Workspace ws;
  REQUIRE(ws.Run({"ingest", (ws.dir / "logs.jsonl").string()}).code == 0);
  REQUIRE(ws.Run({"plan"}).code == 0);
  int pipe_fds[2];
  REQUIRE(pipe(pipe_fds) == 0);
  const std::string dir = ws.dir.path().string();
  const pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    dup2(pipe_fds[1], STDOUT_FILENO);
    close(pipe_fds[0]);
    execl(ACUTE_CLI_BINARY, ACUTE_CLI_BINARY, "--run-dir", dir.c_str(), "serve", "--port",
          "0", static_cast<char*>(nullptr));
    _exit(127);
  }
  close(pipe_fds[1]);
  FILE* child_out = fdopen(pipe_fds[0], "r");
  char line[256] = {};
  REQUIRE(fgets(line, sizeof line, child_out) != nullptr);
  std::smatch m;
  const std::string first(line);
  REQUIRE(std::regex_search(first, m, std::regex(R"(listening on http://127\.0\.0\.1:(\d+) \(0 runs recovered\))")));
  const int port = std::stoi(m[1]);

  httplib::Client client("127.0.0.1", port);
  auto runs = client.Get("/runs");
  REQUIRE(runs);
  CHECK(json::parse(runs->body)["runs"] == json::array({"trial"}));
  auto task = client.Get("/runs/trial/task?worker=w1");
  REQUIRE(task);
  CHECK(json::parse(task->body)["status"] == "TASK");

  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
  std::string rest;
  while (fgets(line, sizeof line, child_out) != nullptr) rest += line;
  fclose(child_out);
  CHECK(rest.find("stopped") != std::string::npos);
  CHECK(fs::exists(ws.dir / "trial" / "events.jsonl"));
}
#endif

TEST_CASE("run directory resolution") {
  TempDir dir;
  CHECK_THROWS_AS(ResolveRunDir(dir.path(), ""), Error);
  fs::create_directories(dir / "only");
  Write(dir / "only" / "events.jsonl", "");
  CHECK(ResolveRunDir(dir.path(), "") == dir / "only");
  CHECK(ResolveRunDir(dir / "only", "ignored") == dir / "only");
  CHECK(ResolveRunDir(dir.path(), "only") == dir / "only");
  fs::create_directories(dir / "second");
  Write(dir / "second" / "events.jsonl", "");
  CHECK_THROWS_AS(ResolveRunDir(dir.path(), ""), Error);
}

TEST_CASE("atomic writes replace whole files") {
  TempDir dir;
  WriteFileAtomic(dir / "f.txt", "one");
  WriteFileAtomic(dir / "f.txt", "two");
  CHECK(Slurp(dir / "f.txt") == "two");
  CHECK(std::distance(fs::directory_iterator(dir.path()), fs::directory_iterator()) == 1);
  CHECK_THROWS_AS(WriteFileAtomic(dir / "no" / "f.txt", "x"), Error);
}

}  // namespace
}  // namespace acute::cli
