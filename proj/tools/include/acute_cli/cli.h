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

#ifndef ACUTE_CLI_CLI_H_
#define ACUTE_CLI_CLI_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acute/errors.h"
#include "acute/pairing.h"
#include "acute/run.h"
#include "acute/selfchat.h"
#include "acute/stats.h"

namespace acute::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitData = 3,
  kExitRuntime = 4,
};

int ExitCodeFor(ErrorCode code);

inline constexpr const char* kCorpusFile = "corpus.jsonl";
inline constexpr const char* kPlanFile = "plan.jsonl";
inline constexpr const char* kSetupFile = "setup.json";

struct BootstrapConfig {
  std::vector<int> sample_sizes = {10, 20, 50, 100, 200, 300, 500};
  int trials = 10000;
  uint64_t seed = 0;
  ResampleUnit unit = ResampleUnit::kAnnotation;
  int threads = 0;
};

struct SelfChatSection {
  int num_conversations = 100;
  int min_turns_per_speaker = 6;
  int max_turns_per_speaker = 8;
  std::string contexts_file;  // one context seed per line
  int parallelism = 1;
  std::string task;
};

// The declarative config file. Every field has a flag of the same meaning;
// flags given on the command line win.
struct CliConfig {
  std::string run_id = "run";
  uint64_t seed = 0;
  double alpha = kDefaultAlpha;
  std::string questions_file;
  std::vector<ComparisonSpec> comparisons;
  std::optional<QcSpec> qc;
  AssignmentPolicy policy;
  bool justification_required = false;
  BootstrapConfig bootstrap;
  double seconds_per_annotation = 0.0;  // 0 = no cost column
  std::optional<ModelEndpoint> endpoint;
  SelfChatSection selfchat;
};

// Throws kInvalidArgument on unknown keys or out-of-range values.
CliConfig ConfigFromJson(const nlohmann::json& j);
CliConfig LoadConfigFile(const std::filesystem::path& path);
void ValidateConfig(const CliConfig& config);

// Writes through a temporary file and rename, so readers never see a
// partial output.
void WriteFileAtomic(const std::filesystem::path& path, const std::string& content);

// The directory holding events.jsonl: `dir` itself or `dir/<run_id>`.
std::filesystem::path ResolveRunDir(const std::filesystem::path& dir,
                                    const std::string& run_id);

struct IngestOptions {
  std::filesystem::path run_dir;
  std::vector<std::filesystem::path> files;
  Provenance provenance = Provenance::kHumanModel;
  std::vector<std::filesystem::path> self_chat_files;
  std::vector<std::filesystem::path> human_human_files;
};

// Writes corpus.jsonl, ingest_summary.tsv and ingest_rejects.tsv.
void CmdIngest(const IngestOptions& options, std::ostream& out);

struct PlanOptions {
  std::filesystem::path run_dir;
  std::filesystem::path corpus;  // default run_dir/corpus.jsonl
  CliConfig config;
};

// Writes plan.jsonl, plan_summary.tsv and setup.json.
void CmdPlan(const PlanOptions& options, std::ostream& out);

struct SelfChatOptions {
  std::filesystem::path run_dir;
  CliConfig config;
};

// Writes selfchat-<agent>.jsonl and selfchat_failures.tsv. Throws
// kUnavailable when the endpoint fails its health probe.
void CmdSelfChat(const SelfChatOptions& options, std::ostream& out);

struct ServeOptions {
  std::filesystem::path run_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  // Start the run described by run_dir/setup.json unless it already exists.
  bool start = true;
};

// Blocks until SIGINT or SIGTERM. `on_listening` receives the bound port.
void CmdServe(const ServeOptions& options, std::ostream& out,
              const std::function<void(int)>& on_listening = {});

struct AnalyzeOptions {
  std::filesystem::path run_dir;
  std::string run_id;
  std::filesystem::path training_pairs;  // optional overlap audit
  std::filesystem::path self_chat_corpus;  // default: the run's self-chats
};

// Writes report.json, win_matrix.tsv, win_cells.tsv, gating.tsv,
// agreement.tsv, aa_checks.tsv and, with training pairs, overlap.tsv and
// repetition.tsv.
void CmdAnalyze(const AnalyzeOptions& options, std::ostream& out);

struct PowerOptions {
  std::filesystem::path run_dir;
  std::string run_id;
  std::string first;  // agent keys; default: the only pair in the run
  std::string second;
  CliConfig config;
  std::optional<LikertProfile> likert;
};

// Writes power.tsv (label, k, power, person_hours).
void CmdPower(const PowerOptions& options, std::ostream& out);

struct ExportOptions {
  std::filesystem::path run_dir;
  std::string run_id;
};

// Writes annotations.jsonl, surviving.jsonl, workers.tsv and
// conversations.jsonl.
void CmdExport(const ExportOptions& options, std::ostream& out);

// Full command-line entry point. Returns the process exit code.
int Main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace acute::cli

#endif  // ACUTE_CLI_CLI_H_
