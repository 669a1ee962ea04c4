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

#ifndef ACUTE_SELFCHAT_H_
#define ACUTE_SELFCHAT_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "acute/corpus.h"

namespace acute {

enum class Transport { kSubprocess, kHttp };

std::string_view ToString(Transport transport);
Transport ParseTransport(std::string_view s);

struct ModelEndpoint {
  AgentId agent;
  Transport transport = Transport::kHttp;
  // URL for HTTP ("http://host:port/path"), shell command for subprocess.
  std::string address;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 2;
};

struct HistoryTurn {
  SpeakerSlot speaker_slot = SpeakerSlot::kFirst;
  std::string text;
};

// Stateless request: the whole dialogue so far plus the context seed of the
// side whose turn it is. The endpoint answers with that side's next line.
struct EndpointRequest {
  std::string context;
  std::vector<HistoryTurn> history;
};

nlohmann::json ToJson(const EndpointRequest& request);
EndpointRequest EndpointRequestFromJson(const nlohmann::json& j);

class ChatEndpoint {
 public:
  virtual ~ChatEndpoint() = default;
  // Returns the reply text. Throws Error (kDeadlineExceeded, kUnavailable,
  // kInvalidArgument for a malformed reply) on failure.
  virtual std::string Respond(const EndpointRequest& request) = 0;
};

// One endpoint instance per concurrent conversation.
using EndpointFactory = std::function<std::unique_ptr<ChatEndpoint>()>;

std::unique_ptr<ChatEndpoint> ConnectEndpoint(const ModelEndpoint& endpoint);

struct SelfChatConfig {
  int num_conversations = 1;
  int min_turns_per_speaker = 6;
  int max_turns_per_speaker = 8;
  std::vector<std::string> context_seeds;  // opaque persona/topic strings
  uint64_t rng_seed = 0;
  int parallelism = 1;
  std::string task;  // copied into conversation metadata when nonempty
};

struct SelfChatFailure {
  int conversation_index = 0;
  std::string reason;
};

struct SelfChatResult {
  Corpus corpus;  // SELF_CHAT conversations in index order
  std::vector<SelfChatFailure> failures;
  bool probe_ok = false;
};

// Called once per finished conversation, serialized, in completion order.
using ConversationSink = std::function<void(const Conversation&)>;

// Drives the endpoint in both speaker roles. A failed health probe yields
// no conversations and one failure per requested conversation; a
// conversation whose request still fails after max_retries is dropped and
// recorded as a failure. `factory` overrides the endpoint's transport
// (tests, in-process models). Throws kInvalidArgument on a bad config.
SelfChatResult RunSelfChats(const ModelEndpoint& endpoint,
                            const SelfChatConfig& config,
                            const EndpointFactory& factory = {},
                            const ConversationSink& sink = {});

struct UtterancePair {
  std::string call;
  std::string response;

  friend bool operator==(const UtterancePair&, const UtterancePair&) = default;
  friend auto operator<=>(const UtterancePair&, const UtterancePair&) = default;
};

using TrainingPairs = std::set<UtterancePair>;

// One {"call", "response"} record per line; texts are trimmed.
TrainingPairs LoadTrainingPairs(std::istream& in);
TrainingPairs LoadTrainingPairFile(const std::filesystem::path& path);

struct OverlapReport {
  double fraction = 0.0;
  int total_pairs = 0;
  int matched_pairs = 0;
  std::vector<UtterancePair> matched;  // corpus order
  bool empty_training_set = false;
};

// Share of adjacent (call, response) utterance pairs that appear verbatim
// (after trimming) in the training set. Throws kInvalidArgument on an empty
// corpus.
OverlapReport TrainingOverlap(const Corpus& corpus, const TrainingPairs& training);

struct RepetitionRow {
  std::string conv_id;
  int utterances = 0;
  int repeated = 0;  // utterances duplicating an earlier one
  double fraction = 0.0;
};

std::vector<RepetitionRow> RepetitionReport(const Corpus& corpus);

void WriteOverlapTsv(std::ostream& out, const OverlapReport& report);
void WriteRepetitionTsv(std::ostream& out, std::span<const RepetitionRow> rows);

}  // namespace acute

#endif  // ACUTE_SELFCHAT_H_
