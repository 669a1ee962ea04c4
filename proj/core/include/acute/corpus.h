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

#ifndef ACUTE_CORPUS_H_
#define ACUTE_CORPUS_H_

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace acute {

enum class SpeakerSlot { kFirst, kSecond };
enum class AgentKind { kModel, kHuman };
enum class Provenance { kHumanModel, kSelfChat, kHumanHuman };

std::string_view ToString(SpeakerSlot slot);
std::string_view ToString(AgentKind kind);
std::string_view ToString(Provenance provenance);
SpeakerSlot ParseSpeakerSlot(std::string_view s);
AgentKind ParseAgentKind(std::string_view s);
Provenance ParseProvenance(std::string_view s);

inline SpeakerSlot OtherSlot(SpeakerSlot slot) {
  return slot == SpeakerSlot::kFirst ? SpeakerSlot::kSecond
                                     : SpeakerSlot::kFirst;
}

inline constexpr std::string_view kHumanAgentName = "human";

struct AgentId {
  AgentKind kind = AgentKind::kModel;
  std::string name;

  static AgentId Model(std::string name) {
    return {AgentKind::kModel, std::move(name)};
  }
  static AgentId Human(std::string name = std::string(kHumanAgentName)) {
    return {AgentKind::kHuman, std::move(name)};
  }

  // "MODEL:PE", "HUMAN:human".
  std::string Key() const;

  // Inverse of Key. A bare name is a model, except "human".
  static AgentId FromKey(std::string_view key);

  friend bool operator==(const AgentId&, const AgentId&) = default;
  friend auto operator<=>(const AgentId&, const AgentId&) = default;
};

struct Utterance {
  int turn_index = 0;
  SpeakerSlot speaker_slot = SpeakerSlot::kFirst;
  std::string text;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Conversation {
  std::string conv_id;
  AgentId evaluated_agent;
  AgentId partner_agent;
  SpeakerSlot evaluated_slot = SpeakerSlot::kFirst;
  Provenance provenance = Provenance::kHumanModel;
  std::vector<Utterance> utterances;
  std::map<std::string, std::string> metadata;

  friend bool operator==(const Conversation&, const Conversation&) = default;
};

// One failed invariant. `invariant` is a stable machine-readable tag.
struct Violation {
  std::string invariant;
  std::string location;
  std::string detail;
};

// Never throws; an empty result means the conversation is well formed.
std::vector<Violation> ValidateConversation(const Conversation& c);

// Whitespace trim used everywhere utterance text is compared.
std::string_view Trim(std::string_view s);

// Conversations in insertion order plus agent and per-agent indices.
class Corpus {
 public:
  // Throws kInvalidArgument on validation failure and kAlreadyExists on a
  // duplicate conv_id.
  void Add(Conversation conversation);

  const std::vector<Conversation>& conversations() const {
    return conversations_;
  }
  const std::vector<AgentId>& agents() const { return agents_; }
  size_t size() const { return conversations_.size(); }
  bool empty() const { return conversations_.empty(); }

  const Conversation* Find(std::string_view conv_id) const;
  const Conversation& Get(std::string_view conv_id) const;
  bool HasAgent(const AgentId& agent) const;

  // Conversations in which `agent` is the evaluated speaker, optionally
  // restricted to one provenance. Insertion order.
  std::vector<const Conversation*> ConversationsOf(
      const AgentId& agent,
      std::optional<Provenance> provenance = std::nullopt) const;
  std::vector<const Conversation*> WithProvenance(Provenance provenance) const;

  // Adds every conversation of `other`; same failure modes as Add.
  void Merge(const Corpus& other);

 private:
  void NoteAgent(const AgentId& agent);

  std::vector<Conversation> conversations_;
  std::unordered_map<std::string, size_t> by_id_;
  std::vector<AgentId> agents_;
  std::map<std::string, std::vector<size_t>> by_evaluated_agent_;
};

struct ParseReject {
  int line = 0;  // 1-based
  std::string reason;
};

struct ParseResult {
  Corpus corpus;
  std::vector<ParseReject> rejects;
};

// Line-delimited conversation records. Malformed or invalid lines are
// collected as rejects. Throws kIo if the file cannot be read,
// kInvalidArgument if no line yields a conversation and kAlreadyExists on
// duplicate conv_id.
ParseResult ParseLogFile(const std::filesystem::path& path,
                         Provenance default_provenance);
ParseResult ParseLogStream(std::istream& in, Provenance default_provenance);

void WriteLog(std::ostream& out, const Corpus& corpus);
void WriteLogFile(const std::filesystem::path& path, const Corpus& corpus);

void to_json(nlohmann::json& j, const AgentId& a);
void from_json(const nlohmann::json& j, AgentId& a);
void to_json(nlohmann::json& j, const Utterance& u);
void from_json(const nlohmann::json& j, Utterance& u);
void to_json(nlohmann::json& j, const Conversation& c);

// Strict decode. `default_provenance` fills a missing provenance field.
Conversation ConversationFromJson(
    const nlohmann::json& j,
    Provenance default_provenance = Provenance::kHumanModel);

}  // namespace acute

#endif  // ACUTE_CORPUS_H_
