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

#include "acute/corpus.h"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "acute/errors.h"

namespace acute {
namespace {

using nlohmann::json;

[[noreturn]] void BadRecord(const std::string& message) {
  Fail(ErrorCode::kInvalidArgument, message);
}

const json& Field(const json& j, const char* name) {
  if (!j.is_object()) BadRecord("record is not an object");
  auto it = j.find(name);
  if (it == j.end()) BadRecord(fmt::format("missing field \"{}\"", name));
  return *it;
}

std::string StringField(const json& j, const char* name) {
  const json& v = Field(j, name);
  if (!v.is_string()) BadRecord(fmt::format("field \"{}\" must be a string", name));
  return v.get<std::string>();
}

}  // namespace

std::string_view ToString(SpeakerSlot slot) {
  return slot == SpeakerSlot::kFirst ? "FIRST" : "SECOND";
}

std::string_view ToString(AgentKind kind) {
  return kind == AgentKind::kModel ? "MODEL" : "HUMAN";
}

std::string_view ToString(Provenance provenance) {
  switch (provenance) {
    case Provenance::kHumanModel:
      return "HUMAN_MODEL";
    case Provenance::kSelfChat:
      return "SELF_CHAT";
    case Provenance::kHumanHuman:
      return "HUMAN_HUMAN";
  }
  return "HUMAN_MODEL";
}

SpeakerSlot ParseSpeakerSlot(std::string_view s) {
  if (s == "FIRST") return SpeakerSlot::kFirst;
  if (s == "SECOND") return SpeakerSlot::kSecond;
  BadRecord(fmt::format("unknown speaker slot \"{}\"", s));
}

AgentKind ParseAgentKind(std::string_view s) {
  if (s == "MODEL") return AgentKind::kModel;
  if (s == "HUMAN") return AgentKind::kHuman;
  BadRecord(fmt::format("unknown agent kind \"{}\"", s));
}

Provenance ParseProvenance(std::string_view s) {
  if (s == "HUMAN_MODEL") return Provenance::kHumanModel;
  if (s == "SELF_CHAT") return Provenance::kSelfChat;
  if (s == "HUMAN_HUMAN") return Provenance::kHumanHuman;
  BadRecord(fmt::format("unknown provenance \"{}\"", s));
}

std::string AgentId::Key() const {
  return fmt::format("{}:{}", ToString(kind), name);
}

AgentId AgentId::FromKey(std::string_view key) {
  const size_t colon = key.find(':');
  if (colon == std::string_view::npos) {
    if (key.empty()) Fail(ErrorCode::kInvalidArgument, "empty agent name");
    if (key == kHumanAgentName) return Human();
    return Model(std::string(key));
  }
  AgentId id{ParseAgentKind(key.substr(0, colon)), std::string(key.substr(colon + 1))};
  if (id.name.empty()) {
    Fail(ErrorCode::kInvalidArgument, fmt::format("agent key \"{}\" has no name", key));
  }
  return id;
}

std::string_view Trim(std::string_view s) {
  constexpr std::string_view kSpace = " \t\n\r\f\v";
  const size_t begin = s.find_first_not_of(kSpace);
  if (begin == std::string_view::npos) return {};
  const size_t end = s.find_last_not_of(kSpace);
  return s.substr(begin, end - begin + 1);
}

std::vector<Violation> ValidateConversation(const Conversation& c) {
  std::vector<Violation> out;
  auto add = [&out](std::string invariant, std::string location,
                    std::string detail) {
    out.push_back({std::move(invariant), std::move(location), std::move(detail)});
  };

  if (Trim(c.conv_id).empty()) add("conv-id-empty", "conv_id", "conv_id is empty");
  if (c.evaluated_agent.name.empty()) {
    add("agent-name-empty", "evaluated_agent", "agent name is empty");
  }
  if (c.partner_agent.name.empty()) {
    add("agent-name-empty", "partner_agent", "agent name is empty");
  }
  if (c.utterances.size() < 2) {
    add("min-utterances", "utterances",
        fmt::format("{} utterance(s), need at least 2", c.utterances.size()));
  }

  bool seen_first = false;
  bool seen_second = false;
  for (size_t i = 0; i < c.utterances.size(); ++i) {
    const Utterance& u = c.utterances[i];
    const std::string where = fmt::format("utterances[{}]", i);
    if (u.turn_index != static_cast<int>(i)) {
      add("turn-index-sequence", where,
          fmt::format("turn_index {} at position {}", u.turn_index, i));
    }
    if (Trim(u.text).empty()) add("empty-text", where, "text is empty after trimming");
    (u.speaker_slot == SpeakerSlot::kFirst ? seen_first : seen_second) = true;
  }
  if (!c.utterances.empty() && !(seen_first && seen_second)) {
    add("missing-slot", "utterances",
        fmt::format("speaker slot {} never speaks",
                    seen_first ? "SECOND" : "FIRST"));
  }

  if (c.provenance == Provenance::kSelfChat) {
    if (c.evaluated_agent != c.partner_agent) {
      add("self-chat-agent", "partner_agent",
          fmt::format("self-chat between distinct agents {} and {}",
                      c.evaluated_agent.Key(), c.partner_agent.Key()));
    } else if (c.evaluated_agent.kind != AgentKind::kModel) {
      add("self-chat-agent", "evaluated_agent", "self-chat agent must be a MODEL");
    }
  }
  return out;
}

void Corpus::Add(Conversation conversation) {
  const auto violations = ValidateConversation(conversation);
  if (!violations.empty()) {
    const Violation& v = violations.front();
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("conversation \"{}\" violates {} at {}: {}",
                     conversation.conv_id, v.invariant, v.location, v.detail));
  }
  if (by_id_.contains(conversation.conv_id)) {
    Fail(ErrorCode::kAlreadyExists,
         fmt::format("duplicate conv_id \"{}\"", conversation.conv_id));
  }
  NoteAgent(conversation.evaluated_agent);
  NoteAgent(conversation.partner_agent);
  const size_t index = conversations_.size();
  by_id_.emplace(conversation.conv_id, index);
  by_evaluated_agent_[conversation.evaluated_agent.Key()].push_back(index);
  conversations_.push_back(std::move(conversation));
}

void Corpus::NoteAgent(const AgentId& agent) {
  if (!HasAgent(agent)) agents_.push_back(agent);
}

bool Corpus::HasAgent(const AgentId& agent) const {
  for (const AgentId& a : agents_) {
    if (a == agent) return true;
  }
  return false;
}

const Conversation* Corpus::Find(std::string_view conv_id) const {
  auto it = by_id_.find(std::string(conv_id));
  return it == by_id_.end() ? nullptr : &conversations_[it->second];
}

const Conversation& Corpus::Get(std::string_view conv_id) const {
  const Conversation* c = Find(conv_id);
  if (c == nullptr) {
    Fail(ErrorCode::kNotFound, fmt::format("unknown conversation \"{}\"", conv_id));
  }
  return *c;
}

std::vector<const Conversation*> Corpus::ConversationsOf(
    const AgentId& agent, std::optional<Provenance> provenance) const {
  std::vector<const Conversation*> out;
  auto it = by_evaluated_agent_.find(agent.Key());
  if (it == by_evaluated_agent_.end()) return out;
  for (size_t index : it->second) {
    const Conversation& c = conversations_[index];
    if (!provenance || c.provenance == *provenance) out.push_back(&c);
  }
  return out;
}

std::vector<const Conversation*> Corpus::WithProvenance(
    Provenance provenance) const {
  std::vector<const Conversation*> out;
  for (const Conversation& c : conversations_) {
    if (c.provenance == provenance) out.push_back(&c);
  }
  return out;
}

void Corpus::Merge(const Corpus& other) {
  for (const Conversation& c : other.conversations()) Add(c);
}

void to_json(json& j, const AgentId& a) {
  j = json{{"kind", ToString(a.kind)}, {"name", a.name}};
}

void from_json(const json& j, AgentId& a) {
  a.kind = ParseAgentKind(StringField(j, "kind"));
  a.name = StringField(j, "name");
}

void to_json(json& j, const Utterance& u) {
  j = json{{"turn_index", u.turn_index},
           {"speaker_slot", ToString(u.speaker_slot)},
           {"text", u.text}};
}

void from_json(const json& j, Utterance& u) {
  const json& turn = Field(j, "turn_index");
  if (!turn.is_number_integer()) BadRecord("turn_index must be an integer");
  u.turn_index = turn.get<int>();
  u.speaker_slot = ParseSpeakerSlot(StringField(j, "speaker_slot"));
  u.text = StringField(j, "text");
}

void to_json(json& j, const Conversation& c) {
  j = json{{"conv_id", c.conv_id},
           {"evaluated_agent", c.evaluated_agent},
           {"partner_agent", c.partner_agent},
           {"evaluated_slot", ToString(c.evaluated_slot)},
           {"provenance", ToString(c.provenance)},
           {"utterances", c.utterances},
           {"metadata", c.metadata}};
}

Conversation ConversationFromJson(const json& j, Provenance default_provenance) {
  Conversation c;
  c.conv_id = StringField(j, "conv_id");
  c.evaluated_agent = Field(j, "evaluated_agent").get<AgentId>();
  c.partner_agent = Field(j, "partner_agent").get<AgentId>();
  c.evaluated_slot = ParseSpeakerSlot(StringField(j, "evaluated_slot"));
  if (auto it = j.find("provenance"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) BadRecord("field \"provenance\" must be a string");
    c.provenance = ParseProvenance(it->get<std::string>());
  } else {
    c.provenance = default_provenance;
  }
  const json& utterances = Field(j, "utterances");
  if (!utterances.is_array()) BadRecord("field \"utterances\" must be an array");
  for (const json& u : utterances) c.utterances.push_back(u.get<Utterance>());
  if (auto it = j.find("metadata"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) BadRecord("field \"metadata\" must be an object");
    for (const auto& [key, value] : it->items()) {
      if (!value.is_string()) {
        BadRecord(fmt::format("metadata \"{}\" must be a string", key));
      }
      c.metadata.emplace(key, value.get<std::string>());
    }
  }
  return c;
}

ParseResult ParseLogStream(std::istream& in, Provenance default_provenance) {
  ParseResult result;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (Trim(line).empty()) continue;
    Conversation c;
    try {
      c = ConversationFromJson(json::parse(line), default_provenance);
      const auto violations = ValidateConversation(c);
      if (!violations.empty()) {
        std::string reason;
        for (const Violation& v : violations) {
          if (!reason.empty()) reason += "; ";
          reason += fmt::format("{} at {}: {}", v.invariant, v.location, v.detail);
        }
        result.rejects.push_back({line_number, std::move(reason)});
        continue;
      }
    } catch (const json::exception& e) {
      result.rejects.push_back({line_number, e.what()});
      continue;
    } catch (const Error& e) {
      result.rejects.push_back({line_number, e.what()});
      continue;
    }
    if (result.corpus.Find(c.conv_id) != nullptr) {
      Fail(ErrorCode::kAlreadyExists,
           fmt::format("line {}: duplicate conv_id \"{}\"", line_number, c.conv_id));
    }
    result.corpus.Add(std::move(c));
  }
  if (result.corpus.empty()) {
    if (result.rejects.empty()) Fail(ErrorCode::kInvalidArgument, "no conversations");
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("no conversations: all {} record(s) rejected, first at line "
                     "{}: {}",
                     result.rejects.size(), result.rejects.front().line,
                     result.rejects.front().reason));
  }
  return result;
}

ParseResult ParseLogFile(const std::filesystem::path& path,
                         Provenance default_provenance) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
  try {
    return ParseLogStream(in, default_provenance);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

void WriteLog(std::ostream& out, const Corpus& corpus) {
  for (const Conversation& c : corpus.conversations()) {
    out << json(c).dump() << '\n';
  }
}

void WriteLogFile(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, fmt::format("cannot write {}", path.string()));
  WriteLog(out, corpus);
  out.flush();
  if (!out) Fail(ErrorCode::kIo, fmt::format("write failed: {}", path.string()));
}

}  // namespace acute
