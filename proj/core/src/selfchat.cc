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

#include "acute/selfchat.h"

#include <atomic>
#include <fstream>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>

#include "acute/errors.h"
#include "acute/random.h"

namespace acute {
namespace {

using nlohmann::json;

struct Outcome {
  std::optional<Conversation> conversation;
  std::string failure;
};

// Returns the trimmed reply, or the last error after all attempts.
std::optional<std::string> AskWithRetries(ChatEndpoint& endpoint,
                                          const EndpointRequest& request,
                                          int max_retries, std::string& error) {
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    try {
      std::string reply(Trim(endpoint.Respond(request)));
      if (!reply.empty()) return reply;
      error = "empty response";
    } catch (const Error& e) {
      error = e.what();
    }
  }
  return std::nullopt;
}

Outcome GenerateOne(ChatEndpoint& endpoint, const ModelEndpoint& spec,
                    const SelfChatConfig& config, int index) {
  Rng rng(DeriveSeed(config.rng_seed, static_cast<uint64_t>(index)));
  const int turns = static_cast<int>(
      rng.Between(config.min_turns_per_speaker, config.max_turns_per_speaker));
  std::string contexts[2];
  if (!config.context_seeds.empty()) {
    for (std::string& c : contexts) {
      c = config.context_seeds[rng.Below(config.context_seeds.size())];
    }
  }

  Conversation conv;
  conv.conv_id = fmt::format("{}-self-{}-{:05}", spec.agent.name, config.rng_seed, index);
  conv.evaluated_agent = spec.agent;
  conv.partner_agent = spec.agent;
  conv.evaluated_slot = SpeakerSlot::kFirst;
  conv.provenance = Provenance::kSelfChat;
  conv.metadata["context_first"] = contexts[0];
  conv.metadata["context_second"] = contexts[1];
  if (!config.task.empty()) conv.metadata["task"] = config.task;

  EndpointRequest request;
  for (int i = 0; i < 2 * turns; ++i) {
    const SpeakerSlot slot = i % 2 == 0 ? SpeakerSlot::kFirst : SpeakerSlot::kSecond;
    request.context = contexts[i % 2];
    std::string error;
    auto reply = AskWithRetries(endpoint, request, spec.max_retries, error);
    if (!reply) {
      return {std::nullopt, fmt::format("turn {}: {}", i, error)};
    }
    conv.utterances.push_back({i, slot, *reply});
    request.history.push_back({slot, std::move(*reply)});
  }
  return {std::move(conv), {}};
}

}  // namespace

std::string_view ToString(Transport transport) {
  return transport == Transport::kHttp ? "HTTP" : "SUBPROCESS";
}

Transport ParseTransport(std::string_view s) {
  if (s == "HTTP" || s == "http") return Transport::kHttp;
  if (s == "SUBPROCESS" || s == "subprocess") return Transport::kSubprocess;
  Fail(ErrorCode::kInvalidArgument, fmt::format("unknown transport \"{}\"", s));
}

json ToJson(const EndpointRequest& request) {
  json history = json::array();
  for (const HistoryTurn& t : request.history) {
    history.push_back({{"speaker_slot", ToString(t.speaker_slot)}, {"text", t.text}});
  }
  return {{"context", request.context}, {"history", history}};
}

EndpointRequest EndpointRequestFromJson(const json& j) {
  EndpointRequest r;
  r.context = j.value("context", std::string());
  for (const json& t : j.value("history", json::array())) {
    r.history.push_back({ParseSpeakerSlot(t.at("speaker_slot").get<std::string>()),
                         t.at("text").get<std::string>()});
  }
  return r;
}

SelfChatResult RunSelfChats(const ModelEndpoint& endpoint,
                            const SelfChatConfig& config,
                            const EndpointFactory& factory,
                            const ConversationSink& sink) {
  if (endpoint.agent.kind != AgentKind::kModel || endpoint.agent.name.empty()) {
    Fail(ErrorCode::kInvalidArgument, "self-chat endpoint must be a named MODEL agent");
  }
  if (config.num_conversations < 1 || config.min_turns_per_speaker < 1 ||
      config.max_turns_per_speaker < config.min_turns_per_speaker ||
      endpoint.max_retries < 0 || endpoint.timeout.count() <= 0) {
    Fail(ErrorCode::kInvalidArgument, "invalid self-chat configuration");
  }
  const EndpointFactory make =
      factory ? factory : EndpointFactory([endpoint] { return ConnectEndpoint(endpoint); });

  SelfChatResult result;
  {
    auto probe = make();
    std::string error;
    result.probe_ok =
        AskWithRetries(*probe, EndpointRequest{}, endpoint.max_retries, error).has_value();
    if (!result.probe_ok) {
      for (int i = 0; i < config.num_conversations; ++i) {
        result.failures.push_back({i, "health probe failed: " + error});
      }
      return result;
    }
  }

  std::vector<Outcome> outcomes(static_cast<size_t>(config.num_conversations));
  std::mutex sink_mutex;
  std::atomic<int> next{0};
  auto work = [&] {
    auto session = make();
    for (int i = next++; i < config.num_conversations; i = next++) {
      Outcome out = GenerateOne(*session, endpoint, config, i);
      if (out.conversation && sink) {
        std::lock_guard lock(sink_mutex);
        sink(*out.conversation);
      }
      outcomes[static_cast<size_t>(i)] = std::move(out);
    }
  };
  const int threads = std::clamp(config.parallelism, 1, config.num_conversations);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  }

  for (size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].conversation) {
      result.corpus.Add(std::move(*outcomes[i].conversation));
    } else {
      result.failures.push_back({static_cast<int>(i), outcomes[i].failure});
    }
  }
  return result;
}

TrainingPairs LoadTrainingPairs(std::istream& in) {
  TrainingPairs pairs;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (Trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      UtterancePair p{std::string(Trim(j.at("call").get<std::string>())),
                      std::string(Trim(j.at("response").get<std::string>()))};
      if (p.call.empty() || p.response.empty()) {
        Fail(ErrorCode::kInvalidArgument, "empty call or response");
      }
      pairs.insert(std::move(p));
    } catch (const json::exception& e) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("training pair line {}: {}", line_number, e.what()));
    } catch (const Error& e) {
      throw Error(e.code(),
                  fmt::format("training pair line {}: {}", line_number, e.what()));
    }
  }
  return pairs;
}

TrainingPairs LoadTrainingPairFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
  return LoadTrainingPairs(in);
}

OverlapReport TrainingOverlap(const Corpus& corpus, const TrainingPairs& training) {
  if (corpus.empty()) {
    Fail(ErrorCode::kInvalidArgument, "overlap audit needs a nonempty corpus");
  }
  OverlapReport report;
  report.empty_training_set = training.empty();
  for (const Conversation& c : corpus.conversations()) {
    for (size_t i = 0; i + 1 < c.utterances.size(); ++i) {
      UtterancePair p{std::string(Trim(c.utterances[i].text)),
                      std::string(Trim(c.utterances[i + 1].text))};
      ++report.total_pairs;
      if (training.contains(p)) {
        ++report.matched_pairs;
        report.matched.push_back(std::move(p));
      }
    }
  }
  if (report.total_pairs > 0) {
    report.fraction = static_cast<double>(report.matched_pairs) / report.total_pairs;
  }
  return report;
}

std::vector<RepetitionRow> RepetitionReport(const Corpus& corpus) {
  std::vector<RepetitionRow> rows;
  for (const Conversation& c : corpus.conversations()) {
    RepetitionRow row;
    row.conv_id = c.conv_id;
    std::unordered_set<std::string_view> seen;
    for (const Utterance& u : c.utterances) {
      ++row.utterances;
      if (!seen.insert(Trim(u.text)).second) ++row.repeated;
    }
    if (row.utterances > 0) {
      row.fraction = static_cast<double>(row.repeated) / row.utterances;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void WriteOverlapTsv(std::ostream& out, const OverlapReport& report) {
  out << "total_pairs\tmatched_pairs\tfraction\tempty_training_set\n";
  out << fmt::format("{}\t{}\t{:.4f}\t{}\n", report.total_pairs, report.matched_pairs,
                     report.fraction, report.empty_training_set);
}

void WriteRepetitionTsv(std::ostream& out, std::span<const RepetitionRow> rows) {
  out << "conv_id\tutterances\trepeated\tfraction\n";
  for (const RepetitionRow& r : rows) {
    out << fmt::format("{}\t{}\t{}\t{:.4f}\n", r.conv_id, r.utterances, r.repeated,
                       r.fraction);
  }
}

}  // namespace acute
