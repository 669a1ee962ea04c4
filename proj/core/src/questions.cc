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

#include "acute/questions.h"

#include <fstream>
#include <istream>

#include <fmt/format.h>

#include "acute/corpus.h"
#include "acute/errors.h"

namespace acute {

using nlohmann::json;

std::string_view ToString(Axis axis) {
  switch (axis) {
    case Axis::kEngagingness:
      return "ENGAGINGNESS";
    case Axis::kInterestingness:
      return "INTERESTINGNESS";
    case Axis::kHumanness:
      return "HUMANNESS";
    case Axis::kKnowledgeable:
      return "KNOWLEDGEABLE";
    case Axis::kCustom:
      return "CUSTOM";
  }
  return "CUSTOM";
}

Axis ParseAxis(std::string_view s) {
  for (Axis a : {Axis::kEngagingness, Axis::kInterestingness, Axis::kHumanness,
                 Axis::kKnowledgeable, Axis::kCustom}) {
    if (ToString(a) == s) return a;
  }
  Fail(ErrorCode::kInvalidArgument, fmt::format("unknown axis \"{}\"", s));
}

std::string Question::ChoiceText(int speaker_number) const {
  std::string out = choice_text_template;
  const std::string number = std::to_string(speaker_number);
  for (size_t pos = out.find("{n}"); pos != std::string::npos;
       pos = out.find("{n}", pos + number.size())) {
    out.replace(pos, 3, number);
  }
  return out;
}

std::vector<Question> BuiltinQuestions() {
  return {
      {"engagingness", Axis::kEngagingness,
       "Who would you prefer to talk to for a long conversation?",
       "I would prefer to talk to Speaker {n}"},
      {"interestingness", Axis::kInterestingness,
       "If you had to say one of these speakers is interesting and one is "
       "boring, who would you say is more interesting?",
       "Speaker {n} is more interesting"},
      {"humanness", Axis::kHumanness, "Which speaker sounds more human?",
       "Speaker {n} sounds more human"},
      {"knowledgeable", Axis::kKnowledgeable,
       "If you had to say that one speaker is more knowledgeable and one is "
       "more ignorant, who is more knowledgeable?",
       "Speaker {n} is more knowledgeable"},
  };
}

QuestionRegistry QuestionRegistry::WithBuiltins() {
  QuestionRegistry registry;
  for (Question& q : BuiltinQuestions()) registry.Register(std::move(q));
  return registry;
}

void QuestionRegistry::Register(Question question) {
  if (Trim(question.question_id).empty() || Trim(question.prompt_text).empty() ||
      Trim(question.choice_text_template).empty()) {
    Fail(ErrorCode::kInvalidArgument,
         fmt::format("question \"{}\" has empty id, prompt or choice template",
                     question.question_id));
  }
  if (Find(question.question_id) != nullptr) {
    Fail(ErrorCode::kAlreadyExists,
         fmt::format("duplicate question_id \"{}\"", question.question_id));
  }
  questions_.push_back(std::move(question));
}

const Question* QuestionRegistry::Find(std::string_view question_id) const {
  for (const Question& q : questions_) {
    if (q.question_id == question_id) return &q;
  }
  return nullptr;
}

const Question& QuestionRegistry::Get(std::string_view question_id) const {
  const Question* q = Find(question_id);
  if (q == nullptr) {
    Fail(ErrorCode::kNotFound, fmt::format("unknown question \"{}\"", question_id));
  }
  return *q;
}

void to_json(json& j, const Question& q) {
  j = json{{"question_id", q.question_id},
           {"axis", ToString(q.axis)},
           {"prompt_text", q.prompt_text},
           {"choice_text_template", q.choice_text_template}};
}

void from_json(const json& j, Question& q) {
  if (!j.is_object()) Fail(ErrorCode::kInvalidArgument, "question is not an object");
  q.question_id = j.at("question_id").get<std::string>();
  q.axis = j.contains("axis") ? ParseAxis(j.at("axis").get<std::string>())
                              : Axis::kCustom;
  q.prompt_text = j.at("prompt_text").get<std::string>();
  q.choice_text_template = j.at("choice_text_template").get<std::string>();
}

void LoadQuestions(std::istream& in, QuestionRegistry& registry) {
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (Trim(line).empty()) continue;
    try {
      registry.Register(json::parse(line).get<Question>());
    } catch (const json::exception& e) {
      Fail(ErrorCode::kInvalidArgument,
           fmt::format("question line {}: {}", line_number, e.what()));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("question line {}: {}", line_number, e.what()));
    }
  }
}

void LoadQuestionFile(const std::filesystem::path& path,
                      QuestionRegistry& registry) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
  LoadQuestions(in, registry);
}

}  // namespace acute
