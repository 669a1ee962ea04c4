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

#ifndef ACUTE_QUESTIONS_H_
#define ACUTE_QUESTIONS_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace acute {

enum class Axis {
  kEngagingness,
  kInterestingness,
  kHumanness,
  kKnowledgeable,
  kCustom,
};

std::string_view ToString(Axis axis);
Axis ParseAxis(std::string_view s);

struct Question {
  std::string question_id;
  Axis axis = Axis::kCustom;
  std::string prompt_text;
  // Contains the placeholder "{n}" for the speaker number, e.g.
  // "Speaker {n} sounds more human".
  std::string choice_text_template;

  // Choice text for speaker 1 (left) or 2 (right).
  std::string ChoiceText(int speaker_number) const;

  friend bool operator==(const Question&, const Question&) = default;
};

// The four high-agreement phrasings, one per axis, with their exact wording.
std::vector<Question> BuiltinQuestions();

class QuestionRegistry {
 public:
  QuestionRegistry() = default;
  static QuestionRegistry WithBuiltins();

  // Throws kAlreadyExists on a duplicate id, kInvalidArgument on empty text.
  void Register(Question question);

  const Question* Find(std::string_view question_id) const;
  const Question& Get(std::string_view question_id) const;
  const std::vector<Question>& all() const { return questions_; }

 private:
  std::vector<Question> questions_;
};

// One question record per line; same strictness rules as conversation logs
// but every failure is fatal.
void LoadQuestions(std::istream& in, QuestionRegistry& registry);
void LoadQuestionFile(const std::filesystem::path& path,
                      QuestionRegistry& registry);

void to_json(nlohmann::json& j, const Question& q);
void from_json(const nlohmann::json& j, Question& q);

}  // namespace acute

#endif  // ACUTE_QUESTIONS_H_
