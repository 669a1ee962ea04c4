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

// Line-oriented chat endpoint for subprocess transport tests.
//   echo_endpoint echo    answers every request
//   echo_endpoint silent  reads requests and never answers
//   echo_endpoint empty   answers with empty text
//   echo_endpoint garbage answers with a line that is not JSON
//   echo_endpoint once    answers one request, then exits

#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "echo";
  std::string line;
  while (std::getline(std::cin, line)) {
    if (mode == "silent") continue;
    if (mode == "garbage") {
      std::cout << "not json" << std::endl;
      continue;
    }
    const auto request = nlohmann::json::parse(line, nullptr, false);
    if (request.is_discarded()) return 1;
    const size_t turns = request.value("history", nlohmann::json::array()).size();
    nlohmann::json reply;
    reply["text"] = mode == "empty"
                        ? std::string()
                        : "turn " + std::to_string(turns) + " about " +
                              request.value("context", std::string("nothing"));
    std::cout << reply.dump() << std::endl;
    if (mode == "once") return 0;
  }
  return 0;
}
