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

#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>

#include "acute/errors.h"
#include "acute/event_log.h"
#include "fixtures.h"

namespace acute {
namespace {

using testing::TempDir;

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void AppendRaw(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::app);
  out << bytes;
}

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kIo;
}

TEST_CASE("records are numbered and read back") {
  TempDir dir;
  const auto path = dir / "log.jsonl";
  {
    EventLog log = EventLog::Create(path, false);
    CHECK(log.is_open());
    CHECK(log.Append("a", {{"x", 1}}) == 1);
    CHECK(log.Append("b", nlohmann::json::object()) == 2);
    CHECK(log.next_seq() == 3);
  }
  const auto records = EventLog::Read(path);
  REQUIRE(records.size() == 2);
  CHECK(records[0].type == "a");
  CHECK(records[0].data["x"] == 1);
  CHECK(records[1].seq == 2);
  CHECK(CodeOf([&] { EventLog::Create(path, false); }) == ErrorCode::kAlreadyExists);
  CHECK(CodeOf([&] { EventLog::Create(dir / "no" / "such.jsonl", false); }) ==
        ErrorCode::kIo);
  CHECK(CodeOf([&] { EventLog::Read(dir / "missing"); }) == ErrorCode::kIo);
}

TEST_CASE("opening continues the sequence") {
  TempDir dir;
  const auto path = dir / "log.jsonl";
  EventLog::Create(path, true).Append("a", {});
  std::vector<LogRecord> records;
  EventLog log = EventLog::Open(path, true, &records);
  CHECK(records.size() == 1);
  CHECK(log.Append("b", {}) == 2);
  CHECK(EventLog::Read(path).size() == 2);
}

TEST_CASE("a torn final line is dropped") {
  TempDir dir;
  const auto path = dir / "log.jsonl";
  {
    EventLog log = EventLog::Create(path, false);
    log.Append("a", {});
    log.Append("b", {});
  }
  const std::string clean = Slurp(path);
  AppendRaw(path, R"({"seq":3,"type":"c","da)");
  CHECK(EventLog::Read(path).size() == 2);
  CHECK(Slurp(path) != clean);  // Read leaves the file alone
  {
    EventLog log = EventLog::Open(path, false, nullptr);
    CHECK(Slurp(path) == clean);
    CHECK(log.Append("c", {}) == 3);
  }
  CHECK(EventLog::Read(path).back().type == "c");
}

TEST_CASE("an unterminated but complete record counts as torn") {
  TempDir dir;
  const auto path = dir / "log.jsonl";
  EventLog::Create(path, false).Append("a", {});
  AppendRaw(path, R"({"seq":2,"type":"b","data":{}})");
  CHECK(EventLog::Read(path).size() == 1);
}

TEST_CASE("a garbled final line with a newline is dropped") {
  TempDir dir;
  const auto path = dir / "log.jsonl";
  EventLog::Create(path, false).Append("a", {});
  AppendRaw(path, "\x01\x02 garbage\n");
  CHECK(EventLog::Read(path).size() == 1);
}

TEST_CASE("corruption before the tail is data loss") {
  TempDir dir;
  const auto path = dir / "log.jsonl";
  EventLog::Create(path, false).Append("a", {});
  AppendRaw(path, "oops\n");
  AppendRaw(path, R"({"seq":2,"type":"b","data":{}})" "\n");
  CHECK(CodeOf([&] { EventLog::Read(path); }) == ErrorCode::kDataLoss);
  CHECK(CodeOf([&] { EventLog::Open(path, false, nullptr); }) == ErrorCode::kDataLoss);
}

TEST_CASE("sequence gaps are data loss") {
  TempDir dir;
  const auto path = dir / "log.jsonl";
  EventLog::Create(path, false).Append("a", {});
  AppendRaw(path, R"({"seq":3,"type":"b","data":{}})" "\n");
  CHECK(CodeOf([&] { EventLog::Read(path); }) == ErrorCode::kDataLoss);
}

TEST_CASE("a moved-from log is closed") {
  TempDir dir;
  EventLog a = EventLog::Create(dir / "log.jsonl", false);
  EventLog b = std::move(a);
  CHECK_FALSE(a.is_open());
  CHECK(b.is_open());
  CHECK(CodeOf([&] { a.Append("x", {}); }) == ErrorCode::kFailedPrecondition);
}

}  // namespace
}  // namespace acute
