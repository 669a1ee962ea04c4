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

#ifndef ACUTE_EVENT_LOG_H_
#define ACUTE_EVENT_LOG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace acute {

struct LogRecord {
  uint64_t seq = 0;
  std::string type;
  nlohmann::json data;
};

// Append-only, sequence-numbered, one JSON record per line. Each Append is a
// single write(2) of a complete line, optionally followed by fdatasync, so a
// killed process leaves at most one torn final line, which Open discards.
class EventLog {
 public:
  EventLog() = default;
  EventLog(EventLog&& other) noexcept;
  EventLog& operator=(EventLog&& other) noexcept;
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;
  ~EventLog();

  // Throws kAlreadyExists if the file exists and kIo if it cannot be created.
  static EventLog Create(const std::filesystem::path& path, bool sync);

  // Reads every record, truncates a torn tail and reopens for appending.
  // Throws kDataLoss on corruption before the tail, kIo on I/O failure.
  static EventLog Open(const std::filesystem::path& path, bool sync,
                       std::vector<LogRecord>* records);

  // Read-only scan with the same tail tolerance; the file is not modified.
  static std::vector<LogRecord> Read(const std::filesystem::path& path);

  // Returns the record's sequence number. Throws kIo on write failure.
  uint64_t Append(const std::string& type, const nlohmann::json& data);

  uint64_t next_seq() const { return next_seq_; }
  bool is_open() const { return fd_ >= 0; }
  const std::filesystem::path& path() const { return path_; }

 private:
  EventLog(std::filesystem::path path, int fd, bool sync, uint64_t next_seq)
      : path_(std::move(path)), fd_(fd), sync_(sync), next_seq_(next_seq) {}

  std::filesystem::path path_;
  int fd_ = -1;
  bool sync_ = false;
  uint64_t next_seq_ = 1;
};

}  // namespace acute

#endif  // ACUTE_EVENT_LOG_H_
