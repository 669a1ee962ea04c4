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

#include "acute/event_log.h"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "acute/errors.h"

namespace acute {
namespace {

using nlohmann::json;

struct Scan {
  std::vector<LogRecord> records;
  uint64_t valid_bytes = 0;
};

Scan ScanFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, fmt::format("cannot read {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string content = buffer.str();

  Scan scan;
  size_t pos = 0;
  while (pos < content.size()) {
    const size_t nl = content.find('\n', pos);
    const bool last = nl == std::string::npos;
    const std::string line = content.substr(pos, last ? std::string::npos : nl - pos);
    LogRecord record;
    bool ok = false;
    try {
      json j = json::parse(line);
      record.seq = j.at("seq").get<uint64_t>();
      record.type = j.at("type").get<std::string>();
      record.data = j.value("data", json::object());
      ok = true;
    } catch (const json::exception&) {
    }
    if (last) break;  // unterminated: torn write, whether or not it parses
    if (!ok) {
      // A bad line is tolerated only as the final (torn) line.
      if (content.find('\n', nl + 1) == std::string::npos &&
          nl + 1 == content.size()) {
        break;
      }
      Fail(ErrorCode::kDataLoss,
           fmt::format("{}: corrupt record at byte {}", path.string(), pos));
    }
    if (record.seq != scan.records.size() + 1) {
      Fail(ErrorCode::kDataLoss,
           fmt::format("{}: expected seq {}, found {}", path.string(),
                       scan.records.size() + 1, record.seq));
    }
    scan.records.push_back(std::move(record));
    pos = nl + 1;
    scan.valid_bytes = pos;
  }
  return scan;
}

}  // namespace

EventLog::EventLog(EventLog&& other) noexcept
    : path_(std::move(other.path_)),
      fd_(std::exchange(other.fd_, -1)),
      sync_(other.sync_),
      next_seq_(other.next_seq_) {}

EventLog& EventLog::operator=(EventLog&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) close(fd_);
    path_ = std::move(other.path_);
    fd_ = std::exchange(other.fd_, -1);
    sync_ = other.sync_;
    next_seq_ = other.next_seq_;
  }
  return *this;
}

EventLog::~EventLog() {
  if (fd_ >= 0) close(fd_);
}

EventLog EventLog::Create(const std::filesystem::path& path, bool sync) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) {
    Fail(errno == EEXIST ? ErrorCode::kAlreadyExists : ErrorCode::kIo,
         fmt::format("cannot create {}: {}", path.string(), std::strerror(errno)));
  }
  return EventLog(path, fd, sync, 1);
}

EventLog EventLog::Open(const std::filesystem::path& path, bool sync,
                        std::vector<LogRecord>* records) {
  Scan scan = ScanFile(path);
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (fd < 0) {
    Fail(ErrorCode::kIo, fmt::format("cannot open {}: {}", path.string(), std::strerror(errno)));
  }
  if (::ftruncate(fd, static_cast<off_t>(scan.valid_bytes)) != 0) {
    const int err = errno;
    close(fd);
    Fail(ErrorCode::kIo, fmt::format("cannot truncate {}: {}", path.string(), std::strerror(err)));
  }
  const uint64_t next = scan.records.size() + 1;
  if (records != nullptr) *records = std::move(scan.records);
  return EventLog(path, fd, sync, next);
}

std::vector<LogRecord> EventLog::Read(const std::filesystem::path& path) {
  return ScanFile(path).records;
}

uint64_t EventLog::Append(const std::string& type, const json& data) {
  if (fd_ < 0) Fail(ErrorCode::kFailedPrecondition, "event log is closed");
  const uint64_t seq = next_seq_;
  const std::string line =
      json{{"seq", seq}, {"type", type}, {"data", data}}.dump() + "\n";
  size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      Fail(ErrorCode::kIo, fmt::format("append to {} failed: {}", path_.string(),
                                       std::strerror(errno)));
    }
    written += static_cast<size_t>(n);
  }
  if (sync_ && ::fdatasync(fd_) != 0) {
    Fail(ErrorCode::kIo, fmt::format("fdatasync {} failed: {}", path_.string(),
                                     std::strerror(errno)));
  }
  ++next_seq_;
  return seq;
}

}  // namespace acute
