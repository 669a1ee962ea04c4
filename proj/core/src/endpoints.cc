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

// HTTP and subprocess transports for model endpoints.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <string>

#include <fmt/format.h>
#include <httplib.h>

#include "acute/errors.h"
#include "acute/selfchat.h"

namespace acute {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string ParseReply(const std::string& body) {
  json reply;
  try {
    reply = json::parse(body);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kInvalidArgument, fmt::format("malformed endpoint reply: {}", e.what()));
  }
  auto it = reply.find("text");
  if (!reply.is_object() || it == reply.end() || !it->is_string()) {
    Fail(ErrorCode::kInvalidArgument, "endpoint reply has no \"text\" string");
  }
  return it->get<std::string>();
}

class HttpEndpoint : public ChatEndpoint {
 public:
  explicit HttpEndpoint(const ModelEndpoint& endpoint) {
    const std::string& url = endpoint.address;
    const size_t scheme = url.find("://");
    const size_t path_start =
        url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    base_ = url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
    client_ = std::make_unique<httplib::Client>(base_);
    if (!client_->is_valid()) {
      Fail(ErrorCode::kInvalidArgument, fmt::format("bad endpoint URL {}", url));
    }
    const auto ms = endpoint.timeout;
    const auto sec = std::chrono::duration_cast<std::chrono::seconds>(ms);
    const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(ms - sec);
    client_->set_connection_timeout(sec.count(), usec.count());
    client_->set_read_timeout(sec.count(), usec.count());
    client_->set_write_timeout(sec.count(), usec.count());
  }

  std::string Respond(const EndpointRequest& request) override {
    auto res = client_->Post(path_, ToJson(request).dump(), "application/json");
    if (!res) {
      const auto err = res.error();
      Fail(err == httplib::Error::Read || err == httplib::Error::Write
               ? ErrorCode::kDeadlineExceeded
               : ErrorCode::kUnavailable,
           fmt::format("{}{}: {}", base_, path_, httplib::to_string(err)));
    }
    if (res->status != 200) {
      Fail(ErrorCode::kUnavailable,
           fmt::format("{}{} answered HTTP {}", base_, path_, res->status));
    }
    return ParseReply(res->body);
  }

 private:
  std::string base_;
  std::string path_;
  std::unique_ptr<httplib::Client> client_;
};

// Runs `sh -c command` with stdin/stdout on a socketpair and speaks one JSON
// record per line. The child is restarted after any failure.
class SubprocessEndpoint : public ChatEndpoint {
 public:
  explicit SubprocessEndpoint(const ModelEndpoint& endpoint)
      : command_(endpoint.address), timeout_(endpoint.timeout) {}

  ~SubprocessEndpoint() override { Stop(); }

  std::string Respond(const EndpointRequest& request) override {
    if (pid_ < 0) Start();
    try {
      WriteAll(ToJson(request).dump() + "\n");
      return ParseReply(ReadLine());
    } catch (const Error&) {
      Stop();
      throw;
    }
  }

 private:
  void Start() {
    int fds[2];
    if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
      Fail(ErrorCode::kUnavailable, fmt::format("socketpair: {}", std::strerror(errno)));
    }
    const pid_t pid = fork();
    if (pid < 0) {
      close(fds[0]);
      close(fds[1]);
      Fail(ErrorCode::kUnavailable, fmt::format("fork: {}", std::strerror(errno)));
    }
    if (pid == 0) {
      dup2(fds[1], STDIN_FILENO);
      dup2(fds[1], STDOUT_FILENO);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(fds[1]);
    fd_ = fds[0];
    pid_ = pid;
    buffer_.clear();
  }

  void Stop() {
    if (fd_ >= 0) close(fd_);
    fd_ = -1;
    if (pid_ > 0) {
      kill(pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
    }
    pid_ = -1;
  }

  void WriteAll(const std::string& data) {
    size_t sent = 0;
    while (sent < data.size()) {
      const ssize_t n = send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        Fail(ErrorCode::kUnavailable,
             fmt::format("endpoint process closed its input: {}", std::strerror(errno)));
      }
      sent += static_cast<size_t>(n);
    }
  }

  std::string ReadLine() {
    const auto deadline = Clock::now() + timeout_;
    for (;;) {
      if (const size_t nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - Clock::now());
      if (left.count() <= 0) {
        Fail(ErrorCode::kDeadlineExceeded,
             fmt::format("endpoint process timed out after {} ms", timeout_.count()));
      }
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0 && errno == EINTR) continue;
      if (ready <= 0) continue;
      char chunk[4096];
      const ssize_t n = recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) Fail(ErrorCode::kUnavailable, "endpoint process exited");
      buffer_.append(chunk, static_cast<size_t>(n));
    }
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  int fd_ = -1;
  pid_t pid_ = -1;
  std::string buffer_;
};

}  // namespace

std::unique_ptr<ChatEndpoint> ConnectEndpoint(const ModelEndpoint& endpoint) {
  if (endpoint.address.empty()) {
    Fail(ErrorCode::kInvalidArgument, "endpoint address is empty");
  }
  if (endpoint.timeout.count() <= 0) {
    Fail(ErrorCode::kInvalidArgument, "endpoint timeout must be positive");
  }
  if (endpoint.transport == Transport::kHttp) {
    return std::make_unique<HttpEndpoint>(endpoint);
  }
  return std::make_unique<SubprocessEndpoint>(endpoint);
}

}  // namespace acute
