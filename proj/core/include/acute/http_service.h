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

#ifndef ACUTE_HTTP_SERVICE_H_
#define ACUTE_HTTP_SERVICE_H_

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "acute/errors.h"
#include "acute/run.h"

namespace acute {

// Directory-per-run hosting: `<root>/<run_id>/events.jsonl`.
class RunHost {
 public:
  explicit RunHost(std::filesystem::path root, Clock clock = SystemClock());

  // Reopens every run directory found under the root. Returns the count.
  int LoadExisting();

  // Throws kAlreadyExists for a known run_id.
  Run& Start(RunSetup setup);

  // Throws kNotFound.
  Run& Get(std::string_view run_id);

  std::vector<std::string> run_ids() const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  Clock clock_;
  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<Run>, std::less<>> runs_;
};

int HttpStatusFor(ErrorCode code);

// JSON over HTTP:
//   POST /runs                        body: RunSetup
//   GET  /runs
//   GET  /runs/{id}/task?worker={wid}
//   POST /runs/{id}/annotations       body: SubmitRequest
//   GET  /runs/{id}/report
//   GET  /runs/{id}/status
//   POST /runs/{id}/close
// Errors are {"error": {"code": ..., "message": ...}}.
class HttpServer {
 public:
  explicit HttpServer(RunHost& host);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws kUnavailable
  // when the address cannot be bound.
  int Bind(const std::string& address, int port);

  // Blocks until Stop. Requires Bind.
  void Serve();

  // Safe from any thread; in-flight requests finish first.
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace acute

#endif  // ACUTE_HTTP_SERVICE_H_
