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

#include "acute/http_service.h"

#include <algorithm>
#include <exception>
#include <utility>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace acute {
namespace {

using nlohmann::json;

constexpr const char* kJson = "application/json";

void Reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

void ReplyError(httplib::Response& res, ErrorCode code, const std::string& message) {
  Reply(res, HttpStatusFor(code),
        {{"error", {{"code", ErrorCodeName(code)}, {"message", message}}}});
}

json ParseBody(const httplib::Request& req) {
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    Fail(ErrorCode::kInvalidArgument, "request body must be a JSON object");
  }
  return body;
}

// Wraps a handler so every failure becomes a JSON error response.
template <typename F>
httplib::Server::Handler Guard(F f) {
  return [f = std::move(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      ReplyError(res, e.code(), e.what());
    } catch (const json::exception& e) {
      ReplyError(res, ErrorCode::kInvalidArgument, e.what());
    } catch (const std::exception& e) {
      ReplyError(res, ErrorCode::kIo, e.what());
    }
  };
}

}  // namespace

RunHost::RunHost(std::filesystem::path root, Clock clock)
    : root_(std::move(root)), clock_(std::move(clock)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) {
    Fail(ErrorCode::kIo, fmt::format("cannot create {}: {}", root_.string(), ec.message()));
  }
}

int RunHost::LoadExisting() {
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root_)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / kEventLogName)) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  std::lock_guard lock(mu_);
  int loaded = 0;
  for (const auto& dir : dirs) {
    auto run = Run::Open(dir, clock_);
    const std::string id = run->run_id();
    if (runs_.emplace(id, std::move(run)).second) ++loaded;
  }
  return loaded;
}

Run& RunHost::Start(RunSetup setup) {
  if (setup.config.run_id.empty()) setup.config.run_id = setup.plan.run_id;
  std::lock_guard lock(mu_);
  if (runs_.contains(setup.config.run_id)) {
    Fail(ErrorCode::kAlreadyExists,
         fmt::format("run {} already exists", setup.config.run_id));
  }
  auto run = Run::Start(root_, std::move(setup), clock_);
  Run& ref = *run;
  runs_.emplace(ref.run_id(), std::move(run));
  return ref;
}

Run& RunHost::Get(std::string_view run_id) {
  std::lock_guard lock(mu_);
  auto it = runs_.find(run_id);
  if (it == runs_.end()) Fail(ErrorCode::kNotFound, fmt::format("unknown run {}", run_id));
  return *it->second;
}

std::vector<std::string> RunHost::run_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, run] : runs_) ids.push_back(id);
  return ids;
}

int HttpStatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kAlreadyExists:
    case ErrorCode::kFailedPrecondition:
    case ErrorCode::kDeadlineExceeded:
      return 409;
    case ErrorCode::kUnavailable:
      return 503;
    case ErrorCode::kDataLoss:
    case ErrorCode::kIo:
      return 500;
  }
  return 500;
}

struct HttpServer::Impl {
  RunHost& host;
  httplib::Server server;
  bool bound = false;

  explicit Impl(RunHost& h) : host(h) {}
};

HttpServer::HttpServer(RunHost& host) : impl_(std::make_unique<Impl>(host)) {
  RunHost& h = host;
  httplib::Server& s = impl_->server;
  // Without SO_REUSEPORT, so a second server cannot share a bound port.
  s.set_socket_options([](socket_t sock) {
    const int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });

  s.Post("/runs", Guard([&h](const httplib::Request& req, httplib::Response& res) {
    Run& run = h.Start(RunSetupFromJson(ParseBody(req)));
    Reply(res, 201, {{"run_id", run.run_id()}, {"status", ToJson(run.Status())}});
  }));

  s.Get("/runs", Guard([&h](const httplib::Request&, httplib::Response& res) {
    Reply(res, 200, {{"runs", h.run_ids()}});
  }));

  s.Get(R"(/runs/([^/]+)/task)",
        Guard([&h](const httplib::Request& req, httplib::Response& res) {
          const std::string worker = req.get_param_value("worker");
          if (worker.empty()) {
            Fail(ErrorCode::kInvalidArgument, "missing worker query parameter");
          }
          auto task = h.Get(req.matches[1].str()).FetchTask(worker);
          if (task) {
            Reply(res, 200, {{"status", "TASK"}, {"task", ToJson(*task)}});
          } else {
            Reply(res, 200, {{"status", "NO_TASK"}});
          }
        }));

  s.Post(R"(/runs/([^/]+)/annotations)",
         Guard([&h](const httplib::Request& req, httplib::Response& res) {
           Run& run = h.Get(req.matches[1].str());
           const Annotation a = run.Submit(SubmitRequestFromJson(ParseBody(req)));
           Reply(res, 201,
                 {{"status", "ACCEPTED"},
                  {"annotation_id", a.annotation_id},
                  {"matchup_id", a.matchup_id}});
         }));

  s.Get(R"(/runs/([^/]+)/report)",
        Guard([&h](const httplib::Request& req, httplib::Response& res) {
          Reply(res, 200, ToJson(h.Get(req.matches[1].str()).Report()));
        }));

  s.Get(R"(/runs/([^/]+)/status)",
        Guard([&h](const httplib::Request& req, httplib::Response& res) {
          Reply(res, 200, ToJson(h.Get(req.matches[1].str()).Status()));
        }));

  s.Post(R"(/runs/([^/]+)/close)",
         Guard([&h](const httplib::Request& req, httplib::Response& res) {
           Run& run = h.Get(req.matches[1].str());
           run.Close();
           Reply(res, 200, ToJson(run.Status()));
         }));
}

HttpServer::~HttpServer() { Stop(); }

int HttpServer::Bind(const std::string& address, int port) {
  int bound = -1;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(address);
  } else if (impl_->server.bind_to_port(address, port)) {
    bound = port;
  }
  if (bound <= 0) {
    Fail(ErrorCode::kUnavailable, fmt::format("cannot bind {}:{}", address, port));
  }
  impl_->bound = true;
  return bound;
}

void HttpServer::Serve() {
  if (!impl_->bound) Fail(ErrorCode::kFailedPrecondition, "Serve called before Bind");
  impl_->server.listen_after_bind();
}

void HttpServer::Stop() { impl_->server.stop(); }

}  // namespace acute
