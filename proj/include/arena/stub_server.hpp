#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

// In-process chat-completions endpoint for exercising the remote backend
// without a provider. Replies are served from a queue, falling back to a
// configurable default; failures and raw bodies can be injected.

namespace httplib {
class Server;
}

namespace arena::remote {

struct StubReply {
  std::string content;
  // (name, arguments-as-json-text) pairs, shipped in provider format.
  std::vector<std::pair<std::string, std::string>> tool_calls;
  long long prompt_tokens = 17;
  long long completion_tokens = 5;
};

struct StubRequest {
  std::string authorization;
  nlohmann::json body;
};

class StubLlmServer {
 public:
  StubLlmServer();
  ~StubLlmServer();
  StubLlmServer(const StubLlmServer&) = delete;
  StubLlmServer& operator=(const StubLlmServer&) = delete;

  int port() const { return port_; }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  void enqueue(StubReply reply);
  void set_default(StubReply reply);
  // The next `count` requests answer with this HTTP status and no body.
  void fail_next(int status, int count = 1);
  // The next request answers 200 with exactly this body.
  void reply_raw(std::string body);
  // Answer every request by quoting its own system message back.
  void set_echo(bool on);

  std::vector<StubRequest> requests() const;
  size_t request_count() const;

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;

  mutable std::mutex mutex_;
  std::deque<StubReply> queue_;
  StubReply default_reply_;
  std::deque<int> failures_;
  std::deque<std::string> raw_bodies_;
  std::vector<StubRequest> requests_;
  bool echo_ = false;
};

}  // namespace arena::remote
