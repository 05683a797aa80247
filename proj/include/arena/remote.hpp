#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>

#include "arena/agents.hpp"

// HTTP chat-completions backend. The four-layer bundle maps onto the wire
// format as one system message (identity) plus one user message (context,
// tools rendered as function schemas, format instructions).

namespace arena::remote {

struct AdapterConfig {
  std::string endpoint = "http://127.0.0.1:8080";
  std::string model = "default";
  double temperature = 0.0;
  int max_retries = 3;
  int timeout_ms = 30000;
  int requests_per_minute = 0;  // 0: unpaced
  int retry_backoff_ms = 250;   // doubles per attempt
  std::string api_key_env = "ARENA_API_KEY";
};

enum class RemoteErrorKind { transport, timeout, http_status, malformed };

class RemoteError : public std::runtime_error {
 public:
  RemoteError(RemoteErrorKind kind, const std::string& message, int status = 0)
      : std::runtime_error(message), kind_(kind), status_(status) {}
  RemoteErrorKind kind() const { return kind_; }
  int status() const { return status_; }

 private:
  RemoteErrorKind kind_;
  int status_;
};

struct AdapterStats {
  long long requests = 0;  // HTTP round trips, retries included
  long long retries = 0;
  long long failures = 0;  // chats that gave up
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
};

class RemoteBackend : public agents::Backend {
 public:
  explicit RemoteBackend(AdapterConfig config);
  std::string name() const override { return "remote"; }
  agents::AgentResponse chat(const agents::ContextBundle& bundle,
                             const agents::DispatchInfo& info) override;
  // Fan-out chats run on their own threads; results keep member order.
  std::vector<agents::AgentResponse> chat_many(
      const std::vector<agents::ContextBundle>& bundles,
      const std::vector<agents::DispatchInfo>& infos) override;
  AdapterStats stats() const;

 private:
  void pace();

  AdapterConfig config_;
  std::string host_;
  int port_ = 0;
  mutable std::mutex mutex_;
  AdapterStats stats_;
  std::chrono::steady_clock::time_point next_allowed_{};
};

}  // namespace arena::remote
