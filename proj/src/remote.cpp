#include "arena/remote.hpp"

#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace arena::remote {

namespace {

// endpoint -> (host, port); accepts http://host:port with an optional slash.
void split_endpoint(const std::string& endpoint, std::string& host, int& port) {
  std::string rest = endpoint;
  const std::string scheme = "http://";
  if (rest.rfind(scheme, 0) == 0) rest = rest.substr(scheme.size());
  while (!rest.empty() && rest.back() == '/') rest.pop_back();
  const size_t colon = rest.rfind(':');
  if (colon == std::string::npos) {
    host = rest;
    port = 80;
    return;
  }
  host = rest.substr(0, colon);
  port = std::atoi(rest.c_str() + colon + 1);
}

bool retryable_status(int status) {
  return status == 429 || status == 500 || status == 502 || status == 503 || status == 504;
}

nlohmann::json request_body(const AdapterConfig& config, const agents::ContextBundle& bundle) {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", bundle.soul_prompt}});
  std::string user = bundle.stage_context;
  const std::string tools = bundle.render_tools();
  if (!tools.empty()) {
    if (!user.empty()) user += "\n";
    user += tools;
  }
  if (!bundle.format_instructions.empty()) {
    if (!user.empty()) user += "\n";
    user += bundle.format_instructions;
  }
  messages.push_back({{"role", "user"}, {"content", user}});

  nlohmann::json body;
  body["model"] = config.model;
  body["temperature"] = config.temperature;
  body["messages"] = std::move(messages);
  if (!bundle.tool_schemas.empty()) {
    nlohmann::json tool_list = nlohmann::json::array();
    for (const agents::ToolSchema& t : bundle.tool_schemas) {
      tool_list.push_back({{"type", "function"},
                           {"function",
                            {{"name", t.name},
                             {"description", t.description},
                             {"parameters", t.parameters}}}});
    }
    body["tools"] = std::move(tool_list);
  }
  return body;
}

agents::AgentResponse parse_reply(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(RemoteErrorKind::malformed,
                      std::string("unparseable completion body: ") + e.what());
  }
  agents::AgentResponse response;
  try {
    const nlohmann::json& choices = j.at("choices");
    if (!choices.is_array() || choices.empty()) {
      throw RemoteError(RemoteErrorKind::malformed, "completion carries no choices");
    }
    const nlohmann::json& message = choices.at(0).at("message");
    if (message.contains("content") && message["content"].is_string()) {
      response.text = message["content"].get<std::string>();
    }
    if (message.contains("tool_calls")) {
      for (const nlohmann::json& call : message["tool_calls"]) {
        agents::ToolCall tc;
        tc.name = call.at("function").at("name").get<std::string>();
        const nlohmann::json& args = call.at("function").at("arguments");
        if (args.is_string()) {
          tc.arguments = nlohmann::json::parse(args.get<std::string>());
        } else {
          tc.arguments = args;
        }
        response.tool_calls.push_back(std::move(tc));
      }
    }
    if (j.contains("usage")) {
      response.prompt_tokens = j["usage"].value("prompt_tokens", 0LL);
      response.completion_tokens = j["usage"].value("completion_tokens", 0LL);
    }
  } catch (const RemoteError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw RemoteError(RemoteErrorKind::malformed,
                      std::string("completion shape unexpected: ") + e.what());
  }
  return response;
}

}  // namespace

RemoteBackend::RemoteBackend(AdapterConfig config) : config_(std::move(config)) {
  split_endpoint(config_.endpoint, host_, port_);
  next_allowed_ = std::chrono::steady_clock::now();
}

void RemoteBackend::pace() {
  if (config_.requests_per_minute <= 0) return;
  const auto interval =
      std::chrono::microseconds(60'000'000LL / config_.requests_per_minute);
  std::chrono::steady_clock::time_point wake;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    if (next_allowed_ < now) next_allowed_ = now;
    wake = next_allowed_;
    next_allowed_ += interval;
  }
  std::this_thread::sleep_until(wake);
}

agents::AgentResponse RemoteBackend::chat(const agents::ContextBundle& bundle,
                                          const agents::DispatchInfo& info) {
  (void)info;
  const nlohmann::json body = request_body(config_, bundle);

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  int backoff_ms = config_.retry_backoff_ms;
  for (int attempt = 0;; ++attempt) {
    pace();
    httplib::Client client(host_, port_);
    client.set_connection_timeout(0, config_.timeout_ms * 1000LL);
    client.set_read_timeout(0, config_.timeout_ms * 1000LL);
    client.set_write_timeout(0, config_.timeout_ms * 1000LL);

    {
      std::lock_guard<std::mutex> lock(mutex_);
      ++stats_.requests;
    }
    httplib::Result result =
        client.Post("/v1/chat/completions", headers, body.dump(), "application/json");

    bool retry = false;
    std::string error;
    RemoteErrorKind kind = RemoteErrorKind::transport;
    int status = 0;
    if (!result) {
      retry = true;
      kind = result.error() == httplib::Error::ConnectionTimeout ||
                     result.error() == httplib::Error::Read
                 ? RemoteErrorKind::timeout
                 : RemoteErrorKind::transport;
      error = "transport error: " + httplib::to_string(result.error());
    } else if (result->status != 200) {
      status = result->status;
      kind = RemoteErrorKind::http_status;
      error = "endpoint returned status " + std::to_string(status);
      retry = retryable_status(status);
    } else {
      agents::AgentResponse response = parse_reply(result->body);
      std::lock_guard<std::mutex> lock(mutex_);
      stats_.prompt_tokens += response.prompt_tokens;
      stats_.completion_tokens += response.completion_tokens;
      return response;
    }

    if (!retry || attempt >= config_.max_retries) {
      std::lock_guard<std::mutex> lock(mutex_);
      ++stats_.failures;
      throw RemoteError(kind, error, status);
    }
    {
      std::lock_guard<std::mutex> lock(mutex_);
      ++stats_.retries;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
    backoff_ms *= 2;
  }
}

std::vector<agents::AgentResponse> RemoteBackend::chat_many(
    const std::vector<agents::ContextBundle>& bundles,
    const std::vector<agents::DispatchInfo>& infos) {
  std::vector<agents::AgentResponse> responses(bundles.size());
  std::vector<std::exception_ptr> errors(bundles.size());
  std::vector<std::thread> threads;
  threads.reserve(bundles.size());
  for (size_t i = 0; i < bundles.size(); ++i) {
    threads.emplace_back([this, &bundles, &infos, &responses, &errors, i] {
      try {
        responses[i] = chat(bundles[i], infos[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (std::thread& t : threads) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return responses;
}

AdapterStats RemoteBackend::stats() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return stats_;
}

}  // namespace arena::remote
