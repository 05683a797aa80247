#include "arena/stub_server.hpp"

#include <chrono>

#include "httplib.h"

namespace arena::remote {

namespace {

nlohmann::json completion_json(const StubReply& reply) {
  nlohmann::json message;
  message["role"] = "assistant";
  if (reply.tool_calls.empty()) {
    message["content"] = reply.content;
  } else {
    message["content"] = reply.content.empty() ? nlohmann::json() : nlohmann::json(reply.content);
    nlohmann::json calls = nlohmann::json::array();
    int i = 0;
    for (const auto& [name, arguments] : reply.tool_calls) {
      calls.push_back({{"id", "call_" + std::to_string(i++)},
                       {"type", "function"},
                       {"function", {{"name", name}, {"arguments", arguments}}}});
    }
    message["tool_calls"] = std::move(calls);
  }
  nlohmann::json body;
  body["id"] = "stub-cmpl";
  body["object"] = "chat.completion";
  body["choices"] = nlohmann::json::array(
      {{{"index", 0}, {"message", std::move(message)}, {"finish_reason", "stop"}}});
  body["usage"] = {{"prompt_tokens", reply.prompt_tokens},
                   {"completion_tokens", reply.completion_tokens},
                   {"total_tokens", reply.prompt_tokens + reply.completion_tokens}};
  return body;
}

}  // namespace

StubLlmServer::StubLlmServer() : server_(std::make_unique<httplib::Server>()) {
  default_reply_.content = "acknowledged";

  server_->Post("/v1/chat/completions", [this](const httplib::Request& req,
                                               httplib::Response& res) {
    std::lock_guard<std::mutex> lock(mutex_);
    StubRequest record;
    record.authorization = req.get_header_value("Authorization");
    try {
      record.body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      record.body = nlohmann::json{{"unparsed", req.body}};
    }
    requests_.push_back(std::move(record));

    if (!failures_.empty()) {
      res.status = failures_.front();
      failures_.pop_front();
      res.set_content("{}", "application/json");
      return;
    }
    if (!raw_bodies_.empty()) {
      res.set_content(raw_bodies_.front(), "application/json");
      raw_bodies_.pop_front();
      return;
    }
    StubReply reply = default_reply_;
    if (echo_) {
      const nlohmann::json& body = requests_.back().body;
      reply.content = "echo: ";
      if (body.contains("messages") && !body["messages"].empty()) {
        reply.content += body["messages"][0].value("content", "");
      }
    } else if (!queue_.empty()) {
      reply = queue_.front();
      queue_.pop_front();
    }
    res.set_content(completion_json(reply).dump(), "application/json");
  });

  port_ = server_->bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  while (!server_->is_running()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
}

StubLlmServer::~StubLlmServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void StubLlmServer::enqueue(StubReply reply) {
  std::lock_guard<std::mutex> lock(mutex_);
  queue_.push_back(std::move(reply));
}

void StubLlmServer::set_default(StubReply reply) {
  std::lock_guard<std::mutex> lock(mutex_);
  default_reply_ = std::move(reply);
}

void StubLlmServer::fail_next(int status, int count) {
  std::lock_guard<std::mutex> lock(mutex_);
  for (int i = 0; i < count; ++i) failures_.push_back(status);
}

void StubLlmServer::reply_raw(std::string body) {
  std::lock_guard<std::mutex> lock(mutex_);
  raw_bodies_.push_back(std::move(body));
}

void StubLlmServer::set_echo(bool on) {
  std::lock_guard<std::mutex> lock(mutex_);
  echo_ = on;
}

std::vector<StubRequest> StubLlmServer::requests() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return requests_;
}

size_t StubLlmServer::request_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return requests_.size();
}

}  // namespace arena::remote
