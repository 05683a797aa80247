#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "arena/model.hpp"
#include "json.hpp"

// Agent-side machinery: the four-layer context bundle handed to a backend,
// decision parsing on the way back, and the offline backends (scripted,
// stochastic). The remote backend lives in remote.hpp.

namespace arena::runtime {
struct TaskState;
}

namespace arena::agents {

struct ToolCall {
  std::string name;
  nlohmann::json arguments;  // object
};

struct ToolSchema {
  std::string name;
  std::string description;
  nlohmann::json parameters;  // JSON-schema-ish object
};

struct AgentResponse {
  std::string text;
  std::vector<ToolCall> tool_calls;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
};

// Layered prompt: 1 identity, 2 task context, 3 tool schemas, 4 response
// format. Layers render in order; empty layers vanish.
struct ContextBundle {
  std::string soul_prompt;
  std::string stage_context;
  std::vector<ToolSchema> tool_schemas;
  std::string format_instructions;

  std::string render_tools() const;
  std::string render() const;
};

struct SharedState {
  std::map<std::string, std::string> values;
  bool empty() const { return values.empty(); }
};

struct PromptOptions {
  int history_window = 10;
};

ContextBundle assemble_prompt(const runtime::TaskState& state, const model::Stage& stage,
                              const model::GovernanceSpec& spec, const SharedState& shared,
                              const model::Agent& agent, const PromptOptions& opts = {});
// Resolves the stage-bound agent; only valid for single and gate stages.
ContextBundle assemble_prompt(const runtime::TaskState& state, const model::Stage& stage,
                              const model::GovernanceSpec& spec, const SharedState& shared,
                              const PromptOptions& opts = {});

enum class ParseMode { stage, voter };

struct ParsedDecision {
  bool ok = false;
  std::string token;
  std::string error;
};

// Last `decision: <token>` line wins; fenced/backticked lines are tolerated.
std::optional<std::string> find_decision_line(const std::string& text);
// Every `set <key>=<value>` line in the response, in appearance order.
std::vector<std::pair<std::string, std::string>> find_set_directives(const std::string& text);
ParsedDecision parse_decision(const AgentResponse& response, const model::Stage& stage,
                              ParseMode mode = ParseMode::stage);

enum class DispatchPurpose { stage, monitor };

struct DispatchInfo {
  std::string stage_id;
  std::string agent_id;
  model::StageKind kind = model::StageKind::single;
  int member_index = -1;  // >= 0 inside a fan-out batch
  DispatchPurpose purpose = DispatchPurpose::stage;
};

struct SubEvent {
  std::string agent;
  std::string decision;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  std::string summary;
};

// What one executed stage produced, before and after feature hooks run.
struct StageOutcome {
  std::string stage_id;
  model::StageKind kind = model::StageKind::single;
  std::vector<std::string> agents;
  std::string raw_decision;
  std::string decision;
  std::vector<std::pair<std::string, std::string>> overrides;  // feature -> token
  std::string override_source;
  bool parse_failure = false;
  std::string parse_error;
  std::string forced_next;  // set by emergency handling, bypasses transitions
  std::string response_text;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  std::vector<SubEvent> sub_events;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual AgentResponse chat(const ContextBundle& bundle, const DispatchInfo& info) = 0;
  // Fan-out dispatch; results are returned in input (member-index) order.
  virtual std::vector<AgentResponse> chat_many(const std::vector<ContextBundle>& bundles,
                                               const std::vector<DispatchInfo>& infos);
};

class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

AgentResponse text_response(std::string text);
AgentResponse decision_response(const std::string& token);
AgentResponse tool_call_response(std::vector<ToolCall> calls, std::string text = "");

// Deterministic playback. Lookup for the n-th chat of (stage, agent), in
// fallback order: per-agent entry list, per-stage entry list, per-stage
// default, global default. A stage dispatch that finds nothing throws;
// monitor dispatches fall back to an empty response.
struct Script {
  std::map<std::pair<std::string, std::string>, std::vector<AgentResponse>> agent_entries;
  std::map<std::string, std::vector<AgentResponse>> stage_entries;
  std::map<std::string, AgentResponse> stage_defaults;
  std::optional<AgentResponse> default_response;

  Script& on(const std::string& stage_id, const std::string& agent_id,
             std::vector<AgentResponse> responses);
  Script& on_stage(const std::string& stage_id, std::vector<AgentResponse> responses);
  Script& stage_default(const std::string& stage_id, AgentResponse response);
  Script& fallback(AgentResponse response);
};

class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(Script script);
  std::string name() const override { return "scripted"; }
  AgentResponse chat(const ContextBundle& bundle, const DispatchInfo& info) override;

 private:
  Script script_;
  std::map<std::pair<std::string, std::string>, int> cursors_;
};

struct StochasticPolicy {
  double gate_approve_prob = 0.5;
  double voter_yes_prob = 0.7;
  double voter_abstain_prob = 0.0;
  double member_success_prob = 0.9;
  double monitor_warn_prob = 0.0;
  std::map<std::string, double> stage_approve_prob;  // per-gate override
  uint64_t seed = 0;
};

// Decision-level coin flips with a private generator; draw order is the
// dispatch order, so runs replay exactly for a given seed.
class StochasticBackend : public Backend {
 public:
  explicit StochasticBackend(StochasticPolicy policy);
  std::string name() const override { return "stochastic"; }
  AgentResponse chat(const ContextBundle& bundle, const DispatchInfo& info) override;

 private:
  double draw();
  StochasticPolicy policy_;
  std::mt19937_64 rng_;
};

// Synthetic usage accounting for offline backends: one token per four
// characters on both sides.
long long synthetic_tokens(const std::string& text);
void charge_synthetic(AgentResponse& response, const ContextBundle& bundle);

}  // namespace arena::agents
