#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "arena/agents.hpp"
#include "arena/features.hpp"
#include "arena/model.hpp"

// The execution engine: walks a task through a governance spec under a step
// budget, fanning out consensus and cluster stages, applying feature hooks,
// and recording a replayable trace.

namespace arena::runtime {

enum class RunStatus { running, done, budget_exhausted, error };
std::string to_string(RunStatus s);

struct Event {
  int step = 0;  // 1-based dispatch index
  std::string stage_id;
  model::StageKind kind = model::StageKind::single;
  std::vector<std::string> agents;
  std::string raw_decision;
  std::string decision;
  std::string override_source;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string next_stage;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  std::string summary;
  std::vector<agents::SubEvent> sub_events;
};

struct MonitorNote {
  int after_step = 0;
  std::string agent;
  std::string text;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
};

struct TaskState {
  std::string task_id;
  std::string instructions;
  std::string current_stage;
  RunStatus status = RunStatus::running;
  std::vector<Event> history;
  std::vector<MonitorNote> notes;
  agents::SharedState shared;
  long long dispatched_steps = 0;
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  std::chrono::milliseconds wall_clock{0};
  std::string error_message;
};

using ToolExecutor = std::function<std::string(const agents::ToolCall&)>;

struct TaskInput {
  std::string id;
  std::string instructions;
  std::vector<agents::ToolSchema> tools;
  ToolExecutor tool_exec;  // absent: tool calls are reported back as unavailable
};

struct RuntimeConfig {
  int budget = 0;  // 0 picks up the spec default
  uint64_t seed = 0;
  int max_tool_rounds = 5;
  int history_window = 10;
  bool interactive = false;
  std::string confirm_default = "proceed";  // proceed | abort
  std::function<bool(const model::Stage&)> confirm_fn;  // overrides the above
};

TaskState run(const model::GovernanceSpec& spec, const TaskInput& task,
              const RuntimeConfig& config, agents::Backend& backend);

enum class VoteValue { yes, no, abstain };
enum class TallyOutcome { approve, reject };

// Threshold vote aggregation. Abstentions drop out of the denominator; a
// round with no effective votes rejects. Weights align with the votes by
// index and only matter under the weighted rule.
TallyOutcome tally(const std::vector<VoteValue>& votes, model::ConsensusRule rule, double threshold,
                   const std::vector<double>* weights = nullptr);

agents::StageOutcome run_consensus(const model::GovernanceSpec& spec, const model::Stage& stage,
                                   std::vector<agents::ContextBundle> bundles,
                                   agents::Backend& backend);
agents::StageOutcome run_cluster(const model::GovernanceSpec& spec, const model::Stage& stage,
                                 std::vector<agents::ContextBundle> bundles,
                                 agents::Backend& backend);

// Effective decision -> next stage, honoring emergency redirects. Returns
// false when the outcome cannot advance the run (surviving parse failure).
bool resolve_decision(const agents::StageOutcome& outcome, const model::Stage& stage,
                      std::string& next_stage, std::string& error);

// A run that ran out of budget after at least one gate turned work back.
bool detect_gate_loop_failure(const TaskState& state);

std::string trace_filename(const std::string& spec_id, const std::string& task_id, uint64_t seed);
void write_trace(std::ostream& out, const model::GovernanceSpec& spec, const TaskInput& task,
                 uint64_t seed, const TaskState& state);

}  // namespace arena::runtime
