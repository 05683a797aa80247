#pragma once

#include <map>
#include <string>
#include <vector>

#include "arena/agents.hpp"
#include "arena/model.hpp"

// Governance feature plugins. The engine owns per-run plugin state and runs
// the declared features, in declaration order, around every stage dispatch.
// An engine over an empty feature list leaves runs untouched.

namespace arena::runtime {
struct TaskState;
struct RuntimeConfig;
}

namespace arena::features {

struct GuardState {
  std::map<std::string, int> consecutive_rejects;  // by gate stage id
};

class FeatureEngine {
 public:
  FeatureEngine(const model::GovernanceSpec& spec, agents::Backend* backend,
                const runtime::RuntimeConfig* config);

  // Mutates the assembled bundles (one per dispatched agent) before the
  // stage runs: warning injection, protocol text, operator confirmation.
  void before_stage(runtime::TaskState& state, const model::Stage& stage,
                    std::vector<agents::ContextBundle>& bundles);
  // Reacts to the outcome: monitor review, shared-state writes, loop-guard
  // overrides, emergency redirects.
  void after_stage(runtime::TaskState& state, const model::Stage& stage,
                   agents::StageOutcome& outcome);

  bool active(model::FeatureKind kind) const;
  bool abort_requested() const { return abort_requested_; }
  const GuardState& guard_state() const { return guard_; }
  const std::string& pending_warning() const { return pending_warning_; }

 private:
  void run_monitor(runtime::TaskState& state, const model::Stage& stage,
                   agents::StageOutcome& outcome, const model::FeatureConfig& cfg);
  bool confirm(const model::Stage& stage);

  const model::GovernanceSpec& spec_;
  agents::Backend* backend_;
  const runtime::RuntimeConfig* config_;
  GuardState guard_;
  std::string pending_warning_;
  bool abort_requested_ = false;
};

}  // namespace arena::features
