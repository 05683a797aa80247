#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Governance spec object model: the declarative description of who decides
// what, in which order, under which voting or aggregation rule. Loading
// resolves the object graph (references, prompt files); validate() applies
// the structural and pattern rules and reports violations without throwing.

namespace arena::model {

enum class Pattern { pipeline, gated_pipeline, autonomous_cluster, consensus };
enum class Role {
  planner,
  gatekeeper,
  executor,
  orchestrator,
  aggregator,
  proposer,
  voter,
  monitor,
  auditor
};
enum class StageKind { single, gate, cluster, consensus, terminal };
enum class ConsensusRule { majority, weighted, unanimity };
enum class VoteErrorHandling { abstain, fail };
enum class MonitorMode { warn, force };
enum class FeatureKind {
  monitor,
  shared_state,
  system_protocol,
  emergency_handler,
  loop_guard,
  human_confirmation
};

std::string to_string(Pattern p);
std::string to_string(Role r);
std::string to_string(StageKind k);
std::string to_string(ConsensusRule r);
std::string to_string(VoteErrorHandling e);
std::string to_string(MonitorMode m);
std::string to_string(FeatureKind k);

std::optional<Pattern> pattern_from_string(const std::string& s);
std::optional<Role> role_from_string(const std::string& s);
std::optional<StageKind> stage_kind_from_string(const std::string& s);
std::optional<ConsensusRule> consensus_rule_from_string(const std::string& s);
std::optional<VoteErrorHandling> vote_error_handling_from_string(const std::string& s);
std::optional<MonitorMode> monitor_mode_from_string(const std::string& s);
std::optional<FeatureKind> feature_kind_from_string(const std::string& s);

// Reserved decision tokens. Spec authors may add extra ones (escape
// transitions); these are the ones with built-in meaning.
namespace decisions {
inline constexpr const char* next = "next";
inline constexpr const char* approve = "approve";
inline constexpr const char* reject = "reject";
inline constexpr const char* success = "success";
inline constexpr const char* failure = "failure";
inline constexpr const char* dispute = "dispute";
inline constexpr const char* imperial_override = "imperial_override";
inline constexpr const char* vote_yes = "vote_yes";
inline constexpr const char* vote_no = "vote_no";
inline constexpr const char* abstain = "abstain";
const std::vector<std::string>& reserved();
const std::vector<std::string>& vote_tokens();
}  // namespace decisions

struct Agent {
  std::string id;
  Role role = Role::executor;
  std::filesystem::path soul_prompt_path;
  std::string soul_prompt;
};

struct ConsensusConfig {
  std::vector<std::string> voters;
  ConsensusRule rule = ConsensusRule::majority;
  double threshold = 0.5;
  std::map<std::string, double> weights;
  VoteErrorHandling error_handling = VoteErrorHandling::abstain;
};

struct ClusterConfig {
  std::vector<std::string> members;
  std::vector<std::string> required;  // defaults to all members
};

struct Stage {
  std::string id;
  StageKind kind = StageKind::single;
  std::string agent;  // single and gate stages
  std::optional<ClusterConfig> cluster;
  std::optional<ConsensusConfig> consensus;
  // decision token -> target stage id, insertion order preserved separately
  std::map<std::string, std::string> transitions;
  std::vector<std::string> transition_order;

  bool has_transition(const std::string& token) const;
  std::vector<std::string> transition_tokens() const;  // sorted
};

struct FeatureConfig {
  FeatureKind kind = FeatureKind::system_protocol;
  // monitor
  std::string monitor_agent;
  MonitorMode monitor_mode = MonitorMode::warn;
  // system_protocol
  std::string protocol_text;
  // emergency_handler
  std::string fallback_stage;
  // loop_guard
  int max_consecutive_rejects = 1;
  // human_confirmation
  std::vector<std::string> confirm_stages;
};

struct GovernanceSpec {
  std::string id;
  Pattern pattern = Pattern::pipeline;
  std::vector<Agent> agents;
  std::vector<Stage> stages;
  std::string entry_stage;
  std::vector<FeatureConfig> features;
  int default_budget = 32;
  std::filesystem::path source_path;

  const Stage* find_stage(const std::string& stage_id) const;
  const Agent* find_agent(const std::string& agent_id) const;
  int stage_index(const std::string& stage_id) const;  // -1 when absent
  const Stage* terminal_stage() const;                 // first terminal, if any
  int gate_count() const;
};

enum class LoadErrorKind { io, parse, schema, dangling_reference, missing_prompt, duplicate_id };

class LoadError : public std::runtime_error {
 public:
  LoadError(LoadErrorKind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  LoadErrorKind kind() const { return kind_; }

 private:
  LoadErrorKind kind_;
};

GovernanceSpec load_spec(const std::filesystem::path& path);
// Parse from a string; prompt paths resolve against base_dir. Used by tests
// and by the topology generator (which synthesizes prompt-free specs).
GovernanceSpec load_spec_text(const std::string& yaml_text,
                              const std::filesystem::path& base_dir,
                              bool read_prompts = true);

struct Violation {
  std::string stage_id;  // empty for spec-level violations
  std::string rule;      // stable machine-readable rule id
  std::string message;
};

enum class GateSemantics { revise, terminate };

struct GateTag {
  std::string gate_id;
  GateSemantics semantics;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<GateTag> gate_tags;
  bool ok() const { return violations.empty(); }
  bool has_rule(const std::string& rule) const;
};

ValidationReport validate(const GovernanceSpec& spec);

struct SpecSummary {
  std::string id;
  Pattern pattern = Pattern::pipeline;
  int stage_count = 0;
  int agent_count = 0;
  int gate_count = 0;
  int cluster_member_count = 0;  // largest cluster stage, 0 if none
  int voter_count = 0;           // largest consensus stage, 0 if none
  bool monitor_enabled = false;
  std::string monitor_agent;
  double gate_density = 0.0;               // gates / all stages, terminal included
  std::string gate_density_display;        // two decimals, e.g. "0.17"
};

SpecSummary summarize(const GovernanceSpec& spec);
std::string render_summary(const SpecSummary& s);  // one-line human form

}  // namespace arena::model
