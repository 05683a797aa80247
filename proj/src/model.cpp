#include "arena/model.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace arena::model {

namespace {

template <typename E>
std::optional<E> lookup(const std::vector<std::pair<const char*, E>>& table, const std::string& s) {
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  return std::nullopt;
}

const std::vector<std::pair<const char*, Pattern>> kPatterns = {
    {"pipeline", Pattern::pipeline},
    {"gated_pipeline", Pattern::gated_pipeline},
    {"autonomous_cluster", Pattern::autonomous_cluster},
    {"consensus", Pattern::consensus},
};

const std::vector<std::pair<const char*, Role>> kRoles = {
    {"planner", Role::planner},       {"gatekeeper", Role::gatekeeper},
    {"executor", Role::executor},     {"orchestrator", Role::orchestrator},
    {"aggregator", Role::aggregator}, {"proposer", Role::proposer},
    {"voter", Role::voter},           {"monitor", Role::monitor},
    {"auditor", Role::auditor},
};

const std::vector<std::pair<const char*, StageKind>> kKinds = {
    {"single", StageKind::single},       {"gate", StageKind::gate},
    {"cluster", StageKind::cluster},     {"consensus", StageKind::consensus},
    {"terminal", StageKind::terminal},
};

const std::vector<std::pair<const char*, ConsensusRule>> kRules = {
    {"majority", ConsensusRule::majority},
    {"weighted", ConsensusRule::weighted},
    {"unanimity", ConsensusRule::unanimity},
};

const std::vector<std::pair<const char*, VoteErrorHandling>> kErrorHandling = {
    {"abstain", VoteErrorHandling::abstain},
    {"fail", VoteErrorHandling::fail},
};

const std::vector<std::pair<const char*, MonitorMode>> kMonitorModes = {
    {"warn", MonitorMode::warn},
    {"force", MonitorMode::force},
};

const std::vector<std::pair<const char*, FeatureKind>> kFeatureKinds = {
    {"monitor", FeatureKind::monitor},
    {"shared_state", FeatureKind::shared_state},
    {"system_protocol", FeatureKind::system_protocol},
    {"emergency_handler", FeatureKind::emergency_handler},
    {"loop_guard", FeatureKind::loop_guard},
    {"human_confirmation", FeatureKind::human_confirmation},
};

template <typename E>
std::string table_name(const std::vector<std::pair<const char*, E>>& table, E value) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

[[noreturn]] void schema_error(const std::string& msg) {
  throw LoadError(LoadErrorKind::schema, "spec schema: " + msg);
}

std::string node_context(const YAML::Node& node) {
  if (node.Mark().line >= 0) {
    return " (line " + std::to_string(node.Mark().line + 1) + ")";
  }
  return "";
}

YAML::Node require_key(const YAML::Node& node, const char* key, const std::string& ctx) {
  YAML::Node v = node[key];
  if (!v) schema_error(ctx + ": missing key '" + key + "'" + node_context(node));
  return v;
}

std::string require_str(const YAML::Node& node, const char* key, const std::string& ctx) {
  YAML::Node v = require_key(node, key, ctx);
  if (!v.IsScalar()) schema_error(ctx + ": key '" + key + "' must be a string" + node_context(v));
  return v.as<std::string>();
}

int require_pos_int(const YAML::Node& v, const char* key, const std::string& ctx) {
  int out = 0;
  try {
    out = v.as<int>();
  } catch (const YAML::Exception&) {
    schema_error(ctx + ": key '" + key + "' must be an integer" + node_context(v));
  }
  if (out < 1) schema_error(ctx + ": key '" + key + "' must be >= 1");
  return out;
}

double require_num(const YAML::Node& v, const char* key, const std::string& ctx) {
  try {
    return v.as<double>();
  } catch (const YAML::Exception&) {
    schema_error(ctx + ": key '" + key + "' must be a number" + node_context(v));
  }
}

std::vector<std::string> require_str_list(const YAML::Node& v, const char* key,
                                          const std::string& ctx) {
  if (!v.IsSequence()) schema_error(ctx + ": key '" + key + "' must be a list" + node_context(v));
  std::vector<std::string> out;
  for (const auto& item : v) {
    if (!item.IsScalar()) schema_error(ctx + ": key '" + key + "' must list strings");
    out.push_back(item.as<std::string>());
  }
  return out;
}

GovernanceSpec parse_document(const YAML::Node& root, const std::filesystem::path& base_dir,
                              bool read_prompts, const std::filesystem::path& source) {
  if (!root.IsMap()) schema_error("top level must be a mapping");

  GovernanceSpec spec;
  spec.source_path = source;
  spec.id = require_str(root, "id", "spec");

  const std::string pattern_s = require_str(root, "pattern", "spec '" + spec.id + "'");
  auto pattern = lookup(kPatterns, pattern_s);
  if (!pattern) schema_error("unknown pattern '" + pattern_s + "'");
  spec.pattern = *pattern;

  if (YAML::Node b = root["default_budget"]) {
    spec.default_budget = require_pos_int(b, "default_budget", "spec '" + spec.id + "'");
  }

  YAML::Node agents = require_key(root, "agents", "spec '" + spec.id + "'");
  if (!agents.IsSequence() || agents.size() == 0) schema_error("'agents' must be a non-empty list");
  std::set<std::string> agent_ids;
  for (const auto& a : agents) {
    Agent agent;
    agent.id = require_str(a, "id", "agent");
    if (!agent_ids.insert(agent.id).second) {
      throw LoadError(LoadErrorKind::duplicate_id, "duplicate agent id '" + agent.id + "'");
    }
    const std::string role_s = require_str(a, "role", "agent '" + agent.id + "'");
    auto role = role_from_string(role_s);
    if (!role) schema_error("agent '" + agent.id + "': unknown role '" + role_s + "'");
    agent.role = *role;
    const std::string prompt_rel = require_str(a, "soul_prompt", "agent '" + agent.id + "'");
    agent.soul_prompt_path = base_dir / prompt_rel;
    if (read_prompts) {
      std::ifstream in(agent.soul_prompt_path);
      if (!in) {
        throw LoadError(LoadErrorKind::missing_prompt,
                        "agent '" + agent.id + "': soul prompt file not found: " +
                            agent.soul_prompt_path.string());
      }
      std::ostringstream buf;
      buf << in.rdbuf();
      agent.soul_prompt = buf.str();
    }
    spec.agents.push_back(std::move(agent));
  }

  YAML::Node stages = require_key(root, "stages", "spec '" + spec.id + "'");
  if (!stages.IsSequence() || stages.size() == 0) schema_error("'stages' must be a non-empty list");
  std::set<std::string> stage_ids;
  for (const auto& s : stages) {
    Stage stage;
    stage.id = require_str(s, "id", "stage");
    if (!stage_ids.insert(stage.id).second) {
      throw LoadError(LoadErrorKind::duplicate_id, "duplicate stage id '" + stage.id + "'");
    }
    const std::string ctx = "stage '" + stage.id + "'";
    const std::string kind_s = require_str(s, "kind", ctx);
    auto kind = stage_kind_from_string(kind_s);
    if (!kind) schema_error(ctx + ": unknown kind '" + kind_s + "'");
    stage.kind = *kind;

    switch (stage.kind) {
      case StageKind::single:
      case StageKind::gate:
        stage.agent = require_str(s, "agent", ctx);
        break;
      case StageKind::cluster: {
        YAML::Node c = require_key(s, "cluster", ctx);
        if (!c.IsMap()) schema_error(ctx + ": 'cluster' must be a mapping");
        ClusterConfig cc;
        cc.members = require_str_list(require_key(c, "members", ctx), "members", ctx);
        if (YAML::Node r = c["required"]) {
          cc.required = require_str_list(r, "required", ctx);
        } else {
          cc.required = cc.members;
        }
        stage.cluster = std::move(cc);
        break;
      }
      case StageKind::consensus: {
        YAML::Node c = require_key(s, "consensus", ctx);
        if (!c.IsMap()) schema_error(ctx + ": 'consensus' must be a mapping");
        ConsensusConfig cfg;
        cfg.voters = require_str_list(require_key(c, "voters", ctx), "voters", ctx);
        if (YAML::Node r = c["rule"]) {
          auto rule = consensus_rule_from_string(r.as<std::string>());
          if (!rule) schema_error(ctx + ": unknown consensus rule '" + r.as<std::string>() + "'");
          cfg.rule = *rule;
        }
        if (YAML::Node t = c["threshold"]) cfg.threshold = require_num(t, "threshold", ctx);
        if (YAML::Node w = c["weights"]) {
          if (!w.IsMap()) schema_error(ctx + ": 'weights' must be a mapping");
          for (const auto& kv : w) {
            cfg.weights[kv.first.as<std::string>()] = require_num(kv.second, "weights", ctx);
          }
        }
        if (YAML::Node e = c["error_handling"]) {
          auto eh = vote_error_handling_from_string(e.as<std::string>());
          if (!eh) schema_error(ctx + ": unknown error_handling '" + e.as<std::string>() + "'");
          cfg.error_handling = *eh;
        }
        stage.consensus = std::move(cfg);
        break;
      }
      case StageKind::terminal:
        break;
    }

    if (YAML::Node t = s["transitions"]) {
      if (!t.IsMap()) schema_error(ctx + ": 'transitions' must be a mapping");
      for (const auto& kv : t) {
        const std::string token = kv.first.as<std::string>();
        if (!kv.second.IsScalar()) schema_error(ctx + ": transition target must be a stage id");
        if (stage.transitions.count(token)) {
          throw LoadError(LoadErrorKind::duplicate_id,
                          ctx + ": duplicate transition token '" + token + "'");
        }
        stage.transitions[token] = kv.second.as<std::string>();
        stage.transition_order.push_back(token);
      }
    } else if (stage.kind != StageKind::terminal) {
      schema_error(ctx + ": missing key 'transitions'");
    }
    spec.stages.push_back(std::move(stage));
  }
  spec.entry_stage = spec.stages.front().id;

  if (YAML::Node feats = root["features"]) {
    if (!feats.IsSequence()) schema_error("'features' must be a list");
    for (const auto& f : feats) {
      FeatureConfig cfg;
      const std::string kind_s = require_str(f, "kind", "feature");
      auto kind = feature_kind_from_string(kind_s);
      if (!kind) schema_error("unknown feature kind '" + kind_s + "'");
      cfg.kind = *kind;
      YAML::Node params = f["params"] ? f["params"] : YAML::Node(YAML::NodeType::Map);
      if (!params.IsMap()) schema_error("feature '" + kind_s + "': 'params' must be a mapping");
      const std::string ctx = "feature '" + kind_s + "'";
      switch (cfg.kind) {
        case FeatureKind::monitor: {
          cfg.monitor_agent = require_str(params, "agent", ctx);
          if (YAML::Node m = params["mode"]) {
            auto mode = monitor_mode_from_string(m.as<std::string>());
            if (!mode) schema_error(ctx + ": unknown mode '" + m.as<std::string>() + "'");
            cfg.monitor_mode = *mode;
          }
          break;
        }
        case FeatureKind::system_protocol:
          cfg.protocol_text = require_str(params, "text", ctx);
          break;
        case FeatureKind::emergency_handler:
          cfg.fallback_stage = require_str(params, "fallback_stage", ctx);
          break;
        case FeatureKind::loop_guard: {
          YAML::Node kn = require_key(params, "k", ctx);
          try {
            cfg.max_consecutive_rejects = kn.as<int>();
          } catch (const YAML::Exception&) {
            schema_error(ctx + ": key 'k' must be an integer");
          }
          break;
        }
        case FeatureKind::human_confirmation:
          if (YAML::Node st = params["stages"]) {
            cfg.confirm_stages = require_str_list(st, "stages", ctx);
          }
          break;
        case FeatureKind::shared_state:
          break;
      }
      spec.features.push_back(std::move(cfg));
    }
  }

  // Reference resolution. Everything named must exist; validation handles
  // shape rules, the loader only refuses graphs it cannot wire up.
  auto check_agent = [&](const std::string& id, const std::string& where) {
    if (!agent_ids.count(id)) {
      throw LoadError(LoadErrorKind::dangling_reference,
                      where + " references unknown agent '" + id + "'");
    }
  };
  auto check_stage = [&](const std::string& id, const std::string& where) {
    if (!stage_ids.count(id)) {
      throw LoadError(LoadErrorKind::dangling_reference,
                      where + " references unknown stage '" + id + "'");
    }
  };
  for (const Stage& s : spec.stages) {
    const std::string where = "stage '" + s.id + "'";
    if (s.kind == StageKind::single || s.kind == StageKind::gate) check_agent(s.agent, where);
    if (s.cluster) {
      for (const auto& m : s.cluster->members) check_agent(m, where);
      for (const auto& r : s.cluster->required) check_agent(r, where);
    }
    if (s.consensus) {
      for (const auto& v : s.consensus->voters) check_agent(v, where);
      for (const auto& [agent, w] : s.consensus->weights) {
        (void)w;
        check_agent(agent, where + " weights");
      }
    }
    for (const auto& [token, target] : s.transitions) {
      check_stage(target, where + " transition '" + token + "'");
    }
  }
  for (const FeatureConfig& f : spec.features) {
    if (f.kind == FeatureKind::monitor) check_agent(f.monitor_agent, "monitor feature");
    if (f.kind == FeatureKind::emergency_handler) {
      check_stage(f.fallback_stage, "emergency_handler feature");
    }
    if (f.kind == FeatureKind::human_confirmation) {
      for (const auto& st : f.confirm_stages) check_stage(st, "human_confirmation feature");
    }
  }
  return spec;
}

}  // namespace

std::string to_string(Pattern p) { return table_name(kPatterns, p); }
std::string to_string(Role r) { return table_name(kRoles, r); }
std::string to_string(StageKind k) { return table_name(kKinds, k); }
std::string to_string(ConsensusRule r) { return table_name(kRules, r); }
std::string to_string(VoteErrorHandling e) { return table_name(kErrorHandling, e); }
std::string to_string(MonitorMode m) { return table_name(kMonitorModes, m); }
std::string to_string(FeatureKind k) { return table_name(kFeatureKinds, k); }

std::optional<Pattern> pattern_from_string(const std::string& s) { return lookup(kPatterns, s); }
std::optional<Role> role_from_string(const std::string& s) { return lookup(kRoles, s); }
std::optional<StageKind> stage_kind_from_string(const std::string& s) { return lookup(kKinds, s); }
std::optional<ConsensusRule> consensus_rule_from_string(const std::string& s) {
  return lookup(kRules, s);
}
std::optional<VoteErrorHandling> vote_error_handling_from_string(const std::string& s) {
  return lookup(kErrorHandling, s);
}
std::optional<MonitorMode> monitor_mode_from_string(const std::string& s) {
  return lookup(kMonitorModes, s);
}
std::optional<FeatureKind> feature_kind_from_string(const std::string& s) {
  return lookup(kFeatureKinds, s);
}

namespace decisions {
const std::vector<std::string>& reserved() {
  static const std::vector<std::string> kTokens = {
      next, approve, reject, success, failure, dispute, imperial_override,
      vote_yes, vote_no, abstain};
  return kTokens;
}
const std::vector<std::string>& vote_tokens() {
  static const std::vector<std::string> kTokens = {vote_yes, vote_no, abstain};
  return kTokens;
}
}  // namespace decisions

bool Stage::has_transition(const std::string& token) const {
  return transitions.count(token) > 0;
}

std::vector<std::string> Stage::transition_tokens() const {
  std::vector<std::string> out;
  out.reserve(transitions.size());
  for (const auto& [token, target] : transitions) {
    (void)target;
    out.push_back(token);
  }
  return out;
}

const Stage* GovernanceSpec::find_stage(const std::string& stage_id) const {
  for (const Stage& s : stages) {
    if (s.id == stage_id) return &s;
  }
  return nullptr;
}

const Agent* GovernanceSpec::find_agent(const std::string& agent_id) const {
  for (const Agent& a : agents) {
    if (a.id == agent_id) return &a;
  }
  return nullptr;
}

int GovernanceSpec::stage_index(const std::string& stage_id) const {
  for (size_t i = 0; i < stages.size(); ++i) {
    if (stages[i].id == stage_id) return static_cast<int>(i);
  }
  return -1;
}

const Stage* GovernanceSpec::terminal_stage() const {
  for (const Stage& s : stages) {
    if (s.kind == StageKind::terminal) return &s;
  }
  return nullptr;
}

int GovernanceSpec::gate_count() const {
  return static_cast<int>(
      std::count_if(stages.begin(), stages.end(),
                    [](const Stage& s) { return s.kind == StageKind::gate; }));
}

GovernanceSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw LoadError(LoadErrorKind::io, "cannot open spec file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  YAML::Node root;
  try {
    root = YAML::Load(buf.str());
  } catch (const YAML::ParserException& e) {
    throw LoadError(LoadErrorKind::parse,
                    "parse error in " + path.string() + " at line " +
                        std::to_string(e.mark.line + 1) + ", column " +
                        std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  return parse_document(root, path.parent_path(), true, path);
}

GovernanceSpec load_spec_text(const std::string& yaml_text, const std::filesystem::path& base_dir,
                              bool read_prompts) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw LoadError(LoadErrorKind::parse, "parse error at line " + std::to_string(e.mark.line + 1) +
                                              ", column " + std::to_string(e.mark.column + 1) +
                                              ": " + e.msg);
  }
  return parse_document(root, base_dir, read_prompts, base_dir / "<inline>");
}

bool ValidationReport::has_rule(const std::string& rule) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.rule == rule; });
}

namespace {

// Depth-first cycle scan over an adjacency view; used for the ungated
// acyclicity rule, so callers choose which edges to include.
bool has_cycle(const GovernanceSpec& spec,
               const std::function<std::vector<std::string>(const Stage&)>& edges) {
  enum class Color { white, grey, black };
  std::map<std::string, Color> color;
  for (const Stage& s : spec.stages) color[s.id] = Color::white;
  std::function<bool(const std::string&)> visit = [&](const std::string& id) {
    color[id] = Color::grey;
    const Stage* s = spec.find_stage(id);
    for (const std::string& target : edges(*s)) {
      if (color[target] == Color::grey) return true;
      if (color[target] == Color::white && visit(target)) return true;
    }
    color[id] = Color::black;
    return false;
  };
  for (const Stage& s : spec.stages) {
    if (color[s.id] == Color::white && visit(s.id)) return true;
  }
  return false;
}

std::set<std::string> reachable_from(const GovernanceSpec& spec, const std::string& start) {
  std::set<std::string> seen;
  std::vector<std::string> frontier{start};
  seen.insert(start);
  while (!frontier.empty()) {
    std::string id = frontier.back();
    frontier.pop_back();
    const Stage* s = spec.find_stage(id);
    if (!s) continue;
    for (const auto& [token, target] : s->transitions) {
      (void)token;
      if (seen.insert(target).second) frontier.push_back(target);
    }
  }
  return seen;
}

}  // namespace

ValidationReport validate(const GovernanceSpec& spec) {
  ValidationReport report;
  auto flag = [&](const std::string& stage_id, const std::string& rule, const std::string& msg) {
    report.violations.push_back({stage_id, rule, msg});
  };

  int terminal_count = 0;
  for (const Stage& s : spec.stages) {
    if (s.kind == StageKind::terminal) ++terminal_count;
  }
  if (terminal_count != 1) {
    flag("", "terminal_count",
         "spec must contain exactly one terminal stage, found " + std::to_string(terminal_count));
  }

  // Per-kind transition keys.
  for (const Stage& s : spec.stages) {
    switch (s.kind) {
      case StageKind::single:
        if (!s.has_transition(decisions::next)) {
          flag(s.id, "transitions_single", "single stage must define a 'next' transition");
        }
        break;
      case StageKind::gate:
        if (!s.has_transition(decisions::approve)) {
          flag(s.id, "transitions_gate", "gate stage must define an 'approve' transition");
        }
        if (!s.has_transition(decisions::reject)) {
          flag(s.id, "transitions_gate", "gate stage must define a 'reject' transition");
        }
        break;
      case StageKind::cluster:
        if (!s.has_transition(decisions::success) || !s.has_transition(decisions::failure)) {
          flag(s.id, "transitions_cluster",
               "cluster stage must define 'success' and 'failure' transitions");
        }
        break;
      case StageKind::consensus:
        if (!s.has_transition(decisions::approve) || !s.has_transition(decisions::reject)) {
          flag(s.id, "transitions_consensus",
               "consensus stage must define 'approve' and 'reject' transitions");
        }
        break;
      case StageKind::terminal:
        if (!s.transitions.empty()) {
          flag(s.id, "transitions_terminal", "terminal stage must not define transitions");
        }
        break;
    }
  }

  // Gate reject targets: a reject may loop back to an earlier stage (revise)
  // or end the run at the terminal (terminate); anything else is malformed.
  for (const Stage& s : spec.stages) {
    if (s.kind != StageKind::gate) continue;
    auto it = s.transitions.find(decisions::reject);
    if (it == s.transitions.end()) continue;
    const Stage* target = spec.find_stage(it->second);
    if (!target) continue;
    if (target->kind == StageKind::terminal) {
      report.gate_tags.push_back({s.id, GateSemantics::terminate});
    } else if (spec.stage_index(it->second) < spec.stage_index(s.id)) {
      report.gate_tags.push_back({s.id, GateSemantics::revise});
    } else {
      flag(s.id, "gate_reject_target",
           "gate reject must target an earlier stage or the terminal, got '" + it->second + "'");
    }
  }

  // Consensus and cluster configuration.
  for (const Stage& s : spec.stages) {
    if (s.consensus) {
      const ConsensusConfig& c = *s.consensus;
      if (c.voters.empty()) {
        flag(s.id, "consensus_voters", "consensus stage needs at least one voter");
      }
      if (c.threshold < 0.0 || c.threshold > 1.0) {
        flag(s.id, "consensus_threshold", "threshold must lie in [0, 1]");
      }
      if (c.rule == ConsensusRule::weighted) {
        for (const std::string& v : c.voters) {
          if (!c.weights.count(v)) {
            flag(s.id, "consensus_weights", "weighted rule: missing weight for voter '" + v + "'");
          }
        }
      }
      for (const auto& [agent, w] : c.weights) {
        if (std::find(c.voters.begin(), c.voters.end(), agent) == c.voters.end()) {
          flag(s.id, "consensus_weights", "weight given for non-voter '" + agent + "'");
        }
        if (w < 0.0) flag(s.id, "consensus_weights", "negative weight for '" + agent + "'");
      }
    }
    if (s.cluster) {
      const ClusterConfig& c = *s.cluster;
      if (c.members.empty()) {
        flag(s.id, "cluster_members", "cluster stage needs at least one member");
      }
      for (const std::string& r : c.required) {
        if (std::find(c.members.begin(), c.members.end(), r) == c.members.end()) {
          flag(s.id, "cluster_required", "required agent '" + r + "' is not a cluster member");
        }
      }
    }
  }

  for (const FeatureConfig& f : spec.features) {
    if (f.kind == FeatureKind::loop_guard && f.max_consecutive_rejects < 1) {
      flag("", "loop_guard_k", "loop_guard k must be >= 1");
    }
    if (f.kind == FeatureKind::monitor) {
      const Agent* a = spec.find_agent(f.monitor_agent);
      if (a && a->role != Role::monitor) {
        flag("", "monitor_role",
             "monitor feature agent '" + f.monitor_agent + "' must have the monitor role");
      }
    }
  }

  // Reachability from the entry stage.
  if (!spec.stages.empty()) {
    std::set<std::string> seen = reachable_from(spec, spec.entry_stage);
    for (const Stage& s : spec.stages) {
      if (!seen.count(s.id)) {
        flag(s.id, "unreachable_stage", "stage is not reachable from the entry stage");
      }
    }
  }

  // Pattern rules.
  switch (spec.pattern) {
    case Pattern::pipeline: {
      for (const Stage& s : spec.stages) {
        if (s.kind == StageKind::gate) {
          flag(s.id, "pattern_pipeline", "gate stage illegal under pipeline");
        } else if (s.kind != StageKind::single && s.kind != StageKind::terminal) {
          flag(s.id, "pattern_pipeline",
               to_string(s.kind) + " stage illegal under pipeline");
        }
      }
      // Forward chain: each stage hands off to the next in declaration order.
      for (size_t i = 0; i + 1 < spec.stages.size(); ++i) {
        const Stage& s = spec.stages[i];
        if (s.kind != StageKind::single) continue;
        if (s.transitions.size() != 1) {
          flag(s.id, "pattern_pipeline", "pipeline stages carry exactly one transition");
          continue;
        }
        auto it = s.transitions.find(decisions::next);
        if (it != s.transitions.end() && it->second != spec.stages[i + 1].id) {
          flag(s.id, "pattern_pipeline",
               "pipeline must advance to the next declared stage, got '" + it->second + "'");
        }
      }
      if (!spec.stages.empty() && spec.stages.back().kind != StageKind::terminal) {
        flag(spec.stages.back().id, "pattern_pipeline", "pipeline must end at the terminal stage");
      }
      break;
    }
    case Pattern::gated_pipeline: {
      if (spec.gate_count() < 1) {
        flag("", "pattern_gated", "gated_pipeline requires at least one gate stage");
      }
      for (const Stage& s : spec.stages) {
        if (s.kind == StageKind::consensus) {
          flag(s.id, "pattern_gated", "consensus stage illegal under gated_pipeline");
        }
      }
      // Dropping gate-reject edges must leave the graph acyclic: rejects are
      // the only sanctioned way to loop.
      bool cyc = has_cycle(spec, [](const Stage& s) {
        std::vector<std::string> out;
        for (const auto& [token, target] : s.transitions) {
          if (s.kind == StageKind::gate && token == decisions::reject) continue;
          out.push_back(target);
        }
        return out;
      });
      if (cyc) {
        flag("", "pattern_gated_cycle", "ungated cycle: loop does not pass through a gate reject");
      }
      break;
    }
    case Pattern::autonomous_cluster: {
      int clusters = 0;
      std::string cluster_id;
      for (const Stage& s : spec.stages) {
        if (s.kind == StageKind::cluster) {
          ++clusters;
          cluster_id = s.id;
        }
        if (s.kind == StageKind::gate) {
          flag(s.id, "pattern_cluster", "gate stage illegal under autonomous_cluster");
        }
      }
      if (clusters != 1) {
        flag("", "pattern_cluster", "autonomous_cluster requires exactly one cluster stage, found " +
                                        std::to_string(clusters));
      } else {
        bool orchestrated = false;
        for (const Stage& s : spec.stages) {
          if (s.kind != StageKind::single) continue;
          const Agent* a = spec.find_agent(s.agent);
          if (!a || a->role != Role::orchestrator) continue;
          for (const auto& [token, target] : s.transitions) {
            (void)token;
            if (target == cluster_id) orchestrated = true;
          }
        }
        if (!orchestrated) {
          flag("", "pattern_cluster",
               "autonomous_cluster requires an orchestrator stage feeding the cluster");
        }
        std::set<std::string> from_cluster = reachable_from(spec, cluster_id);
        const Stage* terminal = spec.terminal_stage();
        if (terminal && !from_cluster.count(terminal->id)) {
          flag(cluster_id, "pattern_cluster", "terminal stage unreachable from the cluster stage");
        }
      }
      break;
    }
    case Pattern::consensus: {
      int consensus_stages = 0;
      std::string consensus_id;
      for (const Stage& s : spec.stages) {
        if (s.kind == StageKind::consensus) {
          ++consensus_stages;
          consensus_id = s.id;
        }
      }
      if (consensus_stages != 1) {
        flag("", "pattern_consensus", "consensus pattern requires exactly one consensus stage, found " +
                                          std::to_string(consensus_stages));
      } else {
        bool proposed = false;
        for (const Stage& s : spec.stages) {
          if (s.kind != StageKind::single) continue;
          const Agent* a = spec.find_agent(s.agent);
          if (!a || a->role != Role::proposer) continue;
          for (const auto& [token, target] : s.transitions) {
            (void)token;
            if (target == consensus_id) proposed = true;
          }
        }
        if (!proposed) {
          flag("", "pattern_consensus",
               "consensus pattern requires a proposer stage feeding the consensus stage");
        }
      }
      break;
    }
  }

  return report;
}

SpecSummary summarize(const GovernanceSpec& spec) {
  SpecSummary s;
  s.id = spec.id;
  s.pattern = spec.pattern;
  s.stage_count = static_cast<int>(spec.stages.size());
  s.agent_count = static_cast<int>(spec.agents.size());
  s.gate_count = spec.gate_count();
  for (const Stage& st : spec.stages) {
    if (st.cluster) {
      s.cluster_member_count =
          std::max(s.cluster_member_count, static_cast<int>(st.cluster->members.size()));
    }
    if (st.consensus) {
      s.voter_count = std::max(s.voter_count, static_cast<int>(st.consensus->voters.size()));
    }
  }
  for (const FeatureConfig& f : spec.features) {
    if (f.kind == FeatureKind::monitor) {
      s.monitor_enabled = true;
      s.monitor_agent = f.monitor_agent;
    }
  }
  if (s.stage_count > 0) {
    s.gate_density = static_cast<double>(s.gate_count) / static_cast<double>(s.stage_count);
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", s.gate_density);
  s.gate_density_display = buf;
  return s;
}

std::string render_summary(const SpecSummary& s) {
  std::ostringstream out;
  out << s.id << " pattern=" << to_string(s.pattern) << " stages=" << s.stage_count
      << " agents=" << s.agent_count << " gates=" << s.gate_count;
  if (s.cluster_member_count > 0) out << " cluster=" << s.cluster_member_count;
  if (s.voter_count > 0) out << " voters=" << s.voter_count;
  out << " rho=" << s.gate_density_display;
  out << " monitor=" << (s.monitor_enabled ? s.monitor_agent : "-");
  return out.str();
}

}  // namespace arena::model
