#include "arena/agents.hpp"

#include <algorithm>
#include <sstream>

#include "arena/runtime.hpp"

namespace arena::agents {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_fencing(std::string line) {
  line = trim(line);
  while (!line.empty() && (line.front() == '`' || line.front() == '*' || line.front() == '>')) {
    line.erase(line.begin());
  }
  while (!line.empty() && (line.back() == '`' || line.back() == '*' || line.back() == '.')) {
    line.pop_back();
  }
  return trim(line);
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  lines.push_back(current);
  return lines;
}

std::string join_agents(const std::vector<std::string>& ids) {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += "+";
    out += ids[i];
  }
  return out;
}

}  // namespace

std::string ContextBundle::render_tools() const {
  if (tool_schemas.empty()) return "";
  std::ostringstream out;
  out << "available tools:\n";
  for (const ToolSchema& t : tool_schemas) {
    out << "- " << t.name << ": " << t.description << " args: " << t.parameters.dump() << "\n";
  }
  return out.str();
}

std::string ContextBundle::render() const {
  std::string out;
  auto append = [&](const std::string& layer) {
    if (layer.empty()) return;
    if (!out.empty()) out += "\n\n";
    out += layer;
  };
  append(soul_prompt);
  append(stage_context);
  append(render_tools());
  append(format_instructions);
  return out;
}

namespace {

std::string format_instructions_for(const model::Stage& stage) {
  std::ostringstream out;
  out << "stage: " << stage.id << " (" << model::to_string(stage.kind) << ")\n";
  switch (stage.kind) {
    case model::StageKind::gate: {
      out << "Review the work so far. Conclude with a line 'decision: approve' or "
             "'decision: reject'.";
      std::vector<std::string> extras;
      for (const std::string& token : stage.transition_tokens()) {
        if (token != model::decisions::approve && token != model::decisions::reject) {
          extras.push_back(token);
        }
      }
      if (!extras.empty()) {
        out << " Escape transitions available:";
        for (const std::string& t : extras) out << " " << t;
        out << ".";
      }
      break;
    }
    case model::StageKind::consensus:
      out << "Cast your vote on the proposal. Conclude with a vote line: "
             "'decision: vote_yes', 'decision: vote_no', or 'decision: abstain'.";
      break;
    case model::StageKind::cluster:
      out << "Execute your assigned portion of the work. Conclude with "
             "'decision: success' or 'decision: failure'.";
      break;
    case model::StageKind::single: {
      if (stage.transitions.size() <= 1) {
        out << "When your work is complete, conclude with 'decision: next' "
               "(omitting the line also advances).";
      } else {
        out << "Conclude with a decision line choosing one of:";
        for (const std::string& t : stage.transition_tokens()) out << " " << t;
        out << ".";
      }
      break;
    }
    case model::StageKind::terminal:
      break;
  }
  return out.str();
}

}  // namespace

ContextBundle assemble_prompt(const runtime::TaskState& state, const model::Stage& stage,
                              const model::GovernanceSpec& spec, const SharedState& shared,
                              const model::Agent& agent, const PromptOptions& opts) {
  (void)spec;
  ContextBundle bundle;
  bundle.soul_prompt = agent.soul_prompt;

  std::ostringstream ctx;
  ctx << "instructions: " << state.instructions << "\n";
  if (!state.history.empty()) {
    ctx << "history:\n";
    size_t window = static_cast<size_t>(std::max(opts.history_window, 0));
    size_t start = state.history.size() > window ? state.history.size() - window : 0;
    for (size_t i = start; i < state.history.size(); ++i) {
      const runtime::Event& e = state.history[i];
      ctx << "  [" << e.step << "] " << e.stage_id << " (" << model::to_string(e.kind) << ") by "
          << join_agents(e.agents) << " -> " << e.decision;
      if (!e.summary.empty()) ctx << ": " << e.summary;
      ctx << "\n";
    }
  }
  if (!shared.empty()) {
    ctx << "shared:\n";
    for (const auto& [key, value] : shared.values) {
      ctx << "  " << key << "=" << value << "\n";
    }
  }
  bundle.stage_context = ctx.str();
  bundle.format_instructions = format_instructions_for(stage);
  return bundle;
}

ContextBundle assemble_prompt(const runtime::TaskState& state, const model::Stage& stage,
                              const model::GovernanceSpec& spec, const SharedState& shared,
                              const PromptOptions& opts) {
  if (stage.kind != model::StageKind::single && stage.kind != model::StageKind::gate) {
    throw std::invalid_argument("assemble_prompt without an agent only fits single/gate stages");
  }
  const model::Agent* agent = spec.find_agent(stage.agent);
  if (!agent) throw std::invalid_argument("stage '" + stage.id + "' has no bound agent");
  return assemble_prompt(state, stage, spec, shared, *agent, opts);
}

std::optional<std::string> find_decision_line(const std::string& text) {
  std::optional<std::string> token;
  for (const std::string& raw : split_lines(text)) {
    std::string line = strip_fencing(raw);
    const std::string prefix = "decision:";
    if (line.rfind(prefix, 0) != 0) continue;
    std::string value = trim(line.substr(prefix.size()));
    if (!value.empty()) token = value;
  }
  return token;
}

std::vector<std::pair<std::string, std::string>> find_set_directives(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& raw : split_lines(text)) {
    std::string line = strip_fencing(raw);
    if (line.rfind("set ", 0) != 0) continue;
    std::string rest = trim(line.substr(4));
    size_t eq = rest.find('=');
    if (eq == std::string::npos || eq == 0) continue;
    std::string key = trim(rest.substr(0, eq));
    std::string value = trim(rest.substr(eq + 1));
    if (!key.empty()) out.emplace_back(key, value);
  }
  return out;
}

ParsedDecision parse_decision(const AgentResponse& response, const model::Stage& stage,
                              ParseMode mode) {
  ParsedDecision result;
  std::optional<std::string> token = find_decision_line(response.text);

  if (mode == ParseMode::voter) {
    if (!token) {
      result.error = "no decision line in vote";
      return result;
    }
    const auto& votes = model::decisions::vote_tokens();
    if (std::find(votes.begin(), votes.end(), *token) == votes.end()) {
      result.error = "invalid vote token '" + *token + "'";
      return result;
    }
    result.ok = true;
    result.token = *token;
    return result;
  }

  if (!token) {
    // A lone outgoing edge needs no explicit decision.
    if (stage.kind == model::StageKind::single && stage.transitions.size() == 1) {
      result.ok = true;
      result.token = stage.transitions.begin()->first;
      return result;
    }
    result.error = "no decision line in response";
    return result;
  }
  if (!stage.has_transition(*token)) {
    result.error = "token '" + *token + "' is not a transition of stage '" + stage.id + "'";
    return result;
  }
  result.ok = true;
  result.token = *token;
  return result;
}

std::vector<AgentResponse> Backend::chat_many(const std::vector<ContextBundle>& bundles,
                                              const std::vector<DispatchInfo>& infos) {
  std::vector<AgentResponse> out;
  out.reserve(bundles.size());
  for (size_t i = 0; i < bundles.size(); ++i) {
    out.push_back(chat(bundles[i], infos[i]));
  }
  return out;
}

AgentResponse text_response(std::string text) {
  AgentResponse r;
  r.text = std::move(text);
  return r;
}

AgentResponse decision_response(const std::string& token) {
  return text_response("decision: " + token);
}

AgentResponse tool_call_response(std::vector<ToolCall> calls, std::string text) {
  AgentResponse r;
  r.text = std::move(text);
  r.tool_calls = std::move(calls);
  return r;
}

Script& Script::on(const std::string& stage_id, const std::string& agent_id,
                   std::vector<AgentResponse> responses) {
  agent_entries[{stage_id, agent_id}] = std::move(responses);
  return *this;
}

Script& Script::on_stage(const std::string& stage_id, std::vector<AgentResponse> responses) {
  stage_entries[stage_id] = std::move(responses);
  return *this;
}

Script& Script::stage_default(const std::string& stage_id, AgentResponse response) {
  stage_defaults[stage_id] = std::move(response);
  return *this;
}

Script& Script::fallback(AgentResponse response) {
  default_response = std::move(response);
  return *this;
}

ScriptedBackend::ScriptedBackend(Script script) : script_(std::move(script)) {}

AgentResponse ScriptedBackend::chat(const ContextBundle& bundle, const DispatchInfo& info) {
  const std::pair<std::string, std::string> key{info.stage_id, info.agent_id};
  const int visit = cursors_[key]++;

  AgentResponse response;
  bool found = false;
  if (auto it = script_.agent_entries.find(key); it != script_.agent_entries.end()) {
    if (static_cast<size_t>(visit) < it->second.size()) {
      response = it->second[visit];
      found = true;
    }
  }
  // Stage-keyed fallbacks script the stage's own roster; a monitor riding
  // alongside must not inherit them.
  const bool side_channel = info.purpose == DispatchPurpose::monitor;
  if (!found && !side_channel) {
    if (auto it = script_.stage_entries.find(info.stage_id); it != script_.stage_entries.end()) {
      if (static_cast<size_t>(visit) < it->second.size()) {
        response = it->second[visit];
        found = true;
      }
    }
  }
  if (!found && !side_channel) {
    if (auto it = script_.stage_defaults.find(info.stage_id); it != script_.stage_defaults.end()) {
      response = it->second;
      found = true;
    }
  }
  if (!found && !side_channel && script_.default_response) {
    response = *script_.default_response;
    found = true;
  }
  if (!found) {
    if (info.purpose == DispatchPurpose::monitor) {
      response = text_response("");
    } else {
      throw ScriptError("script exhausted at stage '" + info.stage_id + "' agent '" +
                        info.agent_id + "' visit " + std::to_string(visit));
    }
  }
  charge_synthetic(response, bundle);
  return response;
}

StochasticBackend::StochasticBackend(StochasticPolicy policy)
    : policy_(policy), rng_(policy.seed) {}

double StochasticBackend::draw() {
  // Fixed mapping to [0, 1); uniform_real_distribution is not pinned across
  // standard library implementations.
  return static_cast<double>(rng_() >> 11) * (1.0 / 9007199254740992.0);
}

AgentResponse StochasticBackend::chat(const ContextBundle& bundle, const DispatchInfo& info) {
  AgentResponse response;
  if (info.purpose == DispatchPurpose::monitor) {
    if (policy_.monitor_warn_prob > 0.0 && draw() < policy_.monitor_warn_prob) {
      response = text_response("observed pressure at stage " + info.stage_id);
    } else {
      response = text_response("");
    }
    charge_synthetic(response, bundle);
    return response;
  }
  switch (info.kind) {
    case model::StageKind::gate: {
      double p = policy_.gate_approve_prob;
      if (auto it = policy_.stage_approve_prob.find(info.stage_id);
          it != policy_.stage_approve_prob.end()) {
        p = it->second;
      }
      response = decision_response(draw() < p ? model::decisions::approve
                                              : model::decisions::reject);
      break;
    }
    case model::StageKind::consensus: {
      if (policy_.voter_abstain_prob > 0.0 && draw() < policy_.voter_abstain_prob) {
        response = decision_response(model::decisions::abstain);
      } else {
        response = decision_response(draw() < policy_.voter_yes_prob ? model::decisions::vote_yes
                                                                     : model::decisions::vote_no);
      }
      break;
    }
    case model::StageKind::cluster:
      response = decision_response(draw() < policy_.member_success_prob
                                       ? model::decisions::success
                                       : model::decisions::failure);
      break;
    case model::StageKind::single:
    case model::StageKind::terminal:
      response = decision_response(model::decisions::next);
      break;
  }
  charge_synthetic(response, bundle);
  return response;
}

long long synthetic_tokens(const std::string& text) {
  return static_cast<long long>(text.size() / 4);
}

void charge_synthetic(AgentResponse& response, const ContextBundle& bundle) {
  response.prompt_tokens = synthetic_tokens(bundle.render());
  response.completion_tokens = synthetic_tokens(response.text);
}

}  // namespace arena::agents
